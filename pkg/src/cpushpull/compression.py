"""Unbiased random compressors and their transmitted-bit cost.

Three operators are available: ``identity``, ``quantize`` (dithered b-bit
2-quantization scaled by the vector norm) and ``randk`` (keep k uniformly
chosen coordinates, rescaled by p/k).

String form: ``"identity"``, ``"quantize:b=<int>"`` or
``"randk:k=<int>"``.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ParameterError

FLOAT_BITS = 64

KINDS = ("identity", "quantize_b", "rand_k")
_ALIASES = {"identity": "identity", "quantize": "quantize_b", "quantize_b": "quantize_b",
            "randk": "rand_k", "rand_k": "rand_k"}


@dataclass(frozen=True)
class CompressorSpec:
    kind: str = "identity"
    b: int = None
    k: int = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown compressor kind {self.kind!r}")
        if self.kind == "quantize_b" and (not isinstance(self.b, int) or self.b < 1):
            raise ParameterError(f"quantize needs integer b >= 1, got {self.b!r}")
        if self.kind == "rand_k" and (not isinstance(self.k, int) or self.k < 1):
            raise ParameterError(f"randk needs integer k >= 1, got {self.k!r}")

    @classmethod
    def parse(cls, text):
        """Build a spec from ``"identity"``, ``"quantize:b=4"`` or ``"randk:k=10"``."""
        head, _, tail = text.strip().partition(":")
        kind = _ALIASES.get(head.strip().lower())
        if kind is None:
            raise ParameterError(f"unknown compressor {head!r}")
        args = {}
        if tail:
            for part in tail.split(","):
                key, eq, val = part.partition("=")
                if not eq:
                    raise ParameterError(f"malformed compressor argument {part!r}")
                try:
                    args[key.strip()] = int(val)
                except ValueError:
                    raise ParameterError(f"compressor argument {part!r} is not an integer") from None
        expected = {"identity": set(), "quantize_b": {"b"}, "rand_k": {"k"}}[kind]
        if set(args) != expected:
            raise ParameterError(f"{head} expects arguments {sorted(expected)}, got {sorted(args)}")
        return cls(kind, **args)

    def __str__(self):
        if self.kind == "quantize_b":
            return f"quantize:b={self.b}"
        if self.kind == "rand_k":
            return f"randk:k={self.k}"
        return "identity"

    def check_dim(self, p):
        if self.kind == "rand_k" and self.k > p:
            raise ParameterError(f"randk k={self.k} exceeds dimension p={p}")


@dataclass(frozen=True)
class CompressedVector:
    payload: np.ndarray
    bits: int


def c2_of(spec, p):
    """Relative variance constant ``E|C(x)-x|^2 <= C2 |x|^2``.

    Exact for rand-k (``p/k - 1``).  For quantization this is the upper bound
    ``p * 4**(1-b)``; per-coordinate dithered rounding contributes at most a
    quarter of that.
    """
    spec.check_dim(p)
    if spec.kind == "identity":
        return 0.0
    if spec.kind == "rand_k":
        return p / spec.k - 1.0
    return p * 4.0 ** (1 - spec.b)


def bit_cost(spec, p):
    """Bits on the wire for one compressed p-vector.

    identity: p doubles.  quantize: one double for the norm plus a sign bit and
    a b-bit level per entry.  randk: a double and a ceil(log2 p)-bit index per
    kept entry.
    """
    spec.check_dim(p)
    if spec.kind == "identity":
        return FLOAT_BITS * p
    if spec.kind == "quantize_b":
        return FLOAT_BITS + p * (1 + spec.b)
    return spec.k * (FLOAT_BITS + (p - 1).bit_length())


def compress_rows(spec, X, rng):
    """Compress each row of the ``(n, p)`` array ``X`` independently.

    Non-identity specs consume exactly ``n * p`` uniforms from ``rng``.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ParameterError("compress_rows expects a 2-d array")
    if not np.all(np.isfinite(X)):
        raise ParameterError("cannot compress non-finite input")
    spec.check_dim(X.shape[1])
    if spec.kind == "identity":
        return X.copy()
    V = rng.random(X.shape)
    if spec.kind == "quantize_b":
        return kernels.quantize_rows(X, V, spec.b)
    return kernels.randk_rows(X, V, spec.k)


def compress(spec, x, rng):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ParameterError("compress expects a 1-d vector")
    payload = compress_rows(spec, x[None, :], rng)[0]
    return CompressedVector(payload, bit_cost(spec, x.shape[0]))

