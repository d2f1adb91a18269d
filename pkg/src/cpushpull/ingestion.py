"""Loading, normalising and sharding labelled binary-classification data."""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ParameterError, ParseError

QSAR_FEATURES = 41
QSAR_LABELS = {"RB": 1.0, "NRB": -1.0}

_SHARD_STREAM = 0x5A4D
_SYNTH_STREAM = 0x5E7D


@dataclass(frozen=True)
class RawDataset:
    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        Z = np.asarray(self.features, dtype=float)
        y = np.asarray(self.labels, dtype=float)
        if Z.ndim != 2 or y.ndim != 1 or Z.shape[0] != y.shape[0]:
            raise ParameterError(f"features {Z.shape} and labels {y.shape} do not line up")
        if not np.all(np.isfinite(Z)):
            raise ParameterError("features contain non-finite entries")
        if not np.all(np.abs(y) == 1.0):
            raise ParameterError("labels must be +1 or -1")
        object.__setattr__(self, "features", Z)
        object.__setattr__(self, "labels", y)

    @property
    def m(self):
        return self.features.shape[0]

    @property
    def p(self):
        return self.features.shape[1]


def load_qsar_csv(path, n_features=QSAR_FEATURES):
    """Parse a semicolon-separated file of ``n_features`` numbers plus a class token.

    Class ``RB`` maps to +1 and ``NRB`` to -1.  Blank lines are skipped.  An
    empty file gives an empty dataset.
    """
    text = Path(path).read_text()
    rows, labels = [], []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        fields = line.strip().split(";")
        if len(fields) != n_features + 1:
            raise ParseError(f"expected {n_features + 1} fields, found {len(fields)}", row=lineno)
        try:
            values = [float(f) for f in fields[:-1]]
        except ValueError:
            raise ParseError("non-numeric feature", row=lineno) from None
        if not all(np.isfinite(values)):
            raise ParseError("non-finite feature", row=lineno)
        token = fields[-1].strip()
        if token not in QSAR_LABELS:
            raise ParseError(f"unknown class token {token!r}", row=lineno)
        rows.append(values)
        labels.append(QSAR_LABELS[token])
    features = np.array(rows, dtype=float).reshape(len(rows), n_features)
    return RawDataset(features, np.array(labels, dtype=float))


def normalize_features(d):
    """Standardise each column to zero mean and unit (population) variance.

    Constant columns become all zeros.
    """
    if d.m < 2:
        raise ParameterError("normalisation needs at least two rows")
    Z = d.features
    mean = Z.mean(axis=0)
    std = Z.std(axis=0)
    centred = Z - mean
    out = np.zeros_like(Z)
    ok = std > 0
    out[:, ok] = centred[:, ok] / std[ok]
    return RawDataset(out, d.labels.copy())


def partition_to_agents(d, n, seed):
    """Shuffle by ``seed`` and cut into ``n`` contiguous, nearly equal shards.

    Larger shards come first, so m=10, n=3 gives sizes (4, 3, 3).
    """
    if n < 1 or d.m < n:
        raise ParameterError(f"cannot split {d.m} samples over {n} agents")
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(_SHARD_STREAM,)))
    perm = rng.permutation(d.m)
    return [RawDataset(d.features[idx], d.labels[idx]) for idx in np.array_split(perm, n)]


def synth_logistic(n, p, per_agent, seed, flip=0.1, return_truth=False):
    """Synthetic logistic-regression data: ``n * per_agent`` samples in ``p`` dims.

    Features are i.i.d. N(0, 1/p) so rows have unit norm in expectation; labels
    are the sign of a planted hyperplane, each flipped with probability
    ``flip``.  With ``return_truth`` the planted normal and the flip mask are
    returned as well.
    """
    if min(n, p, per_agent) < 1:
        raise ParameterError("n, p and per_agent must be positive")
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(_SYNTH_STREAM,)))
    m = n * per_agent
    w = rng.standard_normal(p)
    Z = rng.standard_normal((m, p)) / np.sqrt(p)
    clean = np.where(Z @ w >= 0.0, 1.0, -1.0)
    flipped = rng.random(m) < flip
    labels = np.where(flipped, -clean, clean)
    data = RawDataset(Z, labels)
    if return_truth:
        return data, w, flipped
    return data
