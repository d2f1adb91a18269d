import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from cpushpull import kernels
from cpushpull.compression import CompressorSpec, bit_cost, c2_of, compress, compress_rows
from cpushpull.errors import ParameterError

QUANT = [CompressorSpec("quantize_b", b=b) for b in (1, 2, 4, 6)]
RANDK = [CompressorSpec("rand_k", k=k) for k in (1, 5, 10, 20)]


def exact_quantizer_moments(x, b):
    """Mean and E|C(x)-x|^2 of dithered quantization, from floor(t+v) with v~U(0,1).

    floor(t + v) equals floor(t)+1 with probability frac(t), else floor(t).
    """
    nrm = np.linalg.norm(x)
    t = (2 ** (b - 1)) * np.abs(x) / nrm
    lo = np.floor(t)
    f = t - lo
    step = nrm * 2.0 ** (1 - b)
    mean = np.sign(x) * step * (lo + f)
    var = np.sum(step**2 * f * (1 - f))
    return mean, var


def test_quantize_scalar_is_exact():
    rng = np.random.default_rng(0)
    for _ in range(50):
        out = compress(CompressorSpec("quantize_b", b=2), np.array([1.0]), rng)
        assert out.payload[0] == 1.0


def test_randk_p2_k1_outcomes():
    rng = np.random.default_rng(1)
    spec = CompressorSpec("rand_k", k=1)
    seen = {}
    for _ in range(4000):
        y = tuple(compress(spec, np.array([1.0, 1.0]), rng).payload)
        seen[y] = seen.get(y, 0) + 1
    assert set(seen) == {(2.0, 0.0), (0.0, 2.0)}
    assert abs(seen[(2.0, 0.0)] / 4000 - 0.5) < 0.04


def test_randk_c2_by_enumeration():
    # both equally likely outcomes for x=(1,1): error vectors (+1,-1) and (-1,+1)
    x = np.array([1.0, 1.0])
    outcomes = [np.array([2.0, 0.0]), np.array([0.0, 2.0])]
    mse = np.mean([np.sum((o - x) ** 2) for o in outcomes])
    assert mse == pytest.approx(c2_of(CompressorSpec("rand_k", k=1), 2) * x @ x)
    assert c2_of(CompressorSpec("rand_k", k=1), 2) == 1.0


def test_randk_enumeration_mean_and_mse_general():
    p, k = 5, 2
    rng = np.random.default_rng(2)
    x = rng.standard_normal(p)
    outs = []
    for subset in itertools.combinations(range(p), k):
        y = np.zeros(p)
        y[list(subset)] = x[list(subset)] * p / k
        outs.append(y)
    outs = np.array(outs)
    np.testing.assert_allclose(outs.mean(axis=0), x, atol=1e-14)
    mse = np.mean(np.sum((outs - x) ** 2, axis=1))
    assert mse == pytest.approx(c2_of(CompressorSpec("rand_k", k=k), p) * x @ x, rel=1e-12)


@pytest.mark.parametrize("spec", [CompressorSpec()] + QUANT + RANDK[:1])
def test_zero_vector(spec):
    out = compress(spec, np.zeros(4), np.random.default_rng(0))
    assert np.all(out.payload == 0.0)


def test_identity_verbatim():
    out = compress(CompressorSpec(), np.array([3.0, -4.0]), None)
    np.testing.assert_array_equal(out.payload, [3.0, -4.0])
    assert out.bits == 128


def test_c2_values():
    assert c2_of(CompressorSpec(), 41) == 0.0
    assert c2_of(CompressorSpec("rand_k", k=5), 41) == pytest.approx(7.2)
    assert c2_of(CompressorSpec("rand_k", k=41), 41) == 0.0
    assert c2_of(CompressorSpec("quantize_b", b=2), 41) == pytest.approx(41 / 4)
    for spec in QUANT + RANDK:
        assert c2_of(spec, 41) >= 0


def test_bit_costs():
    assert bit_cost(CompressorSpec(), 41) == 2624
    assert bit_cost(CompressorSpec("quantize_b", b=2), 41) == 187
    assert bit_cost(CompressorSpec("rand_k", k=5), 41) == 350
    assert bit_cost(CompressorSpec("rand_k", k=1), 1) == 64
    assert bit_cost(CompressorSpec("rand_k", k=2), 64) == 2 * (64 + 6)
    assert bit_cost(CompressorSpec("rand_k", k=2), 65) == 2 * (64 + 7)


@pytest.mark.parametrize("b", [1, 2, 4, 6])
def test_quantizer_exact_moments_within_c2(b):
    rng = np.random.default_rng(b)
    for _ in range(20):
        x = rng.standard_normal(41) * rng.uniform(0.01, 100)
        mean, var = exact_quantizer_moments(x, b)
        np.testing.assert_allclose(mean, x, rtol=1e-12, atol=1e-12 * np.abs(x).max())
        assert var <= c2_of(CompressorSpec("quantize_b", b=b), 41) * (x @ x)


@pytest.mark.parametrize("spec", QUANT[1:] + RANDK[1:3], ids=str)
def test_statistical_unbiasedness_and_variance(spec):
    p = 41
    rng = np.random.default_rng(11)
    x = rng.standard_normal(p)
    N = 100_000
    draws = compress_rows(spec, np.broadcast_to(x, (N, p)), rng)
    mean = draws.mean(axis=0)
    se = draws.std(axis=0) / np.sqrt(N)
    assert np.all(np.abs(mean - x) <= 4 * se + 1e-15)
    rel = np.mean(np.sum((draws - x) ** 2, axis=1)) / (x @ x)
    c2 = c2_of(spec, p)
    if spec.kind == "rand_k":
        assert 0.95 * c2 <= rel <= 1.05 * c2
    else:
        assert rel <= c2
        # against the exact second moment
        assert rel == pytest.approx(exact_quantizer_moments(x, spec.b)[1] / (x @ x), rel=0.02)


def test_randk_full_is_identity():
    rng = np.random.default_rng(3)
    x = rng.standard_normal(9)
    out = compress(CompressorSpec("rand_k", k=9), x, rng)
    np.testing.assert_array_equal(out.payload, x)


@settings(max_examples=60, deadline=None)
@given(
    x=arrays(np.float64, st.integers(1, 30), elements=st.floats(-1e6, 1e6, allow_subnormal=False)),
    b=st.integers(1, 8),
    seed=st.integers(0, 2**32 - 1),
)
def test_quantize_lattice(x, b, seed):
    y = compress(CompressorSpec("quantize_b", b=b), x, np.random.default_rng(seed)).payload
    nrm = np.linalg.norm(x)
    if nrm == 0:
        assert np.all(y == 0)
        return
    m = np.abs(y) / (nrm * 2.0 ** (1 - b))
    np.testing.assert_allclose(m, np.round(m), atol=1e-9)
    assert np.all(np.round(m) <= 2 ** (b - 1) + 1)
    assert np.all((np.sign(y) == np.sign(x)) | (y == 0))


@settings(max_examples=40, deadline=None)
@given(
    x=arrays(np.float64, st.integers(1, 20), elements=st.floats(-1e3, 1e3)),
    seed=st.integers(0, 2**32 - 1),
    kind=st.sampled_from(["quantize:b=3", "randk:k=1", "identity"]),
)
def test_determinism(x, seed, kind):
    spec = CompressorSpec.parse(kind)
    a = compress(spec, x, np.random.default_rng(seed)).payload
    b = compress(spec, x, np.random.default_rng(seed)).payload
    np.testing.assert_array_equal(a, b)


def test_input_errors():
    with pytest.raises(ParameterError):
        compress(CompressorSpec("quantize_b", b=2), np.array([1.0, np.nan]), np.random.default_rng(0))
    with pytest.raises(ParameterError):
        compress(CompressorSpec("rand_k", k=5), np.ones(3), np.random.default_rng(0))
    with pytest.raises(ParameterError):
        bit_cost(CompressorSpec("rand_k", k=5), 3)


@pytest.mark.parametrize(
    "text,expected",
    [
        ("identity", CompressorSpec()),
        ("quantize:b=4", CompressorSpec("quantize_b", b=4)),
        ("randk:k=10", CompressorSpec("rand_k", k=10)),
        (" randk : k = 3 ", CompressorSpec("rand_k", k=3)),
    ],
)
def test_parse(text, expected):
    assert CompressorSpec.parse(text) == expected
    assert CompressorSpec.parse(str(expected)) == expected


@pytest.mark.parametrize("text", ["quantize:b=0", "quantize", "randk:k=0", "randk:b=2", "topk:k=3", "quantize:b=x"])
def test_parse_errors(text):
    with pytest.raises(ParameterError):
        CompressorSpec.parse(text)


@pytest.mark.skipif(not kernels.HAVE_NUMBA, reason="numba unavailable")
@pytest.mark.parametrize("name,arg", [("quantize_rows", 3), ("randk_rows", 7)])
def test_backend_parity(name, arg):
    f_np, f_nb = kernels.variants(name)
    rng = np.random.default_rng(0)
    X = rng.standard_normal((20, 41))
    X[3] = 0.0
    V = rng.random(X.shape)
    np.testing.assert_allclose(f_nb(X, V, arg), f_np(X, V, arg), rtol=1e-13, atol=1e-15)
