import numpy as np
import pytest

from cpushpull.errors import ParameterError, ParseError
from cpushpull.ingestion import (
    RawDataset,
    load_qsar_csv,
    normalize_features,
    partition_to_agents,
    synth_logistic,
)


def row(values, label="RB"):
    return ";".join(f"{v:g}" for v in values) + f";{label}"


@pytest.fixture
def good_lines():
    rng = np.random.default_rng(0)
    return [row(rng.integers(0, 9, 41), lab) for lab in ("RB", "NRB", "RB")]


def test_load_valid(tmp_path, good_lines):
    path = tmp_path / "qsar.csv"
    path.write_text("\n".join(good_lines) + "\n")
    d = load_qsar_csv(path)
    assert (d.m, d.p) == (3, 41)
    np.testing.assert_array_equal(d.labels, [1.0, -1.0, 1.0])


def test_load_empty(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("")
    d = load_qsar_csv(path)
    assert d.m == 0 and d.p == 41
    with pytest.raises(ParameterError):
        partition_to_agents(d, 2, seed=0)


def test_missing_file(tmp_path):
    with pytest.raises(OSError):
        load_qsar_csv(tmp_path / "nope.csv")


# (line text, is_valid) -- the parser must reject exactly the invalid ones
FUZZ = [
    (row(range(41)), True),
    (row(range(41), "NRB"), True),
    (row([0.5] * 41) + "  ", True),
    (row(range(40)), False),
    (row(range(42)), False),
    (row(range(41), "rb"), False),
    (row(range(41), ""), False),
    (";".join(["1"] * 40 + ["x"]) + ";RB", False),
    (";".join(["1"] * 40 + ["nan"]) + ";RB", False),
    (";".join(["1"] * 40 + ["inf"]) + ";NRB", False),
    (",".join(["1"] * 41) + ",RB", False),
    ("1e-3;" * 41 + "NRB", True),
]


@pytest.mark.parametrize("text,valid", FUZZ)
def test_fuzz_corpus(tmp_path, good_lines, text, valid):
    path = tmp_path / "f.csv"
    path.write_text("\n".join([good_lines[0], text, good_lines[1]]) + "\n")
    if valid:
        assert load_qsar_csv(path).m == 3
    else:
        with pytest.raises(ParseError) as info:
            load_qsar_csv(path)
        assert info.value.row == 2
        assert "row 2" in str(info.value)


def test_normalize_examples():
    d = RawDataset(np.array([[1.0, 5.0], [3.0, 5.0]]), np.array([1.0, -1.0]))
    out = normalize_features(d)
    np.testing.assert_array_equal(out.features, [[-1.0, 0.0], [1.0, 0.0]])


def test_normalize_idempotent():
    rng = np.random.default_rng(1)
    d = RawDataset(rng.standard_normal((30, 6)) * 4 + 2, np.ones(30))
    once = normalize_features(d)
    twice = normalize_features(once)
    np.testing.assert_allclose(twice.features, once.features, atol=1e-12)
    np.testing.assert_allclose(once.features.mean(axis=0), 0.0, atol=1e-12)
    np.testing.assert_allclose(once.features.std(axis=0), 1.0, atol=1e-12)


def test_partition_sizes_and_cover():
    d = synth_logistic(1, 3, 10, seed=0)
    shards = partition_to_agents(d, 3, seed=5)
    assert [s.m for s in shards] == [4, 3, 3]
    joined = np.vstack([s.features for s in shards])
    # reassembly is a row permutation of the original
    order = np.lexsort(joined.T)
    np.testing.assert_array_equal(joined[order], d.features[np.lexsort(d.features.T)])
    assert len({tuple(r) for r in joined}) == 10


def test_partition_one_per_agent():
    d = synth_logistic(20, 41, 1, seed=0)
    shards = partition_to_agents(d, 20, seed=0)
    assert all(s.m == 1 for s in shards)


def test_partition_errors_and_determinism():
    d = synth_logistic(2, 3, 2, seed=0)
    with pytest.raises(ParameterError):
        partition_to_agents(d, 5, seed=0)
    a = partition_to_agents(d, 2, seed=9)
    b = partition_to_agents(d, 2, seed=9)
    for s, t in zip(a, b):
        np.testing.assert_array_equal(s.features, t.features)


def test_synth_deterministic_and_labels():
    a = synth_logistic(4, 5, 3, seed=2)
    b = synth_logistic(4, 5, 3, seed=2)
    np.testing.assert_array_equal(a.features, b.features)
    np.testing.assert_array_equal(a.labels, b.labels)
    assert set(np.unique(a.labels)) <= {-1.0, 1.0}
    assert a.m == 12 and a.p == 5


def test_synth_flip_rate_and_scale():
    d, w, flipped = synth_logistic(100, 41, 100, seed=3, return_truth=True)
    clean = np.where(d.features @ w >= 0, 1.0, -1.0)
    rate = np.mean(d.labels != clean)
    assert 0.08 < rate < 0.12
    assert np.mean(flipped) == rate
    assert np.mean(np.sum(d.features**2, axis=1)) == pytest.approx(1.0, abs=0.02)


def test_rawdataset_validation():
    with pytest.raises(ParameterError):
        RawDataset(np.ones((2, 2)), np.array([1.0, 0.0]))
    with pytest.raises(ParameterError):
        RawDataset(np.array([[np.inf, 1.0]]), np.array([1.0]))
