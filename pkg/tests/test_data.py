import numpy as np
import pytest
from hypothesis import given, strategies as st

from isbor.data import (STREAM_PARTITION, STREAM_SYNTH, Dataset, apply_scaler, find_benchmark,
                        generate_synthetic, label_scores, load_benchmark, load_csv, load_manifest,
                        load_table, partition, partition_indices, read_features, remap_labels, rng,
                        standardize, synthetic_scores, validate_benchmark, write_csv)
from isbor.errors import InputError, ParseError

TARGET_COUNTS = np.array([4431, 4535, 3949, 3780, 4305]) / 21000


def test_synthetic_shape_and_range():
    ds = generate_synthetic(500, seed=2)
    assert ds.X.shape == (500, 2) and ds.r == 5
    assert ds.X.min() >= 0 and ds.X.max() <= 10
    assert set(np.unique(ds.Y)) <= {1, 2, 3, 4, 5}


def test_synthetic_class_balance():
    ds = generate_synthetic(21000, seed=0)
    prop = np.bincount(ds.Y, minlength=6)[1:] / ds.n
    assert np.max(np.abs(prop - TARGET_COUNTS)) < 0.02


def test_synthetic_deterministic_per_seed():
    a, b = generate_synthetic(300, seed=9), generate_synthetic(300, seed=9)
    assert np.array_equal(a.X, b.X) and np.array_equal(a.Y, b.Y)
    assert not np.array_equal(a.X, generate_synthetic(300, seed=10).X)


def test_literal_offset_threshold_arithmetic():
    # with the saddle centred at 0.5 the deterministic part at x1 = 0.5 is 0
    assert synthetic_scores(np.array([[0.5, 7.3]]), center=0.5)[0] == 0.0
    assert label_scores([0.0]) == [3]
    s = synthetic_scores(np.array([[10.0, 10.0]]), center=0.5)[0]
    assert s == pytest.approx(902.5) and label_scores([s]) == [5]
    assert list(label_scores([-60.0, -59.9, -9.0, 15.0, 60.0, 60.1])) == [1, 2, 2, 3, 4, 5]


def test_score_moments():
    X = rng(4, STREAM_SYNTH).uniform(0, 10, size=(100_000, 2))
    for center, mean in ((0.5, 202.5), (5.0, 0.0)):
        s = synthetic_scores(X, center)
        se = s.std() / np.sqrt(s.size)
        assert abs(s.mean() - mean) < 3 * se


def test_streams_independent():
    a = rng(0, STREAM_SYNTH).uniform(size=5)
    b = rng(0, STREAM_PARTITION).uniform(size=5)
    assert not np.allclose(a, b)


def test_generate_rejects_empty():
    with pytest.raises(InputError):
        generate_synthetic(0)


def test_load_csv_roundtrip(tmp_path):
    ds = generate_synthetic(30, seed=1)
    p = tmp_path / "s.csv"
    write_csv(p, ds)
    back = load_csv(p)
    assert np.array_equal(back.X, ds.X)
    assert back.n == 30 and back.names == ("x1", "x2")


def test_load_csv_small_and_remap(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("1.0,2.0,7\n3.0,4.0,2\n5.0,6.0,4\n")
    ds = load_csv(p)
    assert ds.n == 3 and ds.r == 3
    assert list(ds.Y) == [3, 1, 2]
    assert ds.label_values == (2, 4, 7)


@pytest.mark.parametrize("text,row", [
    ("a,b,y\n1,2,1\n3,4\n", 3),
    ("1,2,1\n3,x,2\n", 2),
    ("1,2,1\n3,4,1.5\n", 2),
    ("1,2,1\n3,nan,2\n", 2),
])
def test_load_csv_errors_name_row(tmp_path, text, row):
    p = tmp_path / "bad.csv"
    p.write_text(text)
    with pytest.raises(ParseError) as info:
        load_csv(p)
    assert f"row {row}" in str(info.value)


def test_load_csv_empty_and_missing(tmp_path):
    p = tmp_path / "e.csv"
    p.write_text("")
    with pytest.raises(ParseError):
        load_csv(p)
    with pytest.raises(ParseError):
        load_csv(tmp_path / "nope.csv")


def test_load_table_whitespace(tmp_path):
    p = tmp_path / "t.txt"
    p.write_text("0.1 0.2 1\n0.3 0.4 2\n")
    ds = load_table(p)
    assert ds.n == 2 and ds.r == 2


def test_read_features_dimension(tmp_path):
    p = tmp_path / "f.csv"
    p.write_text("1,2,3\n4,5,6\n")
    X, lab = read_features(p, 2)
    assert X.shape == (2, 2) and list(lab) == [3, 6]
    X, lab = read_features(p, 3)
    assert lab is None
    with pytest.raises(InputError, match="expected 5"):
        read_features(p, 5)


@given(st.lists(st.integers(-5, 50), min_size=1, max_size=40))
def test_remap_contiguous_and_order_preserving(raw):
    mapped, values = remap_labels(np.array(raw))
    assert set(mapped.tolist()) == set(range(1, len(values) + 1))
    for a, b, ma, mb in zip(raw, raw[1:], mapped, mapped[1:]):
        assert (a < b) == (ma < mb)


def test_dataset_validation():
    with pytest.raises(InputError):
        Dataset(np.zeros((3, 2)), [1, 2], 2)
    with pytest.raises(InputError):
        Dataset(np.array([[np.inf]]), [1], 1)
    with pytest.raises(InputError):
        Dataset(np.zeros((2, 1)), [1, 3], 2)
    assert Dataset(np.zeros((2, 1)), [1, 1], 3).missing_categories() == [2, 3]


def test_standardize(rs):
    X = rs.normal(loc=3, scale=4, size=(50, 3))
    X[:, 2] = 7.0
    ds = Dataset(X, np.ones(50, dtype=int), 1)
    out, sc = standardize(ds)
    assert np.all(np.abs(out.X.mean(axis=0)) < 1e-10)
    np.testing.assert_allclose(out.X[:, :2].var(axis=0), 1.0, atol=1e-8)
    assert np.all(out.X[:, 2] == 0.0) and sc.scale[2] == 1.0
    assert np.array_equal(apply_scaler(sc, ds).X, out.X)


def test_partition():
    ds = generate_synthetic(21000, seed=0)
    parts = partition(ds, 1000, 3, seed=4)
    again = partition(ds, 1000, 3, seed=4)
    for (tr, te), (tr2, _) in zip(parts, again):
        assert tr.n == 1000 and te.n == 20000
        assert np.array_equal(tr.X, tr2.X)
    for tr, te in partition_indices(100, 30, 5, seed=1):
        assert not set(tr) & set(te) and len(tr) + len(te) == 100
    with pytest.raises(InputError):
        partition(ds, 21000, 1)


def test_manifest():
    m = load_manifest()
    assert set(m) == {"bs", "swd", "marketing", "bank", "computer", "calhouse", "census"}
    assert (m["bank"].n, m["bank"].d, m["bank"].r) == (8050, 8, 5)
    ds = Dataset(np.zeros((1000, 10)), np.tile([1, 2, 3, 4], 250), 4)
    assert validate_benchmark("SWD", ds).name == "SWD"
    with pytest.raises(InputError):
        validate_benchmark("Bank", ds)
    with pytest.raises(InputError):
        validate_benchmark("Nope", ds)


def test_benchmark_lookup(tmp_path, monkeypatch):
    monkeypatch.delenv("ISBOR_BENCHMARK_DIR", raising=False)
    assert find_benchmark("swd") is None
    with pytest.raises(InputError, match="ISBOR_BENCHMARK_DIR"):
        load_benchmark("swd")
    rs = np.random.default_rng(0)
    write_csv(tmp_path / "SWD.csv", Dataset(rs.normal(size=(1000, 10)), np.tile([1, 2, 3, 4], 250), 4))
    monkeypatch.setenv("ISBOR_BENCHMARK_DIR", str(tmp_path))
    assert find_benchmark("swd") == tmp_path / "SWD.csv"
    assert load_benchmark("SWD").n == 1000
    (tmp_path / "bank.txt").write_text("0.1 0.2 1\n")
    with pytest.raises(InputError, match="expected d=8"):
        load_benchmark("bank")
