import hashlib
import struct

import numpy as np
import pytest

import shardann as sa
from shardann.data import DataFormatError, file_size_for


def _naive_l2(a, b):
    total = 0.0
    for x, y in zip(a, b):
        total += (float(x) - float(y)) ** 2
    return total ** 0.5


def test_l2_345_triangle():
    assert sa.l2_distance(np.array([0.0, 0.0]), np.array([3.0, 4.0])) == 5.0


def test_l2_identity():
    v = np.array([1.5, -2.25, 7.0], dtype=np.float32)
    assert sa.l2_distance(v, v) == 0.0


def test_l2_matches_scalar_reference():
    rng = np.random.default_rng(42)
    for _ in range(100):
        a = rng.standard_normal(16).astype(np.float32)
        b = rng.standard_normal(16).astype(np.float32)
        got = sa.l2_distance(a, b)
        want = _naive_l2(a, b)
        assert got == pytest.approx(want, rel=1e-5)


def test_l2_symmetry_exact():
    rng = np.random.default_rng(1)
    for _ in range(50):
        a = rng.standard_normal(33).astype(np.float32)
        b = rng.standard_normal(33).astype(np.float32)
        assert sa.l2_distance(a, b) == sa.l2_distance(b, a)


def test_l2_triangle_inequality():
    rng = np.random.default_rng(2)
    for _ in range(200):
        a, b, c = rng.standard_normal((3, 8)).astype(np.float32)
        assert sa.l2_distance(a, c) <= sa.l2_distance(a, b) + sa.l2_distance(b, c) + 1e-5


def test_l2_dimension_mismatch():
    with pytest.raises(ValueError):
        sa.l2_distance(np.zeros(3), np.zeros(4))


def test_squared_l2_batch_matches_single_path():
    # The kernel's batch path and the scalar API must be bit-identical.
    rng = np.random.default_rng(3)
    points = rng.standard_normal((64, 32)).astype(np.float32)
    q = rng.standard_normal(32).astype(np.float32)
    batch = sa.squared_l2(points, q)
    for i in range(64):
        assert float(np.sqrt(batch[i])) == sa.l2_distance(points[i], q)


# --- fvecs / ivecs ---

def test_fvecs_single_record(tmp_path):
    path = tmp_path / "one.fvecs"
    path.write_bytes(struct.pack("<i2f", 2, 1.5, -2.0))
    ds = sa.load_fvecs(path)
    assert (ds.n, ds.d) == (1, 2)
    assert ds.data.tolist() == [[1.5, -2.0]]


def test_fvecs_round_trip_byte_identical(tmp_path):
    ds = sa.gen_synthetic(100, 7, 4, 0.2, seed=3)
    p1, p2 = tmp_path / "a.fvecs", tmp_path / "b.fvecs"
    sa.save_fvecs(ds, p1)
    sa.save_fvecs(sa.load_fvecs(p1), p2)
    h1 = hashlib.sha256(p1.read_bytes()).hexdigest()
    h2 = hashlib.sha256(p2.read_bytes()).hexdigest()
    assert h1 == h2
    assert np.array_equal(sa.load_fvecs(p2).data, ds.data)


def test_fvecs_file_size_arithmetic(tmp_path):
    path = tmp_path / "s.fvecs"
    sa.save_fvecs(np.zeros((3, 4), dtype=np.float32), path)
    assert path.stat().st_size == 60 == file_size_for(3, 4)


def test_fvecs_inconsistent_dimension_names_offset(tmp_path):
    path = tmp_path / "bad.fvecs"
    good = struct.pack("<i2f", 2, 1.0, 2.0)
    bad = struct.pack("<i3f", 3, 1.0, 2.0, 3.0)
    path.write_bytes(good + bad)
    with pytest.raises(DataFormatError, match="offset 12"):
        sa.load_fvecs(path)


def test_fvecs_truncated_record(tmp_path):
    path = tmp_path / "trunc.fvecs"
    path.write_bytes(struct.pack("<i2f", 2, 1.0, 2.0) + struct.pack("<if", 2, 1.0))
    with pytest.raises(DataFormatError, match="truncated"):
        sa.load_fvecs(path)


def test_fvecs_nonpositive_dimension(tmp_path):
    path = tmp_path / "zed.fvecs"
    path.write_bytes(struct.pack("<i", 0))
    with pytest.raises(DataFormatError, match="dimension"):
        sa.load_fvecs(path)


def test_save_empty_rejected(tmp_path):
    with pytest.raises(DataFormatError, match="n >= 1"):
        sa.save_fvecs(np.zeros((0, 4), dtype=np.float32), tmp_path / "e.fvecs")


def test_ivecs_single_record(tmp_path):
    path = tmp_path / "one.ivecs"
    path.write_bytes(struct.pack("<4i", 3, 0, 5, 9))
    assert sa.load_ivecs(path).tolist() == [[0, 5, 9]]


def test_ivecs_round_trip(tmp_path):
    rng = np.random.default_rng(8)
    mat = rng.integers(0, 1000, (20, 5)).astype(np.int32)
    p1, p2 = tmp_path / "a.ivecs", tmp_path / "b.ivecs"
    sa.save_ivecs(mat, p1)
    sa.save_ivecs(sa.load_ivecs(p1), p2)
    assert p1.read_bytes() == p2.read_bytes()
    assert np.array_equal(sa.load_ivecs(p2), mat)


def test_ivecs_truncated(tmp_path):
    path = tmp_path / "t.ivecs"
    path.write_bytes(struct.pack("<3i", 3, 1, 2))
    with pytest.raises(DataFormatError, match="truncated"):
        sa.load_ivecs(path)


def test_nan_rejected_at_load(tmp_path):
    path = tmp_path / "nan.fvecs"
    path.write_bytes(struct.pack("<i2f", 2, float("nan"), 1.0))
    with pytest.raises(DataFormatError, match="NaN"):
        sa.load_fvecs(path)


# --- synthetic generator ---

def test_gen_deterministic():
    a = sa.gen_synthetic(500, 8, 16, 0.1, seed=12)
    b = sa.gen_synthetic(500, 8, 16, 0.1, seed=12)
    assert np.array_equal(a.data, b.data)
    c = sa.gen_synthetic(500, 8, 16, 0.1, seed=13)
    assert not np.array_equal(a.data, c.data)


def test_gen_single_tight_cluster():
    ds = sa.gen_synthetic(200, 4, 1, 1e-6, seed=0)
    center = ds.data.mean(axis=0)
    assert np.max(np.linalg.norm(ds.data - center, axis=1)) < 1e-4


def test_gen_intra_cluster_tighter_than_inter():
    ds = sa.gen_synthetic(10_000, 16, 64, 0.05, seed=21)
    labels = np.arange(ds.n) % 64
    rng = np.random.default_rng(0)
    intra, inter = [], []
    for _ in range(4000):
        i, j = rng.integers(0, ds.n, 2)
        if i == j:
            continue
        dist = sa.l2_distance(ds.data[i], ds.data[j])
        (intra if labels[i] == labels[j] else inter).append(dist)
    assert np.mean(intra) < np.mean(inter)


def test_gen_validation():
    with pytest.raises(ValueError):
        sa.gen_synthetic(5, 4, 10, 0.1, seed=0)  # n < n_clusters
    with pytest.raises(ValueError):
        sa.gen_synthetic(10, 4, 2, 0.0, seed=0)  # spread must be > 0
