import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import brute_knn
from timberdiff.cloud import PointCloud, SpatialIndex, as_cloud
from timberdiff.errors import InvalidParameter, LengthMismatch


def test_empty_cloud_is_valid():
    c = PointCloud.empty()
    assert len(c) == 0 and not c.has_normals


def test_arrays_are_read_only():
    c = PointCloud(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        c.points[0, 0] = 1.0


def test_normals_must_be_unit_or_zero():
    PointCloud(np.zeros((2, 3)), [[0, 0, 1], [0, 0, 0]])
    with pytest.raises(InvalidParameter):
        PointCloud(np.zeros((1, 3)), [[0, 0, 2]])
    with pytest.raises(LengthMismatch):
        PointCloud(np.zeros((2, 3)), [[0, 0, 1]])


def test_colors_range_checked():
    with pytest.raises(InvalidParameter):
        PointCloud(np.zeros((1, 3)), colors=[[1.5, 0, 0]])


def test_select_and_concatenate(rng):
    pts = rng.random((10, 3))
    c = PointCloud(pts)
    both = PointCloud.concatenate([c.select([0, 1]), c.select(np.arange(10) >= 8)])
    np.testing.assert_array_equal(both.points, pts[[0, 1, 8, 9]])


def test_transformed_keeps_normals_unit(rng):
    from timberdiff.synthetic import random_rotation

    n = rng.normal(size=(20, 3))
    n /= np.linalg.norm(n, axis=1, keepdims=True)
    c = PointCloud(rng.random((20, 3)), n)
    R = random_rotation(rng)
    moved = c.transformed(R, [1, 2, 3])
    np.testing.assert_allclose(moved.points, c.points @ R.T + [1, 2, 3])
    np.testing.assert_allclose(np.linalg.norm(moved.normals, axis=1), 1.0, atol=1e-12)


def test_as_cloud_accepts_arrays():
    assert len(as_cloud(np.zeros((4, 3)))) == 4


@given(
    n=st.integers(1, 200),
    m=st.integers(1, 30),
    k=st.integers(1, 8),
    seed=st.integers(0, 2**31),
    grid=st.booleans(),
)
def test_knn_matches_brute_force(n, m, k, seed, grid):
    r = np.random.default_rng(seed)
    # integer grids create many exact distance ties
    pts = r.integers(0, 4, (n, 3)).astype(float) if grid else r.random((n, 3))
    q = r.integers(0, 4, (m, 3)).astype(float) if grid else r.random((m, 3))
    k = min(k, n)
    d, i = SpatialIndex(pts).query(q, k)
    bd, bi = brute_knn(pts, q, k)
    np.testing.assert_array_equal(i, bi)
    np.testing.assert_array_equal(d, bd)


def test_knn_spec_sweep():
    # 1000 random clouds of at most 500 points, exact index match
    r = np.random.default_rng(0)
    for _ in range(1000):
        n = int(r.integers(2, 501))
        pts = np.round(r.random((n, 3)), 2)
        q = pts[r.integers(0, n, 5)] + np.round(r.normal(scale=0.02, size=(5, 3)), 2)
        k = int(r.integers(1, min(10, n) + 1))
        d, i = SpatialIndex(pts).query(q, k)
        bd, bi = brute_knn(pts, q, k)
        assert np.array_equal(i, bi)


def test_query_self_excludes_self(rng):
    pts = rng.random((50, 3))
    d, i = SpatialIndex(pts).query_self(3)
    assert not np.any(i == np.arange(50)[:, None])
    bd, bi = brute_knn(pts, pts, 4)
    np.testing.assert_array_equal(i, bi[:, 1:])


def test_nearest_with_cap():
    idx = SpatialIndex(np.array([[0.0, 0, 0], [1, 0, 0]]))
    d, i = idx.nearest(np.array([[0.1, 0, 0], [5, 0, 0]]), max_distance=0.5)
    assert i.tolist() == [0, -1] and d[1] == np.inf
    assert d[0] == pytest.approx(0.1)


@given(seed=st.integers(0, 2**31), r=st.floats(0.05, 0.6))
def test_radius_matches_brute_force(seed, r):
    g = np.random.default_rng(seed)
    pts = g.random((120, 3))
    q = g.random((10, 3))
    got = SpatialIndex(pts).query_radius(q, r)
    for qi, res in zip(q, got):
        d = np.linalg.norm(pts - qi, axis=1)
        expect = np.flatnonzero(d <= r)
        expect = expect[np.lexsort((expect, d[expect]))]
        np.testing.assert_array_equal(res, expect)


def test_k_larger_than_cloud_rejected():
    with pytest.raises(InvalidParameter):
        SpatialIndex(np.zeros((2, 3))).query(np.zeros((1, 3)), 3)
