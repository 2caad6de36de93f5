"""Point cloud container and exact nearest-neighbour index."""

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .._validation import check_count, check_points, check_positive, n_workers
from ..errors import InvalidParameter, LengthMismatch

_UNIT_TOL = 1e-6


def _frozen(arr):
    arr = np.array(arr, dtype=np.float64, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class PointCloud:
    """Ordered 3D points in meters with optional per-point normals and colors.

    Arrays are copied and made read-only on construction. A normal may be
    the zero vector, which marks a point whose normal could not be
    estimated; every other normal is unit length.
    """

    points: np.ndarray
    normals: np.ndarray | None = None
    colors: np.ndarray | None = None

    def __post_init__(self):
        pts = check_points(self.points)
        object.__setattr__(self, "points", _frozen(pts))
        n = len(pts)
        if self.normals is not None:
            nrm = np.asarray(self.normals, dtype=np.float64).reshape(-1, 3) if n else np.zeros((0, 3))
            if len(nrm) != n:
                raise LengthMismatch(f"{len(nrm)} normals for {n} points")
            norms = np.linalg.norm(nrm, axis=1)
            bad = (np.abs(norms - 1.0) > _UNIT_TOL) & (norms != 0.0)
            if np.any(bad):
                raise InvalidParameter("normals must be unit length (or zero for undefined)")
            object.__setattr__(self, "normals", _frozen(nrm))
        if self.colors is not None:
            col = np.asarray(self.colors, dtype=np.float64).reshape(-1, 3) if n else np.zeros((0, 3))
            if len(col) != n:
                raise LengthMismatch(f"{len(col)} colors for {n} points")
            if np.any(col < 0.0) or np.any(col > 1.0) or not np.all(np.isfinite(col)):
                raise InvalidParameter("color channels must lie in [0, 1]")
            object.__setattr__(self, "colors", _frozen(col))

    def __len__(self):
        return len(self.points)

    @property
    def has_normals(self):
        return self.normals is not None

    @property
    def has_colors(self):
        return self.colors is not None

    @classmethod
    def empty(cls):
        return cls(np.zeros((0, 3)))

    @classmethod
    def concatenate(cls, clouds):
        clouds = list(clouds)
        if not clouds:
            return cls.empty()
        pts = np.concatenate([c.points for c in clouds])
        normals = colors = None
        if all(c.has_normals for c in clouds):
            normals = np.concatenate([c.normals for c in clouds])
        if all(c.has_colors for c in clouds):
            colors = np.concatenate([c.colors for c in clouds])
        return cls(pts, normals, colors)

    def select(self, indices):
        """Subset in the order given by ``indices`` (int array or bool mask)."""
        idx = np.asarray(indices)
        if idx.dtype == bool:
            idx = np.flatnonzero(idx)
        idx = idx.astype(np.intp, copy=False)
        return PointCloud(
            self.points[idx],
            None if self.normals is None else self.normals[idx],
            None if self.colors is None else self.colors[idx],
        )

    def with_normals(self, normals):
        return PointCloud(self.points, normals, self.colors)

    def with_colors(self, colors):
        return PointCloud(self.points, self.normals, colors)

    def transformed(self, rotation, translation):
        """Apply ``p -> R p + t``; normals are rotated."""
        R = np.asarray(rotation, dtype=np.float64)
        t = np.asarray(translation, dtype=np.float64)
        pts = self.points @ R.T + t
        normals = None if self.normals is None else self.normals @ R.T
        if normals is not None:
            # keep zero normals zero and unit normals unit after rounding
            norms = np.linalg.norm(normals, axis=1, keepdims=True)
            normals = np.divide(normals, norms, out=np.zeros_like(normals), where=norms > 0)
        return PointCloud(pts, normals, self.colors)


class SpatialIndex:
    """Exact k-nearest-neighbour and radius queries over a fixed point set.

    Backed by :class:`scipy.spatial.cKDTree`. Distances are recomputed as
    ``sqrt(sum((q - p) ** 2))`` and ties are broken by the lower point
    index, so results equal a brute-force linear scan.
    """

    def __init__(self, points):
        if isinstance(points, PointCloud):
            points = points.points
        self.points = check_points(points)
        self._tree = cKDTree(self.points) if len(self.points) else None

    def __len__(self):
        return len(self.points)

    def _exact(self, queries, idx):
        diff = queries[:, None, :] - self.points[idx]
        return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))

    def query(self, queries, k=1):
        """k nearest neighbours of each query; returns (distances, indices), each (m, k)."""
        queries = check_points(queries, "queries")
        k = check_count(k, "k")
        n = len(self.points)
        if k > n:
            raise InvalidParameter(f"k={k} exceeds the {n} indexed points")
        m = len(queries)
        if m == 0:
            return np.zeros((0, k)), np.zeros((0, k), dtype=np.intp)
        kq = min(k + 1, n)
        _, idx = self._tree.query(queries, k=kq, workers=n_workers())
        idx = np.asarray(idx, dtype=np.intp).reshape(m, kq)
        dist = self._exact(queries, idx)
        order = np.lexsort((idx, dist), axis=-1)
        idx = np.take_along_axis(idx, order, axis=1)
        dist = np.take_along_axis(dist, order, axis=1)
        if kq > k:
            # a tie straddling the k-th slot may hide a lower-index point
            suspect = np.flatnonzero(dist[:, k] <= dist[:, k - 1] * (1 + 1e-12) + 1e-300)
            for i in suspect:
                cand = np.asarray(
                    self._tree.query_ball_point(queries[i], dist[i, k] * (1 + 1e-9) + 1e-12),
                    dtype=np.intp,
                )
                d = self._exact(queries[i : i + 1], cand[None, :])[0]
                o = np.lexsort((cand, d))[:k]
                idx[i, :k] = cand[o]
                dist[i, :k] = d[o]
        return dist[:, :k], idx[:, :k]

    def query_self(self, k):
        """k nearest neighbours of every indexed point, excluding the point itself."""
        n = len(self.points)
        k = check_count(k, "k")
        if k >= n:
            raise InvalidParameter(f"k={k} needs at least {k + 1} points, have {n}")
        dist, idx = self.query(self.points, k + 1)
        is_self = idx == np.arange(n)[:, None]
        dist = np.where(is_self, np.inf, dist)
        order = np.lexsort((idx, dist), axis=-1)
        idx = np.take_along_axis(idx, order, axis=1)[:, :k]
        dist = np.take_along_axis(dist, order, axis=1)[:, :k]
        return dist, idx

    def nearest(self, queries, max_distance=None):
        """Nearest neighbour of each query; (distances, indices) of shape (m,).

        With ``max_distance``, queries without a neighbour within it get
        distance ``inf`` and index ``-1``.
        """
        queries = check_points(queries, "queries")
        m = len(queries)
        if m == 0:
            return np.zeros(0), np.zeros(0, dtype=np.intp)
        if max_distance is None:
            d, i = self.query(queries, 1)
            return d[:, 0], i[:, 0]
        bound = check_positive(max_distance, "max_distance")
        _, idx = self._tree.query(
            queries, k=1, distance_upper_bound=bound * (1 + 1e-9), workers=n_workers()
        )
        idx = np.asarray(idx, dtype=np.intp)
        found = idx < len(self.points)
        dist = np.full(m, np.inf)
        if np.any(found):
            diff = queries[found] - self.points[idx[found]]
            dist[found] = np.sqrt(np.einsum("ij,ij->i", diff, diff))
        found &= dist <= bound
        dist[~found] = np.inf
        idx[~found] = -1
        return dist, idx

    def query_radius(self, queries, radius):
        """Indices within ``radius`` (inclusive) of each query, sorted by (distance, index)."""
        queries = check_points(queries, "queries")
        r = check_positive(radius, "radius", strict=False)
        if len(self.points) == 0:
            return [np.zeros(0, dtype=np.intp) for _ in range(len(queries))]
        lists = self._tree.query_ball_point(queries, r * (1 + 1e-9) + 1e-15, workers=n_workers())
        out = []
        for q, cand in zip(queries, lists):
            cand = np.asarray(cand, dtype=np.intp)
            diff = q - self.points[cand]
            d = np.sqrt(np.einsum("ij,ij->i", diff, diff))
            keep = d <= r
            cand, d = cand[keep], d[keep]
            out.append(cand[np.lexsort((cand, d))])
        return out


def as_cloud(X):
    """Accept a :class:`PointCloud` or an (n, 3) array."""
    if isinstance(X, PointCloud):
        return X
    return PointCloud(check_points(X, "X"))
