"""Down-sampling, statistical outlier removal and normal estimation."""

import warnings

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import breadth_first_order, connected_components, minimum_spanning_tree
from sklearn.base import BaseEstimator, TransformerMixin

from .._validation import check_count, check_points, check_positive
from ..errors import DegenerateNeighborhood, InvalidParameter
from .core import PointCloud, SpatialIndex, as_cloud


def voxel_downsample(cloud, voxel_size, anchor=None):
    """Replace the points of every occupied voxel by their centroid.

    The grid is anchored at ``anchor`` or, by default, at the minimum
    corner of the cloud's bounding box. Output is ordered by voxel key.
    Normals and colors are averaged; averaged normals are renormalised.
    """
    size = check_positive(voxel_size, "voxel_size")
    if len(cloud) == 0:
        return cloud
    pts = cloud.points
    origin = pts.min(axis=0) if anchor is None else check_points([anchor], "anchor")[0]
    keys = np.floor((pts - origin) / size).astype(np.int64)
    _, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.ravel()
    m = len(counts)

    def mean_of(values):
        out = np.empty((m, values.shape[1]))
        for c in range(values.shape[1]):
            out[:, c] = np.bincount(inverse, weights=values[:, c], minlength=m)
        return out / counts[:, None]

    normals = colors = None
    if cloud.has_normals:
        nrm = mean_of(cloud.normals)
        norms = np.linalg.norm(nrm, axis=1, keepdims=True)
        normals = np.divide(nrm, norms, out=np.zeros_like(nrm), where=norms > 1e-12)
    if cloud.has_colors:
        colors = np.clip(mean_of(cloud.colors), 0.0, 1.0)
    return PointCloud(mean_of(pts), normals, colors)


def remove_statistical_outliers(cloud, k_neighbors=20, std_ratio=2.0):
    """Drop points whose mean k-NN distance is unusually large.

    A point is removed iff its mean distance to its ``k_neighbors``
    nearest neighbours exceeds ``mean + std_ratio * std`` of that
    statistic over the whole cloud (population std).

    Returns:
        (kept cloud, indices of removed points in input order)
    """
    k = check_count(k_neighbors, "k_neighbors")
    ratio = check_positive(std_ratio, "std_ratio")
    if len(cloud) <= k:
        raise InvalidParameter(f"k_neighbors={k} requires more than {k} points, cloud has {len(cloud)}")
    dist, _ = SpatialIndex(cloud).query_self(k)
    mean_d = dist.mean(axis=1)
    limit = mean_d.mean() + ratio * mean_d.std()
    removed = np.flatnonzero(mean_d > limit)
    keep = np.ones(len(cloud), dtype=bool)
    keep[removed] = False
    return cloud.select(keep), removed


def neighborhood_eigen(points, neighbors):
    """Eigen-decomposition of each point's neighbourhood covariance.

    ``neighbors`` is an (n, k) index array. Returns ascending eigenvalues
    (n, 3) and matching eigenvectors (n, 3, 3) as columns.
    """
    nb = points[neighbors]
    centered = nb - nb.mean(axis=1, keepdims=True)
    cov = np.einsum("nki,nkj->nij", centered, centered) / neighbors.shape[1]
    return np.linalg.eigh(cov)


def _degenerate(evals):
    # rank <= 1: coincident or collinear neighbourhood
    return evals[:, 1] <= 1e-10 * np.maximum(evals[:, 2], 1e-300)


def estimate_normals(cloud, k_neighbors=20, orientation_hint=None, return_flags=False):
    """PCA normals from each point's k-NN (including itself).

    Orientation: towards ``orientation_hint`` when given, otherwise made
    consistent by propagation over a minimum spanning tree of the k-NN
    graph (edge weight ``1 - |n_i . n_j|``), one tree per connected part,
    each rooted at its point farthest from the part's centroid and
    oriented away from that centroid.

    Points with a rank-deficient neighbourhood get a zero normal and a
    :class:`DegenerateNeighborhood` warning.
    """
    k = check_count(k_neighbors, "k_neighbors", minimum=3)
    n = len(cloud)
    if n < k:
        raise InvalidParameter(f"k_neighbors={k} exceeds the cloud size {n}")
    pts = cloud.points
    _, nbrs = SpatialIndex(pts).query(pts, k)
    evals, evecs = neighborhood_eigen(pts, nbrs)
    normals = np.ascontiguousarray(evecs[:, :, 0])
    flags = _degenerate(evals)
    normals[flags] = 0.0
    if np.any(flags):
        warnings.warn(
            f"{int(flags.sum())} point(s) have a degenerate neighbourhood; their normals are zero",
            DegenerateNeighborhood,
            stacklevel=2,
        )

    if orientation_hint is not None:
        hint = check_points([orientation_hint], "orientation_hint")[0]
        flip = np.einsum("ij,ij->i", normals, hint - pts) < 0
        normals[flip] *= -1
    else:
        normals = _orient_mst(pts, normals, nbrs, ~flags)
    out = cloud.with_normals(normals)
    return (out, flags) if return_flags else out


def _orient_mst(pts, normals, nbrs, valid):
    n = len(pts)
    rows = np.repeat(np.arange(n), nbrs.shape[1])
    cols = nbrs.ravel()
    keep = (rows != cols) & valid[rows] & valid[cols]
    rows, cols = rows[keep], cols[keep]
    w = 1.0 - np.abs(np.einsum("ij,ij->i", normals[rows], normals[cols])) + 1e-9
    graph = coo_matrix((w, (rows, cols)), shape=(n, n)).tocsr()
    graph = graph.maximum(graph.T)
    mst = minimum_spanning_tree(graph)
    n_comp, labels = connected_components(mst, directed=False)
    out = normals.copy()
    for comp in range(n_comp):
        members = np.flatnonzero(labels == comp)
        if not valid[members[0]]:
            continue
        centroid = pts[members].mean(axis=0)
        offsets = pts[members] - centroid
        root = members[np.argmax(np.einsum("ij,ij->i", offsets, offsets))]
        d = float(np.dot(out[root], pts[root] - centroid))
        if abs(d) <= 1e-3 * np.linalg.norm(pts[root] - centroid):
            # flat part: no inside/outside, use the sign of the dominant component
            d = out[root][np.argmax(np.abs(out[root]))]
        if d < 0:
            out[root] *= -1
        if len(members) == 1:
            continue
        order, pred = breadth_first_order(mst, root, directed=False, return_predecessors=True)
        # child sign follows its parent's final orientation
        for node in order[1:].tolist():
            p = pred[node]
            if out[p] @ out[node] < 0:
                out[node] = -out[node]
    return out


class VoxelDownsampler(TransformerMixin, BaseEstimator):
    """Estimator wrapper around :func:`voxel_downsample`."""

    def __init__(self, voxel_size=0.002, anchor=None):
        self.voxel_size = voxel_size
        self.anchor = anchor

    def fit(self, X, y=None):
        check_positive(self.voxel_size, "voxel_size")
        return self

    def transform(self, X):
        return voxel_downsample(as_cloud(X), self.voxel_size, self.anchor)


class StatisticalOutlierRemover(TransformerMixin, BaseEstimator):
    """Estimator wrapper around :func:`remove_statistical_outliers`.

    ``removed_indices_`` is set by the last ``transform`` call.
    """

    def __init__(self, k_neighbors=20, std_ratio=2.0):
        self.k_neighbors = k_neighbors
        self.std_ratio = std_ratio

    def fit(self, X, y=None):
        return self

    def transform(self, X):
        kept, self.removed_indices_ = remove_statistical_outliers(as_cloud(X), self.k_neighbors, self.std_ratio)
        return kept


class NormalEstimator(TransformerMixin, BaseEstimator):
    def __init__(self, k_neighbors=20, orientation_hint=None):
        self.k_neighbors = k_neighbors
        self.orientation_hint = orientation_hint

    def fit(self, X, y=None):
        return self

    def transform(self, X):
        cloud, self.degenerate_ = estimate_normals(
            as_cloud(X), self.k_neighbors, self.orientation_hint, return_flags=True
        )
        return cloud
