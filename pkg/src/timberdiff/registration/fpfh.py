"""Fast Point Feature Histograms (33 bins: 3 angle features x 11 bins)."""

from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix

from .._validation import check_positive
from ..cloud import SpatialIndex
from ..errors import MissingNormals

N_BINS = 11


@dataclass(frozen=True, eq=False)
class FeatureSet:
    """Per-point histograms, parallel to a cloud; ``isolated`` marks points without neighbours."""

    histograms: np.ndarray
    isolated: np.ndarray

    def __len__(self):
        return len(self.histograms)


def pair_features(p1, n1, p2, n2):
    """Darboux-frame angle triple for point pairs, vectorised over rows.

    Returns (theta, alpha, phi): theta in [-pi, pi], alpha and phi in [-1, 1].
    The frame is anchored at whichever endpoint's normal is closer to the
    connecting line, which makes the triple symmetric in the pair.
    """
    d = p2 - p1
    length = np.linalg.norm(d, axis=1)
    safe = np.where(length > 0, length, 1.0)
    ang1 = np.einsum("ij,ij->i", n1, d) / safe
    ang2 = np.einsum("ij,ij->i", n2, d) / safe
    swap = np.abs(ang1) < np.abs(ang2)
    u = np.where(swap[:, None], n2, n1)
    other = np.where(swap[:, None], n1, n2)
    d = np.where(swap[:, None], -d, d)
    phi = np.where(swap, -ang2, ang1)
    v = np.cross(d, u)
    vn = np.linalg.norm(v, axis=1)
    ok = (vn > 0) & (length > 0)
    v = np.divide(v, vn[:, None], out=np.zeros_like(v), where=ok[:, None])
    w = np.cross(u, v)
    alpha = np.einsum("ij,ij->i", v, other)
    theta = np.arctan2(np.einsum("ij,ij->i", w, other), np.einsum("ij,ij->i", u, other))
    theta[~ok] = 0.0
    alpha[~ok] = 0.0
    phi = np.where(ok, phi, 0.0)
    return theta, alpha, phi


def _bin(values, lo, hi):
    b = np.floor(N_BINS * (values - lo) / (hi - lo)).astype(np.intp)
    return np.clip(b, 0, N_BINS - 1)


def compute_fpfh(cloud, radius):
    """FPFH descriptors of every point of ``cloud`` over a ``radius`` ball.

    SPFH(p) bins the angle triple of p with each neighbour (each 11-bin
    block sums to 100). FPFH(p) = SPFH(p) + the neighbours' SPFH weighted
    by 1 / |p - q|, the weighted sum rescaled so each block sums to 100.
    """
    if not cloud.has_normals:
        raise MissingNormals("FPFH needs normals; run estimate_normals first")
    r = check_positive(radius, "radius")
    n = len(cloud)
    if n == 0:
        return FeatureSet(np.zeros((0, 3 * N_BINS)), np.zeros(0, dtype=bool))
    pts, nrm = cloud.points, cloud.normals
    neigh = SpatialIndex(pts).query_radius(pts, r)
    counts = np.array([len(x) for x in neigh])
    rows = np.repeat(np.arange(n), counts)
    cols = np.concatenate(neigh) if n else np.zeros(0, dtype=np.intp)
    dist = np.linalg.norm(pts[cols] - pts[rows], axis=1)
    keep = (rows != cols) & (dist > 0)
    rows, cols, dist = rows[keep], cols[keep], dist[keep]

    theta, alpha, phi = pair_features(pts[rows], nrm[rows], pts[cols], nrm[cols])
    n_pairs = np.bincount(rows, minlength=n).astype(np.float64)
    incr = np.divide(100.0, n_pairs, out=np.zeros(n), where=n_pairs > 0)[rows]
    spfh = np.zeros((n, 3 * N_BINS))
    for block, (vals, lo, hi) in enumerate(((theta, -np.pi, np.pi), (alpha, -1.0, 1.0), (phi, -1.0, 1.0))):
        flat = rows * (3 * N_BINS) + block * N_BINS + _bin(vals, lo, hi)
        spfh += np.bincount(flat, weights=incr, minlength=n * 3 * N_BINS).reshape(n, 3 * N_BINS)

    W = csr_matrix((1.0 / dist, (rows, cols)), shape=(n, n))
    agg = np.asarray(W @ spfh)
    for block in range(3):
        sl = slice(block * N_BINS, (block + 1) * N_BINS)
        s = agg[:, sl].sum(axis=1, keepdims=True)
        agg[:, sl] = np.divide(100.0 * agg[:, sl], s, out=np.zeros_like(agg[:, sl]), where=s > 0)
    return FeatureSet(spfh + agg, n_pairs == 0)
