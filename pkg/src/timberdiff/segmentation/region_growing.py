"""Normal-based region growing."""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin

from .._validation import check_count, check_positive
from ..cloud import SpatialIndex, as_cloud
from ..cloud.preprocessing import neighborhood_eigen
from ..errors import InvalidParameter, IoError, MissingNormals


@dataclass(frozen=True, eq=False)
class Segment:
    """A normal-coherent subset of a cloud; ``point_indices`` are sorted ascending."""

    point_indices: np.ndarray
    mean_normal: np.ndarray
    centroid: np.ndarray

    def __len__(self):
        return len(self.point_indices)

    @classmethod
    def from_members(cls, cloud, indices, reference_normal):
        idx = np.unique(np.asarray(indices, dtype=np.intp))
        nrm = cloud.normals[idx]
        signs = np.where(nrm @ reference_normal < 0, -1.0, 1.0)
        mean = (nrm * signs[:, None]).sum(axis=0)
        norm = np.linalg.norm(mean)
        mean = mean / norm if norm > 0 else np.asarray(reference_normal, dtype=np.float64)
        return cls(idx, mean, cloud.points[idx].mean(axis=0))


def residue_indices(segments, n_points):
    """Indices of the cloud not covered by any segment."""
    covered = np.zeros(n_points, dtype=bool)
    for s in segments:
        covered[s.point_indices] = True
    return np.flatnonzero(~covered)


def segment_labels(segments, n_points):
    """Per-point segment index, -1 for residue."""
    labels = np.full(n_points, -1, dtype=np.intp)
    for i, s in enumerate(segments):
        labels[s.point_indices] = i
    return labels


def segment_by_normals(
    cloud,
    angle_threshold=15.0,
    k_neighbors=20,
    min_segment_size=50,
    curvature_threshold=0.05,
    refine_boundary=True,
    boundary_distance=None,
    seed_order="curvature",
):
    """Split ``cloud`` into regions of similar normal orientation.

    Seeds are taken flattest first (ascending surface variation, ties by
    index) or, with ``seed_order="input"``, in input order. A neighbour joins the growing region
    when the (sign-insensitive) angle between its normal and the seed's
    normal is below ``angle_threshold`` degrees. Points whose surface
    variation exceeds ``curvature_threshold`` may join a region but never
    seed or extend one, so strips along sharp edges do not become regions.
    Regions smaller than ``min_segment_size`` go to the residue; points
    with a zero normal are never segmented.

    With ``refine_boundary``, every point with a neighbour in another
    segment (residue included) then moves to the segment, among its own
    and its neighbours', whose fitted plane is nearest, provided that
    plane is within ``boundary_distance`` (default: median
    nearest-neighbour spacing). This fixes points near edges whose PCA
    normal is dominated by the adjacent face.

    Returns segments sorted by size (descending), ties by smallest index.
    """
    if not cloud.has_normals:
        raise MissingNormals("segmentation needs normals; run estimate_normals first")
    angle = check_positive(angle_threshold, "angle_threshold")
    k = check_count(k_neighbors, "k_neighbors")
    min_size = check_count(min_segment_size, "min_segment_size")
    n = len(cloud)
    if n == 0:
        return []
    k = min(k, n - 1)
    if k == 0:
        return []
    pts, normals = cloud.points, cloud.normals
    dist, nbrs = SpatialIndex(pts).query_self(k)
    if seed_order not in ("curvature", "input"):
        raise InvalidParameter(f"seed_order must be 'curvature' or 'input', got {seed_order!r}")
    valid = np.linalg.norm(normals, axis=1) > 0
    evals, _ = neighborhood_eigen(pts, np.column_stack([np.arange(n), nbrs]))
    total = evals.sum(axis=1)
    curvature = np.divide(evals[:, 0], total, out=np.zeros(n), where=total > 0)
    seedable = valid.copy() if curvature_threshold is None else valid & (curvature <= curvature_threshold)
    order = np.flatnonzero(seedable)
    if seed_order == "curvature":
        order = order[np.argsort(curvature[order], kind="stable")]

    cos_thr = np.cos(np.radians(angle))
    labels = np.full(n, -1, dtype=np.intp)
    free = valid.copy()
    regions = []
    for s in order.tolist():
        if not free[s]:
            continue
        ns = normals[s]
        free[s] = False
        members = [np.array([s])]
        frontier = np.array([s])
        while len(frontier):
            cand = np.unique(nbrs[frontier])
            cand = cand[free[cand]]
            cand = cand[np.abs(normals[cand] @ ns) >= cos_thr]
            free[cand] = False
            members.append(cand)
            frontier = cand[seedable[cand]]
        members = np.concatenate(members)
        if len(members) >= min_size:
            labels[members] = len(regions)
            regions.append(ns)

    if refine_boundary and regions:
        spacing = float(np.median(dist[:, 0])) if boundary_distance is None else check_positive(boundary_distance, "boundary_distance")
        labels = _absorb_boundary(pts, labels, nbrs, valid, np.array(regions), spacing)

    segments = []
    for r, ref in enumerate(regions):
        idx = np.flatnonzero(labels == r)
        # a region robbed below the size floor by boundary refinement goes to residue
        if len(idx) >= min_size:
            segments.append(Segment.from_members(cloud, idx, ref))
    segments.sort(key=lambda sg: (-len(sg), int(sg.point_indices[0])))
    return segments


def _absorb_boundary(pts, labels, nbrs, valid, seed_normals, max_distance, passes=3):
    # boundary point: segmented or residue point with a neighbour in another segment
    n_regions = len(seed_normals)
    planes_n = np.array(seed_normals, dtype=np.float64)
    planes_c = np.empty((n_regions, 3))
    for r in range(n_regions):
        member_pts = pts[labels == r]
        c = member_pts.mean(axis=0)
        if len(member_pts) >= 3:
            planes_n[r] = np.linalg.svd(member_pts - c)[2][2]
        planes_c[r] = c
    labels = labels.copy()
    for _ in range(passes):
        nl = labels[nbrs]
        boundary = valid & np.any((nl >= 0) & (nl != labels[:, None]), axis=1)
        pts_b = np.flatnonzero(boundary)
        if len(pts_b) == 0:
            break
        cand = np.column_stack([labels[pts_b], nl[pts_b]])
        has = cand >= 0
        safe = np.where(has, cand, 0)
        d = np.abs(np.einsum("rkj,rkj->rk", pts[pts_b][:, None, :] - planes_c[safe], planes_n[safe]))
        d = np.where(has, d, np.inf)
        best = np.argmin(d, axis=1)
        rows = np.arange(len(pts_b))
        new = safe[rows, best]
        move = (d[rows, best] <= max_distance) & (new != labels[pts_b])
        if not move.any():
            break
        labels[pts_b[move]] = new[move]
    return labels


def save_segments(segments, path):
    """Debug dump: JSON list of {index, size, centroid, mean_normal, point_indices}."""
    data = [
        {
            "index": i,
            "size": len(s),
            "centroid": s.centroid.tolist(),
            "mean_normal": s.mean_normal.tolist(),
            "point_indices": s.point_indices.tolist(),
        }
        for i, s in enumerate(segments)
    ]
    try:
        Path(path).write_text(json.dumps(data))
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


class NormalRegionGrowing(ClusterMixin, BaseEstimator):
    """Estimator wrapper; ``labels_`` is -1 on residue points."""

    def __init__(self, angle_threshold=15.0, k_neighbors=20, min_segment_size=50,
                 curvature_threshold=0.05, refine_boundary=True, boundary_distance=None,
                 seed_order="curvature"):
        self.angle_threshold = angle_threshold
        self.k_neighbors = k_neighbors
        self.min_segment_size = min_segment_size
        self.curvature_threshold = curvature_threshold
        self.refine_boundary = refine_boundary
        self.boundary_distance = boundary_distance
        self.seed_order = seed_order

    def fit(self, X, y=None):
        cloud = as_cloud(X)
        self.segments_ = segment_by_normals(
            cloud, self.angle_threshold, self.k_neighbors, self.min_segment_size,
            self.curvature_threshold, self.refine_boundary, self.boundary_distance, self.seed_order,
        )
        self.labels_ = segment_labels(self.segments_, len(cloud))
        return self
