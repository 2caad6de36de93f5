"""Unsigned scan-to-model distances."""

import numpy as np

from ..cloud import SpatialIndex
from ..errors import EmptyTarget


def cloud_to_cloud_distances(source, target, target_index=None):
    """Distance from each source point to its nearest target point."""
    if len(target) == 0:
        raise EmptyTarget("target cloud is empty")
    index = target_index if target_index is not None else SpatialIndex(target)
    d, _ = index.nearest(source.points)
    return d


def closest_points_on_triangles(p, a, b, c):
    """Closest point on triangle (a, b, c) to p, broadcast over leading axes.

    Voronoi-region walk over vertices, edges and interior.
    """
    ab, ac, ap = b - a, c - a, p - a
    d1 = np.einsum("...i,...i->...", ab, ap)
    d2 = np.einsum("...i,...i->...", ac, ap)
    bp = p - b
    d3 = np.einsum("...i,...i->...", ab, bp)
    d4 = np.einsum("...i,...i->...", ac, bp)
    cp = p - c
    d5 = np.einsum("...i,...i->...", ab, cp)
    d6 = np.einsum("...i,...i->...", ac, cp)
    va = d3 * d6 - d5 * d4
    vb = d5 * d2 - d1 * d6
    vc = d1 * d4 - d3 * d2

    with np.errstate(divide="ignore", invalid="ignore"):
        v_ab = d1 / (d1 - d3)
        w_ac = d2 / (d2 - d6)
        w_bc = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        denom = va + vb + vc
        v_in = vb / denom
        w_in = vc / denom

    in_a = (d1 <= 0) & (d2 <= 0)
    in_b = (d3 >= 0) & (d4 <= d3)
    in_ab = (vc <= 0) & (d1 >= 0) & (d3 <= 0)
    in_c = (d6 >= 0) & (d5 <= d6)
    in_ac = (vb <= 0) & (d2 >= 0) & (d6 <= 0)
    in_bc = (va <= 0) & ((d4 - d3) >= 0) & ((d5 - d6) >= 0)

    b_, c_ = np.broadcast_arrays(b, c)
    a_ = np.broadcast_to(a, b_.shape)
    shape = np.broadcast_shapes(p.shape, a_.shape)
    out = np.broadcast_to(a_ + ab * v_in[..., None] + ac * w_in[..., None], shape).copy()
    # later assignments win: apply in reverse priority
    for mask, value in (
        (in_bc, b + (c - b) * w_bc[..., None]),
        (in_ac, a + ac * w_ac[..., None]),
        (in_c, c_),
        (in_ab, a + ab * v_ab[..., None]),
        (in_b, b_),
        (in_a, a_),
    ):
        m = np.broadcast_to(mask, shape[:-1])
        out[m] = np.broadcast_to(value, shape)[m]
    return out


def _segment_distance(p, a, b):
    ab = b - a
    L = np.einsum("...i,...i->...", ab, ab)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(L > 0, np.einsum("...i,...i->...", p - a, ab) / L, 0.0)
    t = np.clip(t, 0.0, 1.0)
    diff = p - (a + ab * t[..., None])
    return np.sqrt(np.einsum("...i,...i->...", diff, diff))


def point_triangle_distances(points, tri_coords):
    """(n, m) distances between n points and m triangles (m, 3, 3)."""
    p = points[:, None, :]
    a, b, c = tri_coords[None, :, 0], tri_coords[None, :, 1], tri_coords[None, :, 2]
    q = closest_points_on_triangles(p, a, b, c)
    diff = p - q
    d = np.sqrt(np.einsum("nmi,nmi->nm", diff, diff))
    area2 = np.linalg.norm(np.cross(tri_coords[:, 1] - tri_coords[:, 0], tri_coords[:, 2] - tri_coords[:, 0]), axis=1)
    degenerate = area2 == 0
    if degenerate.any():
        t = tri_coords[degenerate][None]
        seg = np.minimum.reduce(
            [_segment_distance(p, t[:, :, i], t[:, :, (i + 1) % 3]) for i in range(3)]
        )
        d[:, degenerate] = seg
    return d


def _triangles(faces):
    if isinstance(faces, np.ndarray):
        return faces.reshape(-1, 3, 3)
    faces = list(faces)
    return np.concatenate([f.triangle_coords for f in faces]) if faces else np.zeros((0, 3, 3))


def closest_points_on_mesh(points, faces, chunk=2048):
    """Nearest surface point of ``faces`` for each of ``points``: (distances, closest points).

    Zero-area triangles are skipped.
    """
    tri = _triangles(faces)
    tri = tri[np.linalg.norm(np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]), axis=1) > 0]
    if len(tri) == 0:
        raise EmptyTarget("no triangles to measure against")
    pts = np.asarray(points, dtype=np.float64)
    dist = np.empty(len(pts))
    closest = np.empty_like(pts)
    step = max(1, chunk * 64 // len(tri))
    for s in range(0, len(pts), step):
        chunk_pts = pts[s : s + step]
        d = point_triangle_distances(chunk_pts, tri)
        best = np.argmin(d, axis=1)
        t = tri[best]
        closest[s : s + step] = closest_points_on_triangles(chunk_pts, t[:, 0], t[:, 1], t[:, 2])
        dist[s : s + step] = d[np.arange(len(chunk_pts)), best]
    return dist, closest


def cloud_to_mesh_distances(source, faces, chunk=2048):
    """Exact distance from each source point to the nearest triangle of ``faces``.

    ``faces`` is a list of :class:`~timberdiff.cad.MeshFace` or a
    (m, 3, 3) array of triangle coordinates.
    """
    tri = _triangles(faces)
    if len(tri) == 0:
        raise EmptyTarget("no triangles to measure against")
    pts = source.points if hasattr(source, "points") else np.asarray(source, dtype=np.float64)
    out = np.empty(len(pts))
    step = max(1, chunk * 64 // max(len(tri), 1))
    for s in range(0, len(pts), step):
        out[s : s + step] = point_triangle_distances(pts[s : s + step], tri).min(axis=1)
    return out
