"""Iterative closest point refinement (point-to-point, optional point-to-plane)."""

import numpy as np

from .._validation import check_count, check_positive
from ..cloud import SpatialIndex
from ..errors import DegenerateConfiguration, InvalidParameter, MissingNormals, NoCorrespondences
from .kabsch import fit_rigid_correspondences
from .transform import RegistrationResult, RigidTransform


def truncated_objective(distances, cap):
    """Mean of ``min(d, cap)^2`` over all source points (unmatched count as ``cap``)."""
    d = np.minimum(distances, cap)
    return float(np.mean(d * d))


def _stats(d):
    inl = np.isfinite(d)
    fitness = float(inl.mean()) if len(d) else 0.0
    rmse = float(np.sqrt(np.mean(d[inl] ** 2))) if inl.any() else 0.0
    return fitness, rmse


def _rel_change(old, new):
    return abs(new - old) / max(abs(old), 1e-300)


def _point_to_plane_step(src, dst, normals):
    # linearised: minimise sum ((p + w x p + t - q) . n)^2 over (w, t)
    A = np.hstack([np.cross(src, normals), normals])
    b = np.einsum("ij,ij->i", dst - src, normals)
    x, *_ = np.linalg.lstsq(A, b, rcond=None)
    w, t = x[:3], x[3:]
    angle = np.linalg.norm(w)
    if angle > 0:
        k = w / angle
        K = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
        R = np.eye(3) + np.sin(angle) * K + (1 - np.cos(angle)) * K @ K
        u, _, vt = np.linalg.svd(R)
        R = u @ vt
    else:
        R = np.eye(3)
    return RigidTransform(R, t)


def icp_refine(
    source,
    target,
    initial=None,
    max_correspondence_distance=0.01,
    max_iterations=50,
    rel_rmse_change=1e-6,
    rel_fitness_change=1e-6,
    method="point_to_point",
    target_index=None,
    robust_k=None,
):
    """Refine ``initial`` so that ``source`` moved by it fits ``target``.

    Each iteration matches every source point to its nearest target point
    within ``max_correspondence_distance`` and solves for the rigid
    update in closed form (point-to-point) or by linearised least squares
    (point-to-plane). The residual is the matched distance, or for
    point-to-plane its component along the target normal. An update is
    accepted only if it does not increase the truncated objective (mean of
    ``min(r, c)^2``, unmatched points counting ``c``), which makes the
    objective monotone over accepted iterations. ``c`` is the
    correspondence distance unless ``robust_k`` is given, in which case
    ``c = robust_k * 1.4826 * median(r)`` is fixed from the initial pose
    and only residuals below it drive the fit. Stops after
    ``max_iterations`` or when the relative changes of both inlier RMSE
    and fitness drop below their thresholds. The returned transform
    includes ``initial``.
    """
    cap = check_positive(max_correspondence_distance, "max_correspondence_distance")
    max_it = check_count(max_iterations, "max_iterations", minimum=0)
    if method not in ("point_to_point", "point_to_plane"):
        raise InvalidParameter(f"unknown ICP method {method!r}")
    if method == "point_to_plane" and not target.has_normals:
        raise MissingNormals("point-to-plane ICP needs target normals")
    if len(source) == 0 or len(target) == 0:
        raise NoCorrespondences("ICP needs non-empty clouds")
    index = target_index if target_index is not None else SpatialIndex(target)
    tpts = target.points

    def match(pts):
        d, idx = index.nearest(pts, max_distance=cap)
        m = np.isfinite(d)
        q = np.full_like(pts, np.nan)
        q[m] = tpts[idx[m]]
        if method == "point_to_plane":
            nrm = np.zeros_like(pts)
            nrm[m] = target.normals[idx[m]]
            d = d.copy()
            d[m] = np.abs(np.einsum("ij,ij->i", pts[m] - q[m], nrm[m]))
            return d, q, nrm
        return d, q, None

    return _icp_loop(source, initial, match, cap, max_it, rel_rmse_change, rel_fitness_change, robust_k)


def icp_to_mesh(
    source,
    faces,
    initial=None,
    max_correspondence_distance=0.01,
    max_iterations=50,
    rel_rmse_change=1e-6,
    rel_fitness_change=1e-6,
    robust_k=None,
):
    """Point-to-point ICP against the exact surface of ``faces``.

    Same loop and acceptance rule as :func:`icp_refine`, but each source
    point is matched to its closest point on the triangles, so the result
    does not depend on how densely a target cloud was sampled.
    """
    from ..metrics.distances import closest_points_on_mesh

    cap = check_positive(max_correspondence_distance, "max_correspondence_distance")
    max_it = check_count(max_iterations, "max_iterations", minimum=0)
    if len(source) == 0:
        raise NoCorrespondences("ICP needs a non-empty source")
    faces = list(faces) if not isinstance(faces, np.ndarray) else faces

    def match(pts):
        d, q = closest_points_on_mesh(pts, faces)
        d = np.where(d <= cap, d, np.inf)
        return d, q, None

    return _icp_loop(source, initial, match, cap, max_it, rel_rmse_change, rel_fitness_change, robust_k)


def _icp_loop(source, initial, match, cap, max_it, rel_rmse_change, rel_fitness_change, robust_k):
    # match(points) -> (residuals, matched points, normals or None); inf residual = unmatched
    initial = RigidTransform.identity() if initial is None else initial
    base = initial.apply(source.points)
    delta = RigidTransform.identity()
    cur = base
    d, q, nrm = match(cur)
    if not np.isfinite(d).any():
        raise NoCorrespondences(f"no source point has a target neighbour within {cap} m at the initial pose")
    cut = cap
    if robust_k is not None:
        scale = 1.4826 * float(np.median(d[np.isfinite(d)]))
        cut = min(cap, max(check_positive(robust_k, "robust_k") * scale, 1e-12))
    objective = truncated_objective(d, cut)
    fitness, rmse = _stats(d)
    iterations = 0
    for _ in range(max_it):
        m = d <= cut
        try:
            if not m.any():
                raise DegenerateConfiguration("no residual below the cutoff")
            if nrm is not None:
                step = _point_to_plane_step(cur[m], q[m], nrm[m])
            else:
                step = fit_rigid_correspondences(cur[m], q[m])
        except DegenerateConfiguration:
            break
        cand = step.compose(delta)
        new_pts = cand.apply(base)
        d2, q2, n2 = match(new_pts)
        new_obj = truncated_objective(d2, cut)
        if new_obj > objective:
            break
        delta, cur, d, q, nrm, objective = cand, new_pts, d2, q2, n2, new_obj
        iterations += 1
        new_fit, new_rmse = _stats(d)
        done = _rel_change(rmse, new_rmse) < rel_rmse_change and _rel_change(fitness, new_fit) < rel_fitness_change
        fitness, rmse = new_fit, new_rmse
        if done:
            break
    return RegistrationResult(delta.compose(initial), fitness, rmse, iterations)
