"""Closed-form least-squares rigid fit between corresponding point sets."""

import numpy as np

from .._validation import check_points
from ..errors import DegenerateConfiguration, LengthMismatch
from .transform import RigidTransform


def _rotation_from_covariance(H):
    # H = sum (s - cs)(t - ct)^T ; batched over leading axes
    U, _, Vt = np.linalg.svd(H)
    d = np.sign(np.linalg.det(np.swapaxes(Vt, -1, -2) @ np.swapaxes(U, -1, -2)))
    d = np.where(d == 0, 1.0, d)
    D = np.zeros(H.shape)
    D[..., 0, 0] = 1.0
    D[..., 1, 1] = 1.0
    D[..., 2, 2] = d
    return np.swapaxes(Vt, -1, -2) @ D @ np.swapaxes(U, -1, -2)


def fit_rigid_correspondences(source_points, target_points, weights=None):
    """Rotation and translation minimising ``sum w_i |R s_i + t - t_i|^2``.

    SVD of the cross-covariance with a reflection correction. Raises
    :class:`DegenerateConfiguration` when the source points are fewer
    than three or (nearly) collinear.
    """
    src = check_points(source_points, "source_points")
    dst = check_points(target_points, "target_points")
    if len(src) != len(dst):
        raise LengthMismatch(f"{len(src)} source vs {len(dst)} target points")
    if len(src) < 3:
        raise DegenerateConfiguration(f"need at least 3 correspondences, got {len(src)}")
    w = np.ones(len(src)) if weights is None else np.asarray(weights, dtype=np.float64)
    w = w / w.sum()
    cs = w @ src
    ct = w @ dst
    a = src - cs
    b = dst - ct
    spread = np.linalg.svd(a * np.sqrt(w)[:, None], compute_uv=False)
    if spread[0] == 0 or spread[1] <= 1e-9 * spread[0]:
        raise DegenerateConfiguration("source points are coincident or collinear")
    H = (a * w[:, None]).T @ b
    R = _rotation_from_covariance(H)
    # re-orthonormalise rounding so RigidTransform's 1e-9 check always holds
    u, _, vt = np.linalg.svd(R)
    R = u @ vt
    return RigidTransform(R, ct - R @ cs)


def fit_rigid_batch(src, dst):
    """Vectorised fit for many small problems: ``src``, ``dst`` of shape (b, m, 3).

    Returns rotations (b, 3, 3) and translations (b, 3); no degeneracy checks.
    """
    cs = src.mean(axis=1, keepdims=True)
    ct = dst.mean(axis=1, keepdims=True)
    H = np.einsum("bmi,bmj->bij", src - cs, dst - ct)
    R = _rotation_from_covariance(H)
    t = ct[:, 0] - np.einsum("bij,bj->bi", R, cs[:, 0])
    return R, t
