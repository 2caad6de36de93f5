"""Feature-matching RANSAC for coarse rigid alignment."""

import numpy as np
from scipy.spatial import cKDTree

from .._validation import check_count, check_positive, n_workers
from ..cloud import SpatialIndex
from ..errors import DegenerateConfiguration, InsufficientPoints, InvalidParameter, LengthMismatch, NoConsensus
from .kabsch import fit_rigid_batch, fit_rigid_correspondences
from .transform import RegistrationResult, RigidTransform


def match_features(source_feat, target_feat, mutual=False):
    """Nearest target descriptor for every source descriptor.

    Identical target descriptors resolve to the lowest target index.
    Returns an (m, 2) array of (source index, target index).
    """
    src = np.asarray(source_feat.histograms)
    dst = np.asarray(target_feat.histograms)
    uniq, first = np.unique(dst, axis=0, return_index=True)
    _, j = cKDTree(uniq).query(src, k=1, workers=n_workers())
    fwd = first[j]
    pairs = np.column_stack([np.arange(len(src)), fwd])
    if mutual:
        uniq_s, first_s = np.unique(src, axis=0, return_index=True)
        _, i = cKDTree(uniq_s).query(dst, k=1, workers=n_workers())
        back = first_s[i]
        pairs = pairs[back[fwd] == pairs[:, 0]]
    return pairs


def evaluate_alignment(source_points, target_index, transform, threshold):
    """(fitness, inlier_rmse) of ``transform`` against a target :class:`SpatialIndex`."""
    if len(source_points) == 0:
        return 0.0, 0.0
    d, _ = target_index.nearest(transform.apply(source_points), max_distance=threshold)
    inl = np.isfinite(d)
    fitness = float(inl.mean())
    rmse = float(np.sqrt(np.mean(d[inl] ** 2))) if inl.any() else 0.0
    return fitness, rmse


def ransac_register(
    source,
    target,
    source_feat,
    target_feat,
    distance_threshold,
    max_iterations=100_000,
    sample_size=3,
    edge_length_ratio=0.9,
    confidence=0.999,
    min_fitness=0.1,
    mutual_filter=False,
    seed=0,
    batch_size=512,
):
    """Align ``source`` onto ``target`` from putative feature correspondences.

    Each hypothesis draws ``sample_size`` correspondences, rejects them if
    any pair of sampled edges differs in length by more than
    ``edge_length_ratio``, fits a rigid transform and counts the
    correspondences it maps within ``distance_threshold``. The best
    hypothesis is refit on its inliers. Iteration stops early once
    ``log(1 - confidence) / log(1 - w^sample_size)`` hypotheses have been
    tried, ``w`` being the best inlier ratio so far.
    """
    thr = check_positive(distance_threshold, "distance_threshold")
    max_it = check_count(max_iterations, "max_iterations")
    k = check_count(sample_size, "sample_size", minimum=3)
    if not 0 < confidence < 1:
        raise InvalidParameter("confidence must lie in (0, 1)")
    if len(source) < k or len(target) < k:
        raise InsufficientPoints(f"RANSAC needs at least {k} points in each cloud")
    if len(source_feat) != len(source) or len(target_feat) != len(target):
        raise LengthMismatch("features must be parallel to their clouds")

    corr = match_features(source_feat, target_feat, mutual_filter)
    if len(corr) < k:
        raise InsufficientPoints(f"only {len(corr)} feature correspondences")
    S = source.points[corr[:, 0]]
    T = target.points[corr[:, 1]]
    n_corr = len(corr)
    rng = np.random.default_rng(seed)
    edges = [(a, b) for a in range(k) for b in range(a + 1, k)]

    best_count, best = 0, None
    it = 0
    needed = max_it
    while it < min(max_it, needed):
        b = min(batch_size, max_it - it)
        it += b
        samples = np.argsort(rng.random((b, n_corr)), axis=1)[:, :k] if n_corr <= 64 else rng.integers(0, n_corr, size=(b, k))
        ok = np.ones(b, dtype=bool)
        for a, c in edges:
            ok &= samples[:, a] != samples[:, c]
        Ss, Ts = S[samples], T[samples]
        for a, c in edges:
            ls = np.linalg.norm(Ss[:, a] - Ss[:, c], axis=1)
            lt = np.linalg.norm(Ts[:, a] - Ts[:, c], axis=1)
            ok &= (ls > 0) & (np.minimum(ls, lt) >= edge_length_ratio * np.maximum(ls, lt))
        if not ok.any():
            continue
        R, t = fit_rigid_batch(Ss[ok], Ts[ok])
        resid = np.einsum("bij,mj->bmi", R, S) + t[:, None, :] - T[None]
        counts = (np.einsum("bmi,bmi->bm", resid, resid) < thr * thr).sum(axis=1)
        j = int(np.argmax(counts))
        if counts[j] > best_count:
            best_count = int(counts[j])
            best = (R[j], t[j])
            w = best_count / n_corr
            if w >= 1.0:
                needed = 0
            else:
                needed = int(np.ceil(np.log(1.0 - confidence) / np.log1p(-(w**k))))
    if best is None:
        raise NoConsensus("no RANSAC hypothesis passed the edge-length check")

    R, t = best
    transform = RigidTransform(*_orthonormal(R, t))
    resid = S @ R.T + t - T
    inliers = np.einsum("ij,ij->i", resid, resid) < thr * thr
    try:
        transform = fit_rigid_correspondences(S[inliers], T[inliers])
    except DegenerateConfiguration:
        pass
    fitness, rmse = evaluate_alignment(source.points, SpatialIndex(target), transform, thr)
    if fitness < min_fitness:
        raise NoConsensus(f"best RANSAC fitness {fitness:.3f} is below the floor {min_fitness}")
    return RegistrationResult(transform, fitness, rmse, it)


def _orthonormal(R, t):
    u, _, vt = np.linalg.svd(R)
    return u @ vt, t
