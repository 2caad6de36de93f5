"""Coarse-to-fine registration and sklearn-style wrappers."""

from dataclasses import dataclass

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .._validation import check_positive
from ..cloud import as_cloud, estimate_normals, voxel_downsample
from .fpfh import compute_fpfh
from .icp import icp_refine
from .ransac import ransac_register
from .transform import RigidTransform


@dataclass(frozen=True)
class RegistrationReport:
    """Outcome of :func:`register`: coarse result (``None`` if skipped) and ICP result."""

    coarse: object
    fine: object

    @property
    def transform(self):
        return self.fine.transform


def prepare_features(cloud, voxel_size, feature_radius=None, k_normals=20):
    """Down-sample, estimate normals (always re-estimated) and compute FPFH."""
    voxel_size = check_positive(voxel_size, "voxel_size")
    radius = 5.0 * voxel_size if feature_radius is None else feature_radius
    down = voxel_downsample(cloud, voxel_size)
    down = estimate_normals(down, min(k_normals, len(down)))
    return down, compute_fpfh(down, radius)


def register(
    source,
    target,
    voxel_size,
    initial=None,
    feature_radius=None,
    distance_threshold=None,
    max_iterations=100_000,
    confidence=0.999,
    edge_length_ratio=0.9,
    min_fitness=0.1,
    icp_distance=None,
    icp_iterations=60,
    icp_method="point_to_point",
    seed=0,
):
    """RANSAC over FPFH matches on ``voxel_size``-downsampled copies, then ICP at full resolution.

    With ``initial`` given the RANSAC stage is skipped (fiducial path).
    Defaults: feature radius ``5 * voxel_size``, RANSAC threshold and ICP
    correspondence cap ``1.5 * voxel_size``.
    """
    thr = 1.5 * voxel_size if distance_threshold is None else distance_threshold
    coarse = None
    if initial is None:
        s_down, s_feat = prepare_features(source, voxel_size, feature_radius)
        t_down, t_feat = prepare_features(target, voxel_size, feature_radius)
        coarse = ransac_register(
            s_down, t_down, s_feat, t_feat, thr,
            max_iterations=max_iterations, confidence=confidence,
            edge_length_ratio=edge_length_ratio, min_fitness=min_fitness, seed=seed,
        )
        initial = coarse.transform
    fine = icp_refine(
        source, target, initial,
        max_correspondence_distance=thr if icp_distance is None else icp_distance,
        max_iterations=icp_iterations, method=icp_method,
    )
    return RegistrationReport(coarse, fine)


class GlobalRegistration(BaseEstimator):
    """``fit(source, target)`` estimates ``transform_`` mapping source onto target.

    Set ``initial`` to skip the RANSAC stage and only refine.
    """

    def __init__(self, voxel_size=0.01, feature_radius=None, distance_threshold=None,
                 max_iterations=100_000, confidence=0.999, edge_length_ratio=0.9,
                 min_fitness=0.1, icp_distance=None, icp_iterations=60,
                 icp_method="point_to_point", initial=None, seed=0):
        self.voxel_size = voxel_size
        self.feature_radius = feature_radius
        self.distance_threshold = distance_threshold
        self.max_iterations = max_iterations
        self.confidence = confidence
        self.edge_length_ratio = edge_length_ratio
        self.min_fitness = min_fitness
        self.icp_distance = icp_distance
        self.icp_iterations = icp_iterations
        self.icp_method = icp_method
        self.initial = initial
        self.seed = seed

    def fit(self, X, y):
        report = register(
            as_cloud(X), as_cloud(y), self.voxel_size, initial=self.initial,
            feature_radius=self.feature_radius, distance_threshold=self.distance_threshold,
            max_iterations=self.max_iterations, confidence=self.confidence,
            edge_length_ratio=self.edge_length_ratio, min_fitness=self.min_fitness,
            icp_distance=self.icp_distance, icp_iterations=self.icp_iterations,
            icp_method=self.icp_method, seed=self.seed,
        )
        self.coarse_result_ = report.coarse
        self.result_ = report.fine
        self.transform_ = report.transform
        return self

    def transform(self, X):
        check_is_fitted(self, "transform_")
        return self.transform_.apply_cloud(as_cloud(X))


class ICPRegistration(BaseEstimator):
    def __init__(self, max_correspondence_distance=0.01, max_iterations=50,
                 rel_rmse_change=1e-6, rel_fitness_change=1e-6,
                 method="point_to_point", initial=None):
        self.max_correspondence_distance = max_correspondence_distance
        self.max_iterations = max_iterations
        self.rel_rmse_change = rel_rmse_change
        self.rel_fitness_change = rel_fitness_change
        self.method = method
        self.initial = initial

    def fit(self, X, y):
        self.result_ = icp_refine(
            as_cloud(X), as_cloud(y), self.initial or RigidTransform.identity(),
            self.max_correspondence_distance, self.max_iterations,
            self.rel_rmse_change, self.rel_fitness_change, self.method,
        )
        self.transform_ = self.result_.transform
        return self

    def transform(self, X):
        check_is_fitted(self, "transform_")
        return self.transform_.apply_cloud(as_cloud(X))
