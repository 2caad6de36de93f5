"""Run configuration shared by the evaluation pipelines."""

from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from ..errors import InvalidParameter
from ..registration import RigidTransform

BACKENDS = ("auto", "cloud_to_cloud", "cloud_to_mesh")

# named random streams; each gets its own child of the config seed
STREAMS = {"target_sampling": 0, "ransac": 1}

_LENGTHS = (
    "voxel_size",
    "registration_voxel",
    "icp_fine_distance",
    "association_distance",
    "projection_tolerance",
    "t2_max_distance",
    "threshold",
)


@dataclass(frozen=True)
class PipelineConfig:
    """All lengths in meters.

    ``t1`` (a :class:`RigidTransform`) replaces the coarse RANSAC stage;
    ``skip_registration`` trusts the scan to already sit in the model frame.
    Optional lengths left as ``None`` are derived: ``icp_fine_distance``
    is ``2 * voxel_size``, ``t2_max_distance`` is
    ``2 * projection_tolerance`` and ``association_distance`` is twice each
    beam's cross-section diagonal.
    """

    voxel_size: float = 0.002
    remove_outliers: bool = True
    outlier_k: int = 20
    outlier_std_ratio: float = 2.0
    normal_k: int = 20
    registration_voxel: float = 0.01
    ransac_max_iterations: int = 100_000
    ransac_confidence: float = 0.999
    icp_iterations: int = 60
    icp_fine_distance: float | None = None
    icp_robust_k: float | None = 2.0
    icp_robust_passes: int = 3
    min_fitness: float = 0.1
    t1: RigidTransform | None = None
    skip_registration: bool = False
    angle_threshold: float = 15.0
    segmentation_k: int = 20
    min_segment_size: int = 50
    curvature_threshold: float = 0.05
    association_distance: float | None = None
    association_angle: float = 20.0
    projection_tolerance: float = 0.005
    t2_max_distance: float | None = None
    sample_density: float = 1e6
    metric_backend: str = "auto"
    threshold: float | None = None
    colormap_mode: str = "adaptive"
    colormap_bounds: tuple | None = None
    seed: int = 0
    output_dir: str | None = None

    def __post_init__(self):
        for name in _LENGTHS:
            v = getattr(self, name)
            if v is not None and not (np.isfinite(v) and v > 0):
                raise InvalidParameter(f"{name} must be a positive length in meters, got {v!r}")
        for name in ("outlier_k", "normal_k", "segmentation_k", "min_segment_size", "icp_iterations", "icp_robust_passes", "ransac_max_iterations"):
            if int(getattr(self, name)) < 1:
                raise InvalidParameter(f"{name} must be >= 1")
        if not 0.0 <= self.min_fitness <= 1.0:
            raise InvalidParameter("min_fitness must lie in [0, 1]")
        if self.outlier_std_ratio <= 0 or self.sample_density <= 0:
            raise InvalidParameter("outlier_std_ratio and sample_density must be positive")
        if self.metric_backend not in BACKENDS:
            raise InvalidParameter(f"metric_backend must be one of {BACKENDS}")
        if self.colormap_mode not in ("adaptive", "fixed"):
            raise InvalidParameter("colormap_mode must be 'adaptive' or 'fixed'")
        if self.seed is None or int(self.seed) < 0:
            raise InvalidParameter("seed must be a non-negative integer")
        if self.t1 is not None and self.skip_registration:
            raise InvalidParameter("t1 and skip_registration are mutually exclusive")

    @property
    def fine_distance(self):
        return self.icp_fine_distance or 2.0 * self.voxel_size

    @property
    def t2_distance(self):
        return self.t2_max_distance or 2.0 * self.projection_tolerance

    def backend(self, level):
        if self.metric_backend != "auto":
            return self.metric_backend
        return "cloud_to_cloud" if level in ("assembly", "beam") else "cloud_to_mesh"

    def seed_for(self, stream, *key):
        """Child seed for a named stream; ``key`` further splits it (e.g. per beam)."""
        return np.random.SeedSequence(int(self.seed), spawn_key=(STREAMS[stream], *key))

    def int_seed_for(self, stream, *key):
        return int(self.seed_for(stream, *key).generate_state(1)[0])

    def replace(self, **changes):
        return replace(self, **changes)

    def to_dict(self):
        out = asdict(self)
        out["t1"] = None if self.t1 is None else self.t1.to_dict()
        if self.colormap_bounds is not None:
            out["colormap_bounds"] = list(self.colormap_bounds)
        return out

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InvalidParameter(f"unknown config keys: {sorted(unknown)}")
        data = dict(data)
        if data.get("t1") is not None:
            data["t1"] = RigidTransform.from_dict(data["t1"])
        if data.get("colormap_bounds") is not None:
            data["colormap_bounds"] = tuple(data["colormap_bounds"])
        return cls(**data)
