from .core import PointCloud, SpatialIndex, as_cloud
from .io import load_cloud, save_cloud
from .preprocessing import (
    NormalEstimator,
    StatisticalOutlierRemover,
    VoxelDownsampler,
    estimate_normals,
    remove_statistical_outliers,
    voxel_downsample,
)

__all__ = [
    "PointCloud",
    "SpatialIndex",
    "as_cloud",
    "load_cloud",
    "save_cloud",
    "voxel_downsample",
    "remove_statistical_outliers",
    "estimate_normals",
    "VoxelDownsampler",
    "StatisticalOutlierRemover",
    "NormalEstimator",
]
