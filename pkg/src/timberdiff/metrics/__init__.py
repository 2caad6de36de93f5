from .colormap import ColorMap, colorize
from .distances import (
    closest_points_on_mesh,
    closest_points_on_triangles,
    cloud_to_cloud_distances,
    cloud_to_mesh_distances,
    point_triangle_distances,
)
from .report import CSV_HEADER, ErrorReport, categorize, pooled_summary, summarize

__all__ = [
    "closest_points_on_mesh",
    "cloud_to_cloud_distances",
    "cloud_to_mesh_distances",
    "closest_points_on_triangles",
    "point_triangle_distances",
    "summarize",
    "categorize",
    "pooled_summary",
    "ErrorReport",
    "CSV_HEADER",
    "ColorMap",
    "colorize",
]
