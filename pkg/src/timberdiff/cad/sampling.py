"""Area-weighted random sampling of triangle meshes."""

import numpy as np

from .._validation import check_positive
from ..cloud import PointCloud


def sample_triangles(tri_coords, density, rng):
    """Sample ``round(density * total_area)`` points, spread by area.

    Returns (points, unit normals, source triangle index).
    """
    density = check_positive(density, "density")
    tri_coords = np.asarray(tri_coords, dtype=np.float64).reshape(-1, 3, 3)
    cross = np.cross(tri_coords[:, 1] - tri_coords[:, 0], tri_coords[:, 2] - tri_coords[:, 0])
    doubled = np.linalg.norm(cross, axis=1)
    areas = 0.5 * doubled
    total = areas.sum()
    n = int(round(density * total))
    if n == 0 or total == 0:
        return np.zeros((0, 3)), np.zeros((0, 3)), np.zeros(0, dtype=np.intp)
    counts = rng.multinomial(n, areas / total)
    tri_idx = np.repeat(np.arange(len(tri_coords)), counts)
    u = rng.random(n)
    v = rng.random(n)
    flip = u + v > 1.0
    u[flip], v[flip] = 1.0 - u[flip], 1.0 - v[flip]
    t = tri_coords[tri_idx]
    pts = t[:, 0] + u[:, None] * (t[:, 1] - t[:, 0]) + v[:, None] * (t[:, 2] - t[:, 0])
    unit = np.divide(cross, doubled[:, None], out=np.zeros_like(cross), where=doubled[:, None] > 0)
    return pts, unit[tri_idx], tri_idx


def sample_mesh(faces, density=1e6, seed=0):
    """Uniform random surface samples of ``faces`` with their geometric normals.

    ``density`` is in points per square meter; ``seed`` may be an int or
    a :class:`numpy.random.SeedSequence`. Zero-area triangles get no samples.
    """
    faces = list(faces)
    if not faces:
        return PointCloud.empty()
    coords = np.concatenate([f.triangle_coords for f in faces])
    pts, normals, _ = sample_triangles(coords, density, np.random.default_rng(seed))
    return PointCloud(pts, normals)
