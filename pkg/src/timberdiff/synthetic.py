"""Synthetic timber geometry and simulated scans for tests and demos.

Beams are built by extruding a side profile (a simple polygon in the
x-z plane, counter-clockwise) across the width along y, which yields a
closed, outward-oriented triangle mesh. Profile edges can be tagged as
joint faces.
"""

import numpy as np

from .cad.model import Assembly, build_beam, transform_beam
from .cad.sampling import sample_triangles
from .cloud import PointCloud


def _signed_area(poly):
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def triangulate_polygon(poly):
    """Ear-clipping triangulation of a simple CCW polygon; returns index triples."""
    poly = np.asarray(poly, dtype=np.float64)
    idx = list(range(len(poly)))
    tris = []

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    guard = 0
    while len(idx) > 3:
        guard += 1
        if guard > 10 * len(poly) ** 2:
            raise ValueError("polygon is not simple")
        for k in range(len(idx)):
            i0, i1, i2 = idx[k - 1], idx[k], idx[(k + 1) % len(idx)]
            a, b, c = poly[i0], poly[i1], poly[i2]
            if cross(a, b, c) <= 1e-15:
                continue
            inside = False
            for j in idx:
                if j in (i0, i1, i2):
                    continue
                p = poly[j]
                if cross(a, b, p) >= 0 and cross(b, c, p) >= 0 and cross(c, a, p) >= 0:
                    inside = True
                    break
            if not inside:
                tris.append((i0, i1, i2))
                idx.pop(k)
                break
    tris.append(tuple(idx))
    return tris


def extrude_profile(profile, width, joint_edges=None, beam_id=0):
    """Closed beam from a CCW x-z profile extruded over ``y in [0, width]``.

    ``joint_edges`` maps a profile edge index (edge i runs from vertex i to
    i + 1) to ``(joint_id, face_id)``.
    """
    profile = np.asarray(profile, dtype=np.float64)
    if _signed_area(profile) < 0:
        raise ValueError("profile must be counter-clockwise in the x-z plane")
    n = len(profile)
    front = np.column_stack([profile[:, 0], np.zeros(n), profile[:, 1]])
    back = front + [0.0, width, 0.0]
    vertices = np.vstack([front, back])
    triangles = []
    for a, b, c in triangulate_polygon(profile):
        triangles.append((a, b, c))  # normal -y
        triangles.append((n + a, n + c, n + b))  # normal +y
    edge_tris = {}
    for i in range(n):
        j = (i + 1) % n
        quad = [(i, n + j, j), (i, n + i, n + j)]
        edge_tris[i] = quad
        triangles.extend(quad)
    spec = {}
    for edge, (jid, fid) in (joint_edges or {}).items():
        spec.setdefault(jid, []).append((fid, edge_tris[edge]))
    return build_beam(beam_id, vertices, triangles, sorted(spec.items()))


def box_beam(length=1.0, width=0.1, height=0.08, beam_id=0):
    prof = [(0, 0), (length, 0), (length, height), (0, height)]
    return extrude_profile(prof, width, beam_id=beam_id)


def cross_lap_beam(length=1.0, width=0.1, height=0.08, start=0.45, notch=0.1, depth=0.04, beam_id=0):
    """Box beam with one notch across the top: a joint of 3 faces (wall, bottom, wall)."""
    a, b, z = start, start + notch, height - depth
    prof = [(0, 0), (length, 0), (length, height), (b, height), (b, z), (a, z), (a, height), (0, height)]
    return extrude_profile(prof, width, {3: (0, 0), 4: (0, 1), 5: (0, 2)}, beam_id)


def half_lap_beam(length=1.0, width=0.1, height=0.08, lap=0.16, depth=0.04, beam_id=0):
    """Box beam with an end lap: a joint of 2 faces (lap bottom, shoulder)."""
    x, z = length - lap, height - depth
    prof = [(0, 0), (length, 0), (length, z), (x, z), (x, height), (0, height)]
    return extrude_profile(prof, width, {2: (0, 0), 3: (0, 1)}, beam_id)


def butt_beam(length=1.0, width=0.1, height=0.08, bevel=0.03, beam_id=0):
    """Box beam whose end is cut obliquely to butt against another member."""
    prof = [(0, 0), (length, 0), (length - bevel, height), (0, height)]
    return extrude_profile(prof, width, {1: (0, 0)}, beam_id)


def two_notch_beam(length=1.2, width=0.1, height=0.08, notch=0.1, depth=0.03, beam_id=0):
    """Box beam with two separate cross-lap notches (joints 0 and 1)."""
    z = height - depth
    a0, b0 = 0.25, 0.25 + notch
    a1, b1 = 0.8, 0.8 + notch
    prof = [
        (0, 0), (length, 0), (length, height),
        (b1, height), (b1, z), (a1, z), (a1, height),
        (b0, height), (b0, z), (a0, z), (a0, height),
        (0, height),
    ]
    tags = {3: (0, 0), 4: (0, 1), 5: (0, 2), 7: (1, 0), 8: (1, 1), 9: (1, 2)}
    return extrude_profile(prof, width, tags, beam_id)


def random_rotation(rng, max_angle=np.pi):
    """Rotation about a uniformly random axis by an angle uniform in [0, max_angle]."""
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    return axis_angle(axis, rng.uniform(0.0, max_angle))


def axis_angle(axis, angle):
    axis = np.asarray(axis, dtype=np.float64)
    axis = axis / np.linalg.norm(axis)
    K = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
    return np.eye(3) + np.sin(angle) * K + (1 - np.cos(angle)) * K @ K


def plank_assembly(n_members=13, size=(0.5, 0.012, 0.16), gap=0.06, seed=7, spacing=None):
    """A spatial structure of separated plank members at irregular poses.

    Members are placed on a loose 3D lattice with random orientations and
    accepted only if their surfaces stay at least ``gap`` meters apart.
    """
    rng = np.random.default_rng(seed)
    length, thickness, height = size
    placed = []
    samples = []
    spacing = 1.1 * max(size) if spacing is None else spacing
    slots = [(i, j, k) for i in range(3) for j in range(3) for k in range(2)]
    rng.shuffle(slots)
    slot_iter = iter(slots)
    while len(placed) < n_members:
        slot = next(slot_iter)
        for _ in range(200):
            scale = 1.0 + 0.25 * (len(placed) % 3)
            beam = box_beam(length * (0.7 + 0.15 * (len(placed) % 4)), thickness, height * scale / 1.25, len(placed))
            centre = beam.vertices.mean(axis=0)
            R = random_rotation(rng)
            t = np.array(slot) * spacing + rng.uniform(-0.05, 0.05, 3) - R @ centre
            moved = transform_beam(beam, R, t)
            pts, _, _ = sample_triangles(moved.vertices[moved.triangles], 2e4, rng)
            if all(_min_distance(pts, other) >= gap for other in samples):
                placed.append(moved)
                samples.append(pts)
                break
        else:
            continue
    return Assembly("planks", tuple(placed))


def _min_distance(a, b):
    from scipy.spatial import cKDTree

    d, _ = cKDTree(b).query(a, k=1)
    return float(d.min())


def simulate_scan(faces, density, noise=0.0, seed=0, rotation=None, translation=None):
    """Sample ``faces`` at ``density`` points/m^2, add isotropic Gaussian noise
    (std ``noise`` meters) and move the result by ``p -> R p + t``.
    """
    rng = np.random.default_rng(seed)
    coords = np.concatenate([f.triangle_coords for f in faces])
    pts, _, _ = sample_triangles(coords, density, rng)
    if noise > 0:
        pts = pts + rng.normal(scale=noise, size=pts.shape)
    cloud = PointCloud(pts)
    if rotation is not None or translation is not None:
        R = np.eye(3) if rotation is None else rotation
        t = np.zeros(3) if translation is None else translation
        cloud = cloud.transformed(R, t)
    return cloud
