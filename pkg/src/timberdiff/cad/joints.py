"""Geometric fallback for finding joints on untagged beams."""

import numpy as np

from ..errors import NotApplicable
from .model import build_beam, triangle_adjacency, _components


def beam_frame(beam, dihedral_threshold=5.0):
    """Oriented box axes (3, 3 rows) from the beam's dominant face normals.

    The largest face fixes the first axis; the largest face roughly
    perpendicular to it fixes the second.
    """
    faces = sorted(beam.faces, key=lambda f: -f.area)
    a1 = faces[0].normal
    tol = np.sin(np.radians(dihedral_threshold))
    a2 = None
    for f in faces[1:]:
        if abs(f.normal @ a1) < tol:
            a2 = f.normal - (f.normal @ a1) * a1
            break
    if a2 is None:
        # no perpendicular face: fall back to the vertex spread
        centered = beam.vertices - beam.vertices.mean(axis=0)
        centered -= np.outer(centered @ a1, a1)
        a2 = np.linalg.svd(centered, full_matrices=False)[2][0]
    a2 /= np.linalg.norm(a2)
    return np.array([a1, a2, np.cross(a1, a2)])


def cross_section_diagonal(beam):
    """Diagonal of the beam's box cross-section (the two shortest box extents)."""
    axes = beam_frame(beam)
    ext = np.sort(np.ptp(beam.vertices @ axes.T, axis=0))
    return float(np.hypot(ext[0], ext[1]))


def detect_joints(beam, dihedral_threshold=5.0, distance_tolerance=1e-4):
    """Tag as joint faces every face that is not on a side of the beam's box.

    A face is on a side when its normal is within ``dihedral_threshold``
    degrees of that side's axis and all its vertices lie within
    ``distance_tolerance`` meters of the side plane. Remaining faces are
    grouped into joints by edge connectivity; joints and their faces are
    numbered in order of their smallest vertex index.
    """
    if beam.joints:
        raise NotApplicable(f"beam {beam.id} already has explicit joints")
    axes = beam_frame(beam, dihedral_threshold)
    proj = beam.vertices @ axes.T
    lo, hi = proj.min(axis=0), proj.max(axis=0)
    cos_tol = np.cos(np.radians(dihedral_threshold))

    joint_faces = []
    for face in beam.faces:
        vproj = beam.vertices[np.unique(face.triangles)] @ axes.T
        on_side = False
        for k in range(3):
            if abs(face.normal @ axes[k]) < cos_tol:
                continue
            if np.all(np.abs(vproj[:, k] - lo[k]) <= distance_tolerance) or np.all(
                np.abs(vproj[:, k] - hi[k]) <= distance_tolerance
            ):
                on_side = True
                break
        if not on_side:
            joint_faces.append(face)

    if not joint_faces:
        return beam
    tris = np.concatenate([f.triangles for f in joint_faces])
    owner = np.concatenate([np.full(len(f.triangles), i) for i, f in enumerate(joint_faces)])
    pairs = triangle_adjacency(tris)
    _, labels = _components(len(joint_faces), owner[pairs] if len(pairs) else pairs)

    def first_vertex(face):
        return (int(face.triangles.min()), int(face.triangles[:, 0].min()))

    comps = {}
    for face, lab in zip(joint_faces, labels.tolist()):
        comps.setdefault(lab, []).append(face)
    ordered = sorted(comps.values(), key=lambda fs: min(first_vertex(f) for f in fs))
    spec = []
    for j, faces in enumerate(ordered):
        faces = sorted(faces, key=first_vertex)
        spec.append((j, [(k, f.triangles) for k, f in enumerate(faces)]))
    return build_beam(beam.id, beam.vertices, beam.triangles, spec, beam.is_open)
