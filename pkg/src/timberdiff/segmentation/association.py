"""Matching scan segments to CAD faces and gathering per-beam / per-joint clouds."""

import warnings
from dataclasses import dataclass

import numpy as np

from .._validation import check_positive


@dataclass(frozen=True, eq=False)
class FaceAssociation:
    """``target_face`` is (beam id, joint id or None, face id); ``segment`` indexes the segment list."""

    target_face: tuple
    segment: int
    score: float


def associate_segments(segments, target_faces, max_centroid_distance, max_normal_angle=20.0, normal_weight=1.0):
    """Pick, for each target face, the closest and most similarly oriented segment.

    ``target_faces`` is a list of ``(face reference, face cloud)``; the face
    cloud's normals give its orientation. Candidates are segments whose
    mean normal is within ``max_normal_angle`` degrees of the face normal
    (sign-insensitive) and whose centroid is within
    ``max_centroid_distance`` of the face cloud's centroid. The score is
    ``distance + normal_weight * (1 - |cos angle|) * max_centroid_distance``;
    the lowest wins. Faces without a candidate get no association.
    """
    dmax = check_positive(max_centroid_distance, "max_centroid_distance")
    cos_min = np.cos(np.radians(max_normal_angle))
    if not segments or not target_faces:
        return []
    seg_c = np.array([s.centroid for s in segments])
    seg_n = np.array([s.mean_normal for s in segments])
    out = []
    for ref, face_cloud in target_faces:
        if len(face_cloud) == 0:
            continue
        fc = face_cloud.points.mean(axis=0)
        fn = face_cloud.normals.sum(axis=0) if face_cloud.has_normals else np.zeros(3)
        if np.linalg.norm(fn) == 0:
            continue
        fn = fn / np.linalg.norm(fn)
        dist = np.linalg.norm(seg_c - fc, axis=1)
        cos = np.abs(seg_n @ fn)
        score = dist + normal_weight * (1.0 - cos) * dmax
        ok = (cos >= cos_min) & (dist <= dmax)
        if not ok.any():
            continue
        cand = np.flatnonzero(ok)
        best = cand[np.argmin(score[cand])]
        out.append(FaceAssociation(tuple(ref), int(best), float(score[best])))
    return out


def unassociated_faces(associations, target_faces):
    got = {a.target_face for a in associations}
    return [tuple(ref) for ref, _ in target_faces if tuple(ref) not in got]


def shared_segments(associations):
    """Segments chosen by more than one face: {segment index: [face refs]}."""
    users = {}
    for a in associations:
        users.setdefault(a.segment, []).append(a.target_face)
    return {s: refs for s, refs in users.items() if len(refs) > 1}


def cluster_beam_indices(associations, segments, beam_ids):
    """Scan indices per beam: union of the segments associated with its faces.

    A segment claimed by faces of several beams goes to the beam holding
    its lowest-scoring association, which keeps the beam clouds disjoint.
    """
    owner = {}
    for a in associations:
        beam = a.target_face[0]
        if a.segment not in owner or a.score < owner[a.segment][1]:
            owner[a.segment] = (beam, a.score)
    out = {}
    for b in beam_ids:
        segs = sorted(s for s, (beam, _) in owner.items() if beam == b)
        if segs:
            out[b] = np.unique(np.concatenate([segments[s].point_indices for s in segs]))
        else:
            out[b] = np.zeros(0, dtype=np.intp)
    return out


def cluster_beams(associations, assembly, scan, segments):
    """Map every beam id to its scan cloud (empty when no face was matched)."""
    if not associations:
        warnings.warn("no face associations; every beam cloud is empty", stacklevel=2)
    idx = cluster_beam_indices(associations, segments, [b.id for b in assembly.beams])
    return {b: scan.select(i) for b, i in idx.items()}


def _inside_triangles(q, tri, tol=1e-9):
    """Whether each point of ``q`` (already on the triangles' plane) lies in any triangle."""
    inside = np.zeros(len(q), dtype=bool)
    for a, b, c in tri:
        v0, v1, v2 = b - a, c - a, q - a
        d00, d01, d11 = v0 @ v0, v0 @ v1, v1 @ v1
        d20, d21 = v2 @ v0, v2 @ v1
        den = d00 * d11 - d01 * d01
        if den <= 0:
            continue
        v = (d11 * d20 - d01 * d21) / den
        w = (d00 * d21 - d01 * d20) / den
        u = 1.0 - v - w
        inside |= (u >= -tol) & (v >= -tol) & (w >= -tol)
    return inside


def project_onto_face(points, face, tolerance):
    """Mask of points within ``tolerance`` of the face plane whose orthogonal
    projection falls inside one of the face's triangles."""
    if len(points) == 0:
        return np.zeros(0, dtype=bool)
    signed = points @ face.normal - face.offset
    q = points - signed[:, None] * face.normal
    close = np.abs(signed) <= tolerance
    mask = np.zeros(len(points), dtype=bool)
    if close.any():
        mask[close] = _inside_triangles(q[close], face.triangle_coords)
    return mask


@dataclass(frozen=True, eq=False)
class JointCloud:
    """Scan points of one joint: ``indices`` (joint cloud) and ``face_indices`` per face id."""

    beam_id: int
    joint_id: int
    indices: np.ndarray
    face_indices: dict

    def joint_cloud(self, scan):
        return scan.select(self.indices)

    def per_face_clouds(self, scan):
        return {f: scan.select(i) for f, i in self.face_indices.items()}


def extract_joint_cloud(associations, scan, segments, faces, projection_tolerance):
    """Gather, per joint, the associated segment points that project onto its faces.

    ``faces`` maps a face reference (beam, joint, face) to its
    :class:`~timberdiff.cad.MeshFace`. Associations to non-joint faces are
    ignored. Returns {(beam id, joint id): JointCloud}.
    """
    tol = check_positive(projection_tolerance, "projection_tolerance")
    per_face = {}
    for a in associations:
        beam, joint, fid = a.target_face
        if joint is None:
            continue
        face = faces[a.target_face]
        cand = segments[a.segment].point_indices
        keep = cand[project_onto_face(scan.points[cand], face, tol)]
        per_face.setdefault((beam, joint), {})[fid] = keep
    out = {}
    for key in sorted(per_face):
        fi = per_face[key]
        nonempty = [v for v in fi.values() if len(v)]
        joint_idx = np.unique(np.concatenate(nonempty)) if nonempty else np.zeros(0, dtype=np.intp)
        out[key] = JointCloud(key[0], key[1], joint_idx, dict(sorted(fi.items())))
    return out


def joint_clouds_as_points(joint_clouds, scan):
    """Convenience: {(beam, joint): {"joint_cloud": PointCloud, "per_face_clouds": {...}}}."""
    return {
        k: {"joint_cloud": jc.joint_cloud(scan), "per_face_clouds": jc.per_face_clouds(scan)}
        for k, jc in joint_clouds.items()
    }

