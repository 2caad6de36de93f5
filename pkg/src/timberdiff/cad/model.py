"""Assembly -> Beam -> Joint -> face hierarchy over triangle meshes."""

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from ..errors import SemanticError

# adjacent triangles closer than this (radians) are merged into one planar face
COPLANAR_ANGLE = 1e-3


def triangle_normals(vertices, triangles):
    """Unnormalised normals (length = 2 * area) from vertex winding."""
    tri = vertices[triangles]
    return np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])


@dataclass(frozen=True, eq=False)
class MeshFace:
    """A planar patch of a beam's surface.

    ``vertices`` is the owning beam's vertex pool; ``triangles`` index it.
    Joint faces carry the id of their joint and an ``id`` unique within
    that joint; other faces have ``joint_id=None`` and an ``id`` unique
    among the beam's non-joint faces.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    beam_id: int = 0
    id: int = 0
    joint_id: int | None = None
    normal: np.ndarray = field(init=False, repr=False)
    offset: float = field(init=False, repr=False)
    max_deviation: float = field(init=False, repr=False)
    area: float = field(init=False, repr=False)

    def __post_init__(self):
        tris = np.asarray(self.triangles, dtype=np.intp).reshape(-1, 3)
        object.__setattr__(self, "triangles", tris)
        cross = triangle_normals(self.vertices, tris)
        area_normal = cross.sum(axis=0)
        object.__setattr__(self, "area", float(0.5 * np.linalg.norm(cross, axis=1).sum()))
        verts = self.vertices[np.unique(tris)]
        centroid = verts.mean(axis=0)
        if len(verts) >= 3:
            _, _, vt = np.linalg.svd(verts - centroid)
            normal = vt[2]
        else:
            normal = area_normal
        if np.dot(normal, area_normal) < 0:
            normal = -normal
        normal = normal / np.linalg.norm(normal)
        offset = float(normal @ centroid)
        object.__setattr__(self, "normal", normal)
        object.__setattr__(self, "offset", offset)
        object.__setattr__(self, "max_deviation", float(np.abs(verts @ normal - offset).max()))

    @property
    def is_joint_face(self):
        return self.joint_id is not None

    @property
    def ref(self):
        """(beam id, joint id or None, face id)."""
        return (self.beam_id, self.joint_id, self.id)

    @property
    def triangle_coords(self):
        return self.vertices[self.triangles]

    @property
    def centroid(self):
        """Area-weighted centroid of the face's triangles."""
        tri = self.triangle_coords
        areas = 0.5 * np.linalg.norm(triangle_normals(self.vertices, self.triangles), axis=1)
        if areas.sum() == 0:
            return tri.mean(axis=(0, 1))
        return (tri.mean(axis=1) * areas[:, None]).sum(axis=0) / areas.sum()


@dataclass(frozen=True, eq=False)
class Joint:
    id: int
    faces: tuple
    beam_id: int = 0


@dataclass(frozen=True, eq=False)
class Beam:
    """One timber member: a vertex pool, its triangles, planar faces and joints.

    ``faces`` lists the non-joint faces first, then the joint faces in
    (joint id, face id) order.
    """

    id: int
    vertices: np.ndarray
    triangles: np.ndarray
    faces: tuple
    joints: tuple
    is_open: bool = False

    @property
    def joint_faces(self):
        return tuple(f for j in self.joints for f in j.faces)

    def joint(self, joint_id):
        for j in self.joints:
            if j.id == joint_id:
                return j
        raise KeyError(joint_id)

    def face(self, joint_id, face_id):
        for f in self.faces:
            if f.joint_id == joint_id and f.id == face_id:
                return f
        raise KeyError((joint_id, face_id))

    def to_dict(self):
        return {
            "id": self.id,
            "open": self.is_open,
            "vertices": self.vertices.tolist(),
            "triangles": self.triangles.tolist(),
            "joints": [
                {"id": j.id, "faces": [{"id": f.id, "triangles": f.triangles.tolist()} for f in j.faces]}
                for j in self.joints
            ],
        }


@dataclass(frozen=True, eq=False)
class Assembly:
    name: str
    beams: tuple

    def __post_init__(self):
        ids = [b.id for b in self.beams]
        if len(set(ids)) != len(ids):
            raise SemanticError(f"duplicate beam ids in assembly {self.name!r}: {ids}")

    def beam(self, beam_id):
        for b in self.beams:
            if b.id == beam_id:
                return b
        raise KeyError(beam_id)

    @property
    def faces(self):
        return tuple(f for b in self.beams for f in b.faces)

    def to_dict(self):
        return {"name": self.name, "beams": [b.to_dict() for b in self.beams]}


def _edge_keys(triangles):
    """Undirected edge key for each of the 3 edges of every triangle, shape (t, 3)."""
    a = triangles
    b = np.roll(triangles, -1, axis=1)
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    return lo.astype(np.int64) * (1 << 31) + hi


def triangle_adjacency(triangles):
    """Pairs (i, j) of triangles sharing an edge."""
    keys = _edge_keys(triangles).ravel()
    owner = np.repeat(np.arange(len(triangles)), 3)
    order = np.argsort(keys, kind="stable")
    keys, owner = keys[order], owner[order]
    pairs = []
    start = 0
    for end in np.flatnonzero(np.diff(keys)).tolist() + [len(keys) - 1]:
        group = owner[start : end + 1]
        for x in range(len(group)):
            for y in range(x + 1, len(group)):
                pairs.append((group[x], group[y]))
        start = end + 1
    return np.array(pairs, dtype=np.intp).reshape(-1, 2)


def check_closed(triangles):
    """Raise unless every edge is used by exactly two triangles with opposite winding."""
    a = triangles.ravel()
    b = np.roll(triangles, -1, axis=1).ravel()
    directed = a.astype(np.int64) * (1 << 31) + b
    uniq, counts = np.unique(directed, return_counts=True)
    if np.any(counts > 1):
        raise SemanticError("mesh is not consistently oriented (a directed edge is used twice)")
    reverse = b.astype(np.int64) * (1 << 31) + a
    if not np.all(np.isin(reverse, uniq)):
        raise SemanticError("mesh is not closed (boundary edge found); declare the beam open if intended")


def _components(n, pairs):
    if n == 0:
        return 0, np.zeros(0, dtype=np.intp)
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n)) if len(pairs) else coo_matrix((n, n))
    return connected_components(graph, directed=False)


def planar_faces(vertices, triangles, angle_tol=COPLANAR_ANGLE):
    """Split triangles into edge-connected, coplanar groups.

    Returns a list of triangle index arrays ordered by their smallest
    triangle index.
    """
    if len(triangles) == 0:
        return []
    nrm = triangle_normals(vertices, triangles)
    lengths = np.linalg.norm(nrm, axis=1, keepdims=True)
    unit = np.divide(nrm, lengths, out=np.zeros_like(nrm), where=lengths > 0)
    pairs = triangle_adjacency(triangles)
    if len(pairs):
        cos = np.einsum("ij,ij->i", unit[pairs[:, 0]], unit[pairs[:, 1]])
        pairs = pairs[cos >= np.cos(angle_tol)]
    _, labels = _components(len(triangles), pairs)
    groups = {}
    for t, lab in enumerate(labels.tolist()):
        groups.setdefault(lab, []).append(t)
    return sorted((np.array(g, dtype=np.intp) for g in groups.values()), key=lambda g: g[0])


def _canonical(tri):
    # rotate so the smallest index leads, keeping winding
    r = int(np.argmin(tri))
    return tuple(int(v) for v in np.roll(tri, -r))


def build_beam(beam_id, vertices, triangles, joint_spec=(), is_open=False, angle_tol=COPLANAR_ANGLE):
    """Construct and validate a :class:`Beam`.

    ``joint_spec`` is a sequence of ``(joint_id, [(face_id, triangles), ...])``
    where each face's triangles are vertex-index triples that must also
    appear in ``triangles``.
    """
    vertices = np.array(vertices, dtype=np.float64).reshape(-1, 3)
    vertices.setflags(write=False)
    triangles = np.array(triangles, dtype=np.intp).reshape(-1, 3)
    if len(triangles) and (triangles.min() < 0 or triangles.max() >= len(vertices)):
        raise SemanticError(f"beam {beam_id}: triangle references a missing vertex")
    triangles.setflags(write=False)
    if not is_open and len(triangles):
        try:
            check_closed(triangles)
        except SemanticError as exc:
            raise SemanticError(f"beam {beam_id}: {exc}") from None

    lookup = {_canonical(t): i for i, t in enumerate(triangles)}
    tagged = np.zeros(len(triangles), dtype=bool)
    joints = []
    joint_ids = set()
    for joint_id, face_list in joint_spec:
        if joint_id in joint_ids:
            raise SemanticError(f"beam {beam_id}: duplicate joint id {joint_id}")
        joint_ids.add(joint_id)
        faces = []
        face_ids = set()
        for face_id, face_tris in face_list:
            if face_id in face_ids:
                raise SemanticError(f"beam {beam_id} joint {joint_id}: duplicate face id {face_id}")
            face_ids.add(face_id)
            face_tris = np.array(face_tris, dtype=np.intp).reshape(-1, 3)
            if len(face_tris) == 0:
                raise SemanticError(f"beam {beam_id} joint {joint_id} face {face_id} has no triangles")
            rows = []
            for t in face_tris:
                key = _canonical(t)
                if key not in lookup:
                    raise SemanticError(
                        f"beam {beam_id} joint {joint_id} face {face_id}: triangle {key} is not part of the beam"
                    )
                rows.append(lookup[key])
            rows = np.array(rows, dtype=np.intp)
            if np.any(tagged[rows]):
                raise SemanticError(f"beam {beam_id}: a triangle is tagged in more than one joint face")
            tagged[rows] = True
            areas = np.linalg.norm(triangle_normals(vertices, triangles[rows]), axis=1)
            if np.any(areas <= 0):
                raise SemanticError(f"beam {beam_id} joint {joint_id} face {face_id}: zero-area triangle")
            faces.append(MeshFace(vertices, triangles[rows], beam_id, face_id, joint_id))
        if not faces:
            raise SemanticError(f"beam {beam_id} joint {joint_id} has no faces")
        _check_joint_connected(beam_id, joint_id, faces)
        joints.append(Joint(joint_id, tuple(sorted(faces, key=lambda f: f.id)), beam_id))
    joints.sort(key=lambda j: j.id)

    rest = np.flatnonzero(~tagged)
    plain = [
        MeshFace(vertices, triangles[rest[g]], beam_id, i)
        for i, g in enumerate(planar_faces(vertices, triangles[rest], angle_tol))
    ]
    faces = tuple(plain) + tuple(f for j in joints for f in j.faces)
    return Beam(beam_id, vertices, triangles, faces, tuple(joints), bool(is_open))


def _check_joint_connected(beam_id, joint_id, faces):
    if len(faces) == 1:
        return
    tris = np.concatenate([f.triangles for f in faces])
    owner = np.concatenate([np.full(len(f.triangles), i) for i, f in enumerate(faces)])
    pairs = triangle_adjacency(tris)
    n_comp, _ = _components(len(faces), owner[pairs] if len(pairs) else pairs)
    if n_comp > 1:
        raise SemanticError(f"beam {beam_id} joint {joint_id}: faces are not edge-connected")


def strip_joints(beam):
    """Same geometry with every joint tag removed."""
    return build_beam(beam.id, beam.vertices, beam.triangles, (), beam.is_open)


def transform_beam(beam, rotation, translation):
    """Rigidly move a beam, keeping its joint tags."""
    R = np.asarray(rotation, dtype=np.float64)
    verts = beam.vertices @ R.T + np.asarray(translation, dtype=np.float64)
    spec = [(j.id, [(f.id, f.triangles) for f in j.faces]) for j in beam.joints]
    return build_beam(beam.id, verts, beam.triangles, spec, beam.is_open)
