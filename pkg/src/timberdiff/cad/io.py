"""OBJ (group-tagged) and JSON readers/writers for assemblies.

OBJ convention: group ``beam<i>`` holds a beam's plain triangles and
``beam<i>_joint<j>_face<k>`` the triangles of joint face ``k`` of joint
``j``. A comment line ``# open: beam<i>`` disables the closed-mesh check
for that beam. Vertices are in meters; faces must be triangles.
"""

import json
import re
from pathlib import Path

import numpy as np

from ..errors import InvalidParameter, IoError, ParseError, SemanticError
from .model import Assembly, build_beam

_BEAM = re.compile(r"^beam(\d+)$")
_JOINT_FACE = re.compile(r"^beam(\d+)_joint(\d+)_face(\d+)$")
_OPEN = re.compile(r"^#\s*open:\s*beam(\d+)\s*$")


def load_assembly(path, name=None):
    """Load an assembly from ``.obj`` or ``.json``."""
    path = Path(path)
    try:
        text = path.read_text()
    except (OSError, UnicodeDecodeError) as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    suffix = path.suffix.lower()
    if suffix == ".obj":
        return parse_obj(text, name or path.stem)
    if suffix == ".json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", f"line {exc.lineno}") from None
        return assembly_from_dict(data)
    raise InvalidParameter(f"unsupported assembly format {suffix!r}; expected .obj or .json")


def save_assembly(assembly, path):
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".json":
        payload = json.dumps(assembly.to_dict(), indent=1)
    elif suffix == ".obj":
        payload = format_obj(assembly)
    else:
        raise InvalidParameter(f"unsupported assembly format {suffix!r}; expected .obj or .json")
    try:
        path.write_text(payload)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def parse_obj(text, name="assembly"):
    vertices = []
    groups = {}
    open_beams = set()
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            m = _OPEN.match(line)
            if m:
                open_beams.add(int(m.group(1)))
            continue
        tok = line.split()
        key = tok[0]
        if key == "v":
            if len(tok) < 4:
                raise ParseError("vertex needs 3 coordinates", f"line {lineno}")
            try:
                vertices.append([float(t) for t in tok[1:4]])
            except ValueError:
                raise ParseError(f"non-numeric vertex {line!r}", f"line {lineno}") from None
        elif key in ("g", "o"):
            if len(tok) != 2:
                raise ParseError(f"expected exactly one group name in {line!r}", f"line {lineno}")
            current = tok[1]
            if not (_BEAM.match(current) or _JOINT_FACE.match(current)):
                raise SemanticError(f"group {current!r} (line {lineno}) does not follow the beam/joint naming convention")
            groups.setdefault(current, [])
        elif key == "f":
            if len(tok) != 4:
                raise ParseError(
                    f"only triangles are supported, got a {len(tok) - 1}-gon; triangulate the mesh first",
                    f"line {lineno}",
                )
            if current is None:
                raise SemanticError(f"face outside any beam group (line {lineno})")
            idx = []
            for t in tok[1:]:
                try:
                    v = int(t.split("/")[0])
                except ValueError:
                    raise ParseError(f"bad face index {t!r}", f"line {lineno}") from None
                v = v - 1 if v > 0 else len(vertices) + v
                if not 0 <= v < len(vertices):
                    raise ParseError(f"face index {t} out of range", f"line {lineno}")
                idx.append(v)
            groups[current].append(idx)
        elif key in ("vn", "vt", "vp", "s", "usemtl", "mtllib", "l"):
            continue
        else:
            raise ParseError(f"unknown OBJ statement {key!r}", f"line {lineno}")

    vertices = np.array(vertices, dtype=np.float64).reshape(-1, 3)
    beams = {}
    for gname, tris in groups.items():
        m = _BEAM.match(gname)
        if m:
            beams.setdefault(int(m.group(1)), {"plain": [], "joints": {}})["plain"] = tris
    for gname, tris in groups.items():
        m = _JOINT_FACE.match(gname)
        if not m:
            continue
        b, j, f = (int(x) for x in m.groups())
        if b not in beams:
            raise SemanticError(f"group {gname!r} refers to beam {b}, which has no 'beam{b}' group")
        beams[b]["joints"].setdefault(j, {})[f] = tris
    missing = open_beams - set(beams)
    if missing:
        raise SemanticError(f"'open' directive for unknown beam(s) {sorted(missing)}")

    out = []
    for b in sorted(beams):
        entry = beams[b]
        all_tris = list(entry["plain"])
        face_lists = []
        for j in sorted(entry["joints"]):
            faces = []
            for f in sorted(entry["joints"][j]):
                faces.append((f, entry["joints"][j][f]))
                all_tris.extend(entry["joints"][j][f])
            face_lists.append((j, faces))
        all_tris = np.array(all_tris, dtype=np.intp).reshape(-1, 3)
        used, inverse = np.unique(all_tris, return_inverse=True)
        remap = {int(g): i for i, g in enumerate(used)}
        local = inverse.reshape(-1, 3)
        spec = [(j, [(f, [[remap[int(v)] for v in t] for t in tris]) for f, tris in faces]) for j, faces in face_lists]
        out.append(build_beam(b, vertices[used], local, spec, b in open_beams))
    return Assembly(name, tuple(out))


def format_obj(assembly):
    lines = [f"# assembly {assembly.name}"]
    base = 0
    for beam in assembly.beams:
        if beam.is_open:
            lines.append(f"# open: beam{beam.id}")
        lines.extend("v " + " ".join(repr(float(c)) for c in v) for v in beam.vertices)
        joint_rows = {
            tuple(t) for f in beam.joint_faces for t in f.triangles.tolist()
        }
        lines.append(f"g beam{beam.id}")
        for t in beam.triangles.tolist():
            if tuple(t) not in joint_rows:
                lines.append("f " + " ".join(str(base + v + 1) for v in t))
        for joint in beam.joints:
            for face in joint.faces:
                lines.append(f"g beam{beam.id}_joint{joint.id}_face{face.id}")
                lines.extend("f " + " ".join(str(base + v + 1) for v in t) for t in face.triangles.tolist())
        base += len(beam.vertices)
    return "\n".join(lines) + "\n"


def assembly_from_dict(data):
    try:
        beams = []
        for b in data["beams"]:
            spec = [
                (int(j["id"]), [(int(f["id"]), f["triangles"]) for f in j.get("faces", [])])
                for j in b.get("joints", [])
            ]
            beams.append(build_beam(int(b["id"]), b["vertices"], b["triangles"], spec, bool(b.get("open", False))))
        return Assembly(str(data.get("name", "assembly")), tuple(beams))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, SemanticError):
            raise
        raise ParseError(f"malformed assembly JSON: {exc!r}") from None
