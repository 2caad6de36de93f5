"""Reading and writing point clouds as PLY (ASCII / binary little-endian) and XYZ."""

import warnings
from pathlib import Path

import numpy as np

from ..errors import InvalidParameter, IoError, ParseError
from .core import PointCloud

_PLY_TYPES = {
    "char": "i1", "int8": "i1",
    "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2",
    "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4",
    "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4",
    "double": "f8", "float64": "f8",
}

FORMATS = ("ply", "xyz")


def infer_format(path, fmt=None):
    if fmt is not None:
        fmt = fmt.lower()
    else:
        fmt = Path(path).suffix.lower().lstrip(".")
    if fmt not in FORMATS:
        raise InvalidParameter(f"unsupported cloud format {fmt!r}; expected one of {FORMATS}")
    return fmt


def load_cloud(path, fmt=None):
    """Load a PLY or XYZ file; the format defaults to the file extension."""
    fmt = infer_format(path, fmt)
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    if fmt == "ply":
        return _parse_ply(data)
    return _parse_xyz(data)


def save_cloud(cloud, path, fmt=None, binary=True):
    """Write ``cloud``; XYZ keeps normals but drops colors (with a warning)."""
    fmt = infer_format(path, fmt)
    if fmt == "ply":
        payload = _format_ply(cloud, binary)
    else:
        if cloud.has_colors:
            warnings.warn("XYZ format cannot store colors; they were dropped", stacklevel=2)
        payload = _format_xyz(cloud)
    try:
        Path(path).write_bytes(payload)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


# -- XYZ ---------------------------------------------------------------------

def _parse_xyz(data):
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError("XYZ file is not valid UTF-8 text", f"byte {exc.start}") from None
    rows = []
    width = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) not in (3, 6):
            raise ParseError(f"expected 3 or 6 columns, got {len(fields)}", f"line {lineno}")
        if width is None:
            width = len(fields)
        elif len(fields) != width:
            raise ParseError(f"column count changed from {width} to {len(fields)}", f"line {lineno}")
        try:
            rows.append([float(f) for f in fields])
        except ValueError:
            raise ParseError(f"non-numeric value in {line!r}", f"line {lineno}") from None
    if not rows:
        return PointCloud.empty()
    arr = np.array(rows, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ParseError("non-finite coordinate in XYZ file")
    normals = None
    if width == 6:
        normals = _renormalize(arr[:, 3:])
    return PointCloud(arr[:, :3], normals)


def _format_xyz(cloud):
    if len(cloud) == 0:
        return b""
    cols = [cloud.points]
    if cloud.has_normals:
        cols.append(cloud.normals)
    arr = np.hstack(cols)
    # repr-precision floats round-trip exactly
    lines = [" ".join(repr(float(v)) for v in row) for row in arr]
    return ("\n".join(lines) + "\n").encode()


def _renormalize(normals):
    # text and float32 storage perturb unit length; zero stays zero
    norms = np.linalg.norm(normals, axis=1, keepdims=True)
    return np.divide(normals, norms, out=np.zeros_like(normals), where=norms > 0)


# -- PLY ---------------------------------------------------------------------

def _read_header(data):
    end = data.find(b"end_header")
    if not data.startswith(b"ply") or end < 0:
        raise ParseError("not a PLY file (missing 'ply' magic or 'end_header')", "byte 0")
    nl = data.find(b"\n", end)
    body_start = len(data) if nl < 0 else nl + 1
    lines = data[:end].decode("ascii", errors="replace").splitlines()
    fmt = None
    elements = []
    for lineno, raw in enumerate(lines[1:], start=2):
        tok = raw.split()
        if not tok or tok[0] in ("comment", "obj_info"):
            continue
        if tok[0] == "format":
            if len(tok) < 2:
                raise ParseError("incomplete format line", f"line {lineno}")
            fmt = tok[1]
        elif tok[0] == "element":
            if len(tok) != 3 or not tok[2].isdigit():
                raise ParseError(f"bad element line {raw!r}", f"line {lineno}")
            elements.append({"name": tok[1], "count": int(tok[2]), "props": []})
        elif tok[0] == "property":
            if not elements:
                raise ParseError("property before any element", f"line {lineno}")
            if len(tok) == 5 and tok[1] == "list":
                if tok[2] not in _PLY_TYPES or tok[3] not in _PLY_TYPES:
                    raise ParseError(f"unknown list type in {raw!r}", f"line {lineno}")
                elements[-1]["props"].append((tok[4], _PLY_TYPES[tok[2]], _PLY_TYPES[tok[3]]))
            elif len(tok) == 3:
                if tok[1] not in _PLY_TYPES:
                    raise ParseError(f"unknown property type {tok[1]!r}", f"line {lineno}")
                elements[-1]["props"].append((tok[2], _PLY_TYPES[tok[1]], None))
            else:
                raise ParseError(f"bad property line {raw!r}", f"line {lineno}")
        else:
            raise ParseError(f"unexpected header keyword {tok[0]!r}", f"line {lineno}")
    if fmt not in ("ascii", "binary_little_endian", "binary_big_endian"):
        raise ParseError(f"unknown PLY format {fmt!r}")
    if fmt == "binary_big_endian":
        raise ParseError("binary_big_endian PLY is not supported; convert to little-endian or ASCII")
    return fmt, elements, body_start, len(lines) + 1


def _parse_ply(data):
    fmt, elements, offset, header_lines = _read_header(data)
    vertex = None
    if fmt == "ascii":
        text_lines = data[offset:].decode("ascii", errors="replace").splitlines()
        pos = 0
        for el in elements:
            if el["name"] == "vertex":
                vertex = _ascii_vertices(el, text_lines[pos : pos + el["count"]], header_lines + 1 + pos)
                break
            pos += el["count"]
    else:
        for el in elements:
            if el["name"] == "vertex":
                vertex, offset = _binary_block(el, data, offset)
                break
            offset = _skip_binary(el, data, offset)
    if vertex is None:
        raise ParseError("PLY file has no 'vertex' element")
    types = {name: t for el in elements if el["name"] == "vertex" for name, t, _ in el["props"]}
    return _vertex_to_cloud(vertex, types)


def _ascii_vertices(el, lines, first_line):
    props = el["props"]
    if any(p[2] is not None for p in props):
        raise ParseError("list properties on vertex element are not supported")
    if len(lines) < el["count"]:
        raise ParseError(f"expected {el['count']} vertex lines, found {len(lines)}", f"line {first_line + len(lines)}")
    cols = {name: np.empty(el["count"]) for name, _, _ in props}
    for i, line in enumerate(lines):
        fields = line.split()
        if len(fields) != len(props):
            raise ParseError(f"expected {len(props)} values, got {len(fields)}", f"line {first_line + i}")
        try:
            for (name, _, _), f in zip(props, fields):
                cols[name][i] = float(f)
        except ValueError:
            raise ParseError(f"non-numeric value in {line!r}", f"line {first_line + i}") from None
    return cols


def _binary_block(el, data, offset):
    if any(p[2] is not None for p in el["props"]):
        raise ParseError("list properties on vertex element are not supported")
    dtype = np.dtype([(name, "<" + t) for name, t, _ in el["props"]])
    size = dtype.itemsize * el["count"]
    if offset + size > len(data):
        raise ParseError(
            f"truncated vertex block: need {size} bytes, {len(data) - offset} available", f"byte {offset}"
        )
    arr = np.frombuffer(data, dtype=dtype, count=el["count"], offset=offset)
    return {name: arr[name].astype(np.float64) for name in dtype.names}, offset + size


def _skip_binary(el, data, offset):
    props = el["props"]
    if all(p[2] is None for p in props):
        return offset + np.dtype([(n, "<" + t) for n, t, _ in props]).itemsize * el["count"]
    for _ in range(el["count"]):
        for _, t, item in props:
            if item is None:
                offset += np.dtype(t).itemsize
            else:
                if offset + np.dtype(t).itemsize > len(data):
                    raise ParseError("truncated list property", f"byte {offset}")
                n = int(np.frombuffer(data, dtype="<" + t, count=1, offset=offset)[0])
                offset += np.dtype(t).itemsize + n * np.dtype(item).itemsize
    return offset


def _vertex_to_cloud(cols, types):
    for axis in "xyz":
        if axis not in cols:
            raise ParseError(f"vertex element lacks property {axis!r}")
    pts = np.column_stack([cols["x"], cols["y"], cols["z"]])
    if not np.all(np.isfinite(pts)):
        raise ParseError("non-finite vertex coordinate")
    normals = colors = None
    if all(k in cols for k in ("nx", "ny", "nz")):
        normals = _renormalize(np.column_stack([cols["nx"], cols["ny"], cols["nz"]]))
    if all(k in cols for k in ("red", "green", "blue")):
        colors = np.column_stack([cols["red"], cols["green"], cols["blue"]])
        if types["red"][0] in "iu":
            colors = colors / float(np.iinfo(types["red"]).max)
        colors = np.clip(colors, 0.0, 1.0)
    return PointCloud(pts, normals, colors)


def _format_ply(cloud, binary=True):
    fields = [("x", "f8"), ("y", "f8"), ("z", "f8")]
    if cloud.has_normals:
        fields += [("nx", "f8"), ("ny", "f8"), ("nz", "f8")]
    if cloud.has_colors:
        fields += [("red", "u1"), ("green", "u1"), ("blue", "u1")]
    names = {"f8": "double", "u1": "uchar"}
    header = ["ply", f"format {'binary_little_endian' if binary else 'ascii'} 1.0", "comment timberdiff"]
    header.append(f"element vertex {len(cloud)}")
    header += [f"property {names[t]} {n}" for n, t in fields]
    header.append("end_header")
    head = ("\n".join(header) + "\n").encode("ascii")

    arr = np.empty(len(cloud), dtype=[(n, "<" + t) for n, t in fields])
    for i, axis in enumerate("xyz"):
        arr[axis] = cloud.points[:, i]
        if cloud.has_normals:
            arr["n" + axis] = cloud.normals[:, i]
    if cloud.has_colors:
        rgb = np.rint(cloud.colors * 255.0).astype(np.uint8)
        for i, ch in enumerate(("red", "green", "blue")):
            arr[ch] = rgb[:, i]
    if binary:
        return head + arr.tobytes()
    lines = []
    for rec in arr:
        lines.append(" ".join(repr(float(v)) if t == "f8" else str(int(v)) for v, (_, t) in zip(rec, fields)))
    body = ("\n".join(lines) + "\n") if lines else ""
    return head + body.encode("ascii")

