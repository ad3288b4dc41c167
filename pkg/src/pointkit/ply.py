"""PLY reading and writing for point clouds.

Reads ``ascii``, ``binary_little_endian`` and ``binary_big_endian`` files.
Only the ``vertex`` element is interpreted; other elements and unknown
vertex properties are skipped. Writing emits float32 coordinates and
normals and uchar colors.
"""

import os

import numpy as np

from .core import PointCloud

_TYPES = {
    "char": "i1", "int8": "i1",
    "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2",
    "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4",
    "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4",
    "double": "f8", "float64": "f8",
}

_FORMATS = {
    "ascii": None,
    "binary_little_endian": "<",
    "binary_big_endian": ">",
}


class PlyError(ValueError):
    pass


class _Element:
    def __init__(self, name, count):
        self.name = name
        self.count = count
        # (name, dtype) or (name, (count_dtype, item_dtype)) for lists
        self.props = []

    @property
    def has_lists(self):
        return any(isinstance(t, tuple) for _, t in self.props)


def _parse_header(f, path):
    magic = f.readline()
    if magic.rstrip(b"\r\n") != b"ply":
        raise PlyError(f"{path}: line 1: expected 'ply' magic, got {magic[:20]!r}")
    fmt = None
    elements = []
    lineno = 1
    while True:
        raw = f.readline()
        lineno += 1
        if not raw:
            raise PlyError(f"{path}: unexpected end of file before 'end_header'")
        try:
            line = raw.decode("ascii").strip()
        except UnicodeDecodeError:
            raise PlyError(f"{path}: line {lineno}: header is not ASCII") from None
        if not line or line.startswith("comment") or line.startswith("obj_info"):
            continue
        words = line.split()
        key = words[0]
        if key == "end_header":
            break
        if key == "format":
            if len(words) != 3 or words[1] not in _FORMATS:
                raise PlyError(f"{path}: line {lineno}: unsupported format line {line!r}")
            fmt = words[1]
        elif key == "element":
            if len(words) != 3:
                raise PlyError(f"{path}: line {lineno}: malformed element line {line!r}")
            try:
                count = int(words[2])
            except ValueError:
                raise PlyError(f"{path}: line {lineno}: bad element count {words[2]!r}") from None
            elements.append(_Element(words[1], count))
        elif key == "property":
            if not elements:
                raise PlyError(f"{path}: line {lineno}: property before any element")
            if len(words) == 5 and words[1] == "list":
                if words[2] not in _TYPES or words[3] not in _TYPES:
                    raise PlyError(f"{path}: line {lineno}: unsupported list property type in {line!r}")
                elements[-1].props.append((words[4], (_TYPES[words[2]], _TYPES[words[3]])))
            elif len(words) == 3:
                if words[1] not in _TYPES:
                    raise PlyError(f"{path}: line {lineno}: unsupported property type {words[1]!r} "
                                   f"for property {words[2]!r}")
                elements[-1].props.append((words[2], _TYPES[words[1]]))
            else:
                raise PlyError(f"{path}: line {lineno}: malformed property line {line!r}")
        else:
            raise PlyError(f"{path}: line {lineno}: unknown header keyword {key!r}")
    if fmt is None:
        raise PlyError(f"{path}: header has no format line")
    return fmt, elements


def _read_ascii(f, elements, path):
    lines = f.read().decode("ascii", errors="replace").splitlines()
    lines = [ln for ln in lines if ln.strip()]
    pos = 0
    out = {}
    for el in elements:
        rows = lines[pos:pos + el.count]
        if len(rows) < el.count:
            raise PlyError(f"{path}: element {el.name!r} expects {el.count} rows, file has {len(rows)}")
        pos += el.count
        if el.name != "vertex":
            continue
        names = [n for n, _ in el.props]
        table = {n: [] for n in names}
        for i, row in enumerate(rows):
            words = row.split()
            k = 0
            for name, typ in el.props:
                if isinstance(typ, tuple):
                    cnt = int(words[k])
                    k += 1 + cnt
                    continue
                if k >= len(words):
                    raise PlyError(f"{path}: vertex {i}: missing value for property {name!r}")
                table[name].append(words[k])
                k += 1
        for name, typ in el.props:
            if not isinstance(typ, tuple):
                try:
                    out[name] = np.array(table[name], dtype=np.float64).astype(typ)
                except ValueError as exc:
                    raise PlyError(f"{path}: bad value for vertex property {name!r}: {exc}") from None
    return out


def _read_binary(f, elements, order, path):
    out = {}
    for el in elements:
        if not el.has_lists:
            dt = np.dtype([(n, order + t) for n, t in el.props])
            nbytes = dt.itemsize * el.count
            buf = f.read(nbytes)
            if len(buf) < nbytes:
                raise PlyError(f"{path}: truncated data in element {el.name!r}")
            if el.name == "vertex":
                arr = np.frombuffer(buf, dtype=dt, count=el.count)
                for n, _ in el.props:
                    out[n] = arr[n].astype(arr[n].dtype.newbyteorder("="))
            continue
        # rows with list properties have variable size
        scalars = {n: [] for n, t in el.props if not isinstance(t, tuple)}
        for _ in range(el.count):
            for name, typ in el.props:
                if isinstance(typ, tuple):
                    cdt, idt = np.dtype(order + typ[0]), np.dtype(order + typ[1])
                    cnt = int(np.frombuffer(f.read(cdt.itemsize), dtype=cdt)[0])
                    f.read(cnt * idt.itemsize)
                else:
                    dt = np.dtype(order + typ)
                    b = f.read(dt.itemsize)
                    if len(b) < dt.itemsize:
                        raise PlyError(f"{path}: truncated data in element {el.name!r}")
                    scalars[name].append(np.frombuffer(b, dtype=dt)[0])
        if el.name == "vertex":
            for n, t in el.props:
                if not isinstance(t, tuple):
                    out[n] = np.array(scalars[n], dtype=t)
    return out


def load_ply(path):
    """Read a point cloud from a PLY file.

    Normals are loaded when ``nx, ny, nz`` are present and colors when
    ``red, green, blue`` are present (uchar values are divided by 255).
    """
    path = os.fspath(path)
    with open(path, "rb") as f:
        fmt, elements = _parse_header(f, path)
        vertex = [el for el in elements if el.name == "vertex"]
        if not vertex:
            raise PlyError(f"{path}: no 'vertex' element in header")
        props = {n for n, _ in vertex[0].props}
        for axis in "xyz":
            if axis not in props:
                raise PlyError(f"{path}: vertex element lacks property {axis!r}")
        if fmt == "ascii":
            data = _read_ascii(f, elements, path)
        else:
            data = _read_binary(f, elements, _FORMATS[fmt], path)

    def stack(names):
        return np.stack([data[n].astype(np.float64) for n in names], axis=1)

    n = vertex[0].count
    points = stack("xyz") if n else np.empty((0, 3))
    normals = None
    if {"nx", "ny", "nz"} <= props:
        normals = stack(["nx", "ny", "nz"]) if n else np.empty((0, 3))
        lengths = np.linalg.norm(normals, axis=1)
        ok = lengths > 0
        # float32 storage perturbs unit length slightly
        off = ok & (np.abs(lengths - 1.0) > 1e-6)
        normals[off] /= lengths[off, None]
    colors = None
    if {"red", "green", "blue"} <= props:
        raw = [data[c] for c in ("red", "green", "blue")]
        colors = np.stack([r.astype(np.float64) for r in raw], axis=1) if n else np.empty((0, 3))
        if np.issubdtype(raw[0].dtype, np.integer):
            colors = colors / float(np.iinfo(raw[0].dtype).max)
    return PointCloud(points, normals, colors)


def _header(fmt, n, with_normals, with_colors, extra=()):
    lines = ["ply", f"format {fmt} 1.0", f"element vertex {n}",
             "property float x", "property float y", "property float z"]
    if with_normals:
        lines += ["property float nx", "property float ny", "property float nz"]
    if with_colors:
        lines += ["property uchar red", "property uchar green", "property uchar blue"]
    lines += list(extra)
    lines.append("end_header")
    return ("\n".join(lines) + "\n").encode("ascii")


def _vertex_table(cloud):
    n = len(cloud)
    fields = [("x", "f4"), ("y", "f4"), ("z", "f4")]
    if cloud.has_normals:
        fields += [("nx", "f4"), ("ny", "f4"), ("nz", "f4")]
    if cloud.has_colors:
        fields += [("red", "u1"), ("green", "u1"), ("blue", "u1")]
    table = np.empty(n, dtype=np.dtype([(k, "<" + t) for k, t in fields]))
    for i, k in enumerate("xyz"):
        table[k] = cloud.points[:, i]
    if cloud.has_normals:
        for i, k in enumerate(("nx", "ny", "nz")):
            table[k] = cloud.normals[:, i]
    if cloud.has_colors:
        col = np.clip(np.floor(cloud.colors * 255.0 + 0.5), 0, 255).astype(np.uint8)
        for i, k in enumerate(("red", "green", "blue")):
            table[k] = col[:, i]
    return table


def _ascii_rows(table):
    names = table.dtype.names
    floats = [np.dtype(table.dtype[k]).kind == "f" for k in names]
    rows = []
    for rec in table:
        rows.append(" ".join(("%.9g" % v) if isf else str(int(v)) for v, isf in zip(rec, floats)))
    return rows


def save_ply(cloud, path, format="binary_little_endian", faces=None):
    """Write a 3-D cloud to PLY.

    ``faces`` optionally holds triangle index triples written as a
    ``face`` element (used for polytope export).
    """
    if cloud.dim != 3:
        raise ValueError(f"save_ply requires a 3-D cloud, got dimension {cloud.dim}")
    if format not in ("ascii", "binary_little_endian"):
        raise ValueError(f"unsupported PLY format {format!r}")
    faces = None if faces is None else np.asarray(faces, dtype=np.int32).reshape(-1, 3)
    extra = ()
    if faces is not None:
        extra = (f"element face {len(faces)}", "property list uchar int vertex_indices")
    table = _vertex_table(cloud)
    header = _header(format, len(cloud), cloud.has_normals, cloud.has_colors, extra)
    with open(os.fspath(path), "wb") as f:
        f.write(header)
        if format == "ascii":
            rows = _ascii_rows(table)
            if faces is not None:
                rows += ["3 %d %d %d" % tuple(face) for face in faces]
            if rows:
                f.write(("\n".join(rows) + "\n").encode("ascii"))
        else:
            f.write(table.tobytes())
            if faces is not None:
                ftab = np.empty(len(faces), dtype=[("n", "u1"), ("i", "<i4", (3,))])
                ftab["n"] = 3
                ftab["i"] = faces
                f.write(ftab.tobytes())
