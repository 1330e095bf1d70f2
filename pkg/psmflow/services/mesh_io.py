"""Triangle mesh readers and writers.

Supported inputs are binary STL, ASCII STL and OBJ (``v``/``f`` records only).
Binary STL records are decoded with the record layout from numpy-stl, which
also writes binary STL. ASCII STL is parsed here rather than by numpy-stl:
its ASCII reader stops on a malformed record without the byte offset of the
line, and load errors must name that offset. OBJ is not read by numpy-stl at
all. Both text formats are tokenized line by line.

Duplicate STL vertices are welded (exact coordinate match) before the
topology check, so both the raw and the welded vertex count are known.
"""

import io
import logging
from pathlib import Path
from typing import BinaryIO

import numpy as np
from stl import Mode
from stl import mesh as stl_mesh

from psmflow.config import settings
from psmflow.models.mesh import TriangleMesh

logger = logging.getLogger(__name__)

STL_HEADER_BYTES = 80
STL_RECORD_BYTES = 50

MESH_FORMATS = ("stl-binary", "stl-ascii", "obj")


class MeshError(Exception):
    """Base exception for mesh loading errors."""

    pass


class MeshParseError(MeshError):
    """Raised when a mesh file cannot be parsed.

    Attributes:
        offset: Byte offset at which parsing failed.
    """

    def __init__(self, message: str, offset: int) -> None:
        self.offset = offset
        super().__init__(f"{message} (at byte {offset})")


class MeshTopologyError(MeshError):
    """Raised when a mesh is not a closed, consistently oriented surface.

    Attributes:
        edges: Offending vertex index pairs, shape (k, 2).
    """

    def __init__(self, message: str, edges: np.ndarray) -> None:
        self.edges = edges
        preview = ", ".join(f"({a}, {b})" for a, b in edges[:5].tolist())
        more = f" and {len(edges) - 5} more" if len(edges) > 5 else ""
        super().__init__(f"{message}: {preview}{more}")


def detect_format(data: bytes, name: str = "") -> str:
    """Guess the mesh format from the file name and contents."""
    suffix = Path(name).suffix.lower()
    if suffix == ".obj":
        return "obj"
    head = data[: STL_HEADER_BYTES + 4]
    if len(data) >= STL_HEADER_BYTES + 4:
        count = int(np.frombuffer(data, dtype="<u4", count=1, offset=STL_HEADER_BYTES)[0])
        if len(data) == STL_HEADER_BYTES + 4 + count * STL_RECORD_BYTES:
            return "stl-binary"
    if head.lstrip().lower().startswith(b"solid"):
        return "stl-ascii"
    return "stl-binary"


def weld(corners: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Merge bit-identical corner positions.

    Args:
        corners: Triangle corners, shape (m, 3, 3).

    Returns:
        Tuple (vertices, faces).
    """
    flat = corners.reshape(-1, 3)
    vertices, inverse = np.unique(flat, axis=0, return_inverse=True)
    return vertices, inverse.reshape(-1, 3)


def _parse_stl_binary(data: bytes) -> np.ndarray:
    if len(data) < STL_HEADER_BYTES + 4:
        raise MeshParseError("binary STL shorter than its header", len(data))
    count = int(np.frombuffer(data, dtype="<u4", count=1, offset=STL_HEADER_BYTES)[0])
    body = len(data) - STL_HEADER_BYTES - 4
    complete = body // STL_RECORD_BYTES
    if complete < count:
        offset = STL_HEADER_BYTES + 4 + complete * STL_RECORD_BYTES
        raise MeshParseError(
            f"binary STL declares {count} triangles but holds {complete} complete records",
            offset,
        )
    records = np.frombuffer(
        data, dtype=stl_mesh.Mesh.dtype, count=count, offset=STL_HEADER_BYTES + 4
    )
    return records["vectors"].astype(np.float64)


def _lines(data: bytes):
    """Yield (byte offset, stripped line) pairs."""
    offset = 0
    for raw in data.splitlines(keepends=True):
        yield offset, raw.strip()
        offset += len(raw)


def _floats(tokens: list[bytes], offset: int, what: str) -> list[float]:
    try:
        return [float(t) for t in tokens]
    except ValueError:
        raise MeshParseError(f"malformed {what} coordinates", offset) from None


def _parse_stl_ascii(data: bytes) -> np.ndarray:
    corners: list[list[float]] = []
    facet: list[list[float]] = []
    in_loop = False
    last = 0
    for offset, line in _lines(data):
        last = offset
        tokens = line.split()
        if not tokens:
            continue
        key = tokens[0].lower()
        if key == b"vertex":
            if not in_loop or len(tokens) != 4:
                raise MeshParseError("unexpected vertex record", offset)
            facet.append(_floats(tokens[1:], offset, "vertex"))
        elif key == b"outer":
            in_loop = True
            facet = []
        elif key == b"endloop":
            if len(facet) != 3:
                raise MeshParseError(f"facet has {len(facet)} vertices, expected 3", offset)
            corners.extend(facet)
            in_loop = False
        elif key in (b"solid", b"facet", b"endfacet", b"endsolid"):
            continue
        else:
            raise MeshParseError(f"unknown STL keyword {tokens[0]!r}", offset)
    if in_loop:
        raise MeshParseError("file ends inside a facet", last)
    return np.asarray(corners, dtype=np.float64).reshape(-1, 3, 3)


def _obj_index(token: bytes, n_vertices: int, offset: int) -> int:
    try:
        idx = int(token.split(b"/")[0])
    except ValueError:
        raise MeshParseError(f"malformed face index {token!r}", offset) from None
    idx = idx - 1 if idx > 0 else n_vertices + idx
    if not 0 <= idx < n_vertices:
        raise MeshParseError(f"face index {token!r} out of range", offset)
    return idx


def _parse_obj(data: bytes) -> tuple[np.ndarray, np.ndarray]:
    vertices: list[list[float]] = []
    faces: list[tuple[int, int, int]] = []
    for offset, line in _lines(data):
        tokens = line.split()
        if not tokens or tokens[0].startswith(b"#"):
            continue
        if tokens[0] == b"v":
            if len(tokens) < 4:
                raise MeshParseError("vertex record needs three coordinates", offset)
            vertices.append(_floats(tokens[1:4], offset, "vertex"))
        elif tokens[0] == b"f":
            if len(tokens) < 4:
                raise MeshParseError("face record needs at least three vertices", offset)
            idx = [_obj_index(t, len(vertices), offset) for t in tokens[1:]]
            # polygons become triangle fans
            for k in range(1, len(idx) - 1):
                faces.append((idx[0], idx[k], idx[k + 1]))
    return np.asarray(vertices, dtype=np.float64), np.asarray(faces, dtype=np.int64)


def check_topology(mesh: TriangleMesh, strict: bool | None = None) -> None:
    """Validate that every edge is shared by exactly two consistently oriented faces.

    Args:
        mesh: Mesh to check.
        strict: Raise instead of warning. Defaults to ``settings.STRICT_MESH``.

    Raises:
        MeshTopologyError: In strict mode, if the surface is open, non-manifold
            or inconsistently oriented.
    """
    strict = settings.STRICT_MESH if strict is None else strict
    problems = [
        ("non-manifold or open edges", mesh.boundary_edges()),
        ("inconsistently oriented edges", mesh.inconsistent_edges()),
    ]
    for label, edges in problems:
        if len(edges) == 0:
            continue
        if strict:
            raise MeshTopologyError(f"mesh {mesh.name!r} has {len(edges)} {label}", edges)
        logger.warning(f"Mesh {mesh.name!r} has {len(edges)} {label}; continuing")


def load_mesh(
    source: bytes | BinaryIO | str | Path,
    fmt: str | None = None,
    strict: bool | None = None,
    name: str | None = None,
) -> TriangleMesh:
    """Load and validate a triangle mesh.

    Args:
        source: Raw bytes, a binary stream or a file path.
        fmt: One of ``MESH_FORMATS``; detected from the name/contents if None.
        strict: Topology strictness, defaults to ``settings.STRICT_MESH``.
        name: Label for logs; defaults to the file name.

    Returns:
        The welded, topology-checked mesh.

    Raises:
        MeshParseError: If the file is malformed.
        MeshTopologyError: If the surface is not watertight in strict mode.
        ValueError: If ``fmt`` is not supported.
    """
    if isinstance(source, (str, Path)):
        path = Path(source)
        data = path.read_bytes()
        name = name or path.name
    elif isinstance(source, (bytes, bytearray)):
        data = bytes(source)
    else:
        data = source.read()
    name = name or "mesh"

    fmt = fmt or detect_format(data, name)
    if fmt not in MESH_FORMATS:
        raise ValueError(f"Unsupported mesh format {fmt!r}; choose one of {MESH_FORMATS}")

    if fmt == "obj":
        vertices, faces = _parse_obj(data)
        raw_count = len(vertices)
    else:
        corners = _parse_stl_binary(data) if fmt == "stl-binary" else _parse_stl_ascii(data)
        raw_count = corners.shape[0] * 3
        vertices, faces = weld(corners)

    degenerate = (
        (faces[:, 0] == faces[:, 1]) | (faces[:, 1] == faces[:, 2]) | (faces[:, 0] == faces[:, 2])
    )
    if degenerate.any():
        logger.warning(f"Dropping {int(degenerate.sum())} degenerate faces from {name!r}")
        faces = faces[~degenerate]

    mesh = TriangleMesh(vertices, faces, raw_vertex_count=raw_count, name=name)
    check_topology(mesh, strict=strict)
    logger.info(
        f"Loaded {name!r} ({fmt}): {mesh.n_faces} faces, "
        f"{mesh.n_vertices} vertices ({raw_count} before welding)"
    )
    return mesh


def save_stl(mesh: TriangleMesh, target: str | Path | BinaryIO) -> None:
    """Write ``mesh`` as a binary STL file."""
    out = stl_mesh.Mesh(np.zeros(mesh.n_faces, dtype=stl_mesh.Mesh.dtype))
    out.vectors[:] = mesh.triangles
    out.update_normals()
    if isinstance(target, (str, Path)):
        out.save(str(target), mode=Mode.BINARY)
    else:
        buffer = io.BytesIO()
        out.save(mesh.name, fh=buffer, mode=Mode.BINARY)
        target.write(buffer.getvalue())
