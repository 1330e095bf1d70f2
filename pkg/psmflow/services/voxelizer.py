"""One-shot voxelization of a mesh into a super-sampled geometry field.

Every geometry cell center is classified by ray parity: for each (x, y)
column a ray is cast along +z, its crossings with the triangles are sorted
into the column, and the inside/outside state toggles at each crossing.
Columns run slightly off the cell centers so that rays do not graze mesh
edges on regular grids; a column whose ray still passes within 1e-9
(barycentric) of an edge or vertex, or that collects an odd number of
crossings, is recast with a different offset.

Every ray keeps the +z direction; only its (x, y) foot moves. Shifting the
ray instead of tilting it classifies a point displaced sideways from the cell
center by the offset, under 5e-3 of the geometry spacing. The answer
differs from the center's only where the surface passes between the two
points, which changes the inside count by a share of a sub-sample far below
the sub-sampling error itself. A tilted ray through the exact center would
meet the same degenerate cases on the tilted mesh and need the same recasts.

Because only the crossing count matters, flipping every face orientation
does not change the result.
"""

import logging
import os
from pathlib import Path

import numpy as np

from psmflow.config import settings
from psmflow.models.mesh import GeometryField, TriangleMesh
from psmflow.services.mesh_io import check_topology

logger = logging.getLogger(__name__)

EDGE_TOLERANCE = 1e-9

# column offsets as fractions of the geometry spacing, tried in order
RAY_OFFSETS = (
    (np.sqrt(2.0) * 1e-6, np.sqrt(3.0) * 1e-6),
    (np.sqrt(5.0) * 1e-4, -np.sqrt(7.0) * 1e-4),
    (-np.sqrt(11.0) * 1e-3, np.sqrt(13.0) * 1e-3),
)

PAIRS_PER_CHUNK = 1 << 22

CACHE_MAGIC = b"PSMG"
CACHE_VERSION = 1
CACHE_HEADER = np.dtype(
    [
        ("magic", "S4"),
        ("version", "<u2"),
        ("s", "<u2"),
        ("dx", "<f8"),
        ("spacing", "<f8"),
        ("origin", "<f8", (3,)),
        ("extents", "<u4", (3,)),
    ]
)


class VoxelizationError(Exception):
    """Base exception for voxelization failures."""

    pass


class GeometryResourceError(VoxelizationError):
    """Raised when a geometry field would exceed the memory cap."""

    def __init__(self, required: int, cap: int) -> None:
        self.required = required
        self.cap = cap
        super().__init__(
            f"geometry field needs about {required} bytes, above the cap of {cap} bytes"
        )


class GeometryCacheError(VoxelizationError):
    """Raised when a geometry cache file is missing, corrupt or incompatible."""

    pass


def field_layout(
    mesh: TriangleMesh, dx_lbm: float, s: int, pad: int = 2
) -> tuple[np.ndarray, tuple[int, int, int]]:
    """Origin and extents of the geometry field covering ``mesh``.

    The field spans the mesh bounding box grown by ``pad`` LBM cells and
    snapped outward to whole LBM cells.
    """
    lo, hi = mesh.bounds
    cell_lo = np.floor(lo / dx_lbm - pad)
    cell_hi = np.ceil(hi / dx_lbm + pad)
    origin = cell_lo * dx_lbm
    extents = ((cell_hi - cell_lo).astype(np.int64) << s).tolist()
    return origin, (int(extents[0]), int(extents[1]), int(extents[2]))


def estimate_bytes(extents: tuple[int, int, int]) -> int:
    """Peak working memory of :func:`voxelize` for a field of ``extents``."""
    nx, ny, nz = extents
    # toggle counts (one extra layer) plus the occupancy bits
    return nx * ny * (nz + 1) + nx * ny * nz


def _column_pairs(
    tri: np.ndarray, origin: np.ndarray, spacing: float, shape: tuple[int, int], offset: np.ndarray
):
    """Yield (triangle ids, column i, column j) for triangles whose xy box covers a column."""
    lo = (tri[:, :, :2].min(axis=1) - origin[:2]) / spacing - 0.5 - offset
    hi = (tri[:, :, :2].max(axis=1) - origin[:2]) / spacing - 0.5 - offset
    i0 = np.clip(np.ceil(lo[:, 0]), 0, shape[0]).astype(np.int64)
    i1 = np.clip(np.floor(hi[:, 0]) + 1, 0, shape[0]).astype(np.int64)
    j0 = np.clip(np.ceil(lo[:, 1]), 0, shape[1]).astype(np.int64)
    j1 = np.clip(np.floor(hi[:, 1]) + 1, 0, shape[1]).astype(np.int64)
    wx = np.maximum(i1 - i0, 0)
    counts = wx * np.maximum(j1 - j0, 0)

    cum = np.cumsum(counts)
    start = 0
    while start < len(tri):
        base = int(cum[start - 1]) if start else 0
        stop = max(start + 1, int(np.searchsorted(cum, base + PAIRS_PER_CHUNK, side="right")))
        ids = np.arange(start, stop)
        n = counts[start:stop]
        t = np.repeat(ids, n)
        if t.size:
            first = np.repeat(np.cumsum(n) - n, n)
            local = np.arange(t.size) - first
            yield t, i0[t] + local % wx[t], j0[t] + local // wx[t]
        start = stop


def _cast(
    tri: np.ndarray,
    origin: np.ndarray,
    spacing: float,
    shape: tuple[int, int],
    offset: np.ndarray,
    columns: np.ndarray | None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Cast rays for all (or the selected) columns.

    Returns:
        Tuple (i, j, z, degenerate) of crossing columns and heights plus a
        boolean (nx, ny) mask of columns whose ray is unreliable.
    """
    hits_i, hits_j, hits_z = [], [], []
    degenerate = np.zeros(shape, dtype=bool)
    for t, i, j in _column_pairs(tri, origin, spacing, shape, offset):
        if columns is not None:
            keep = columns[i, j]
            t, i, j = t[keep], i[keep], j[keep]
            if t.size == 0:
                continue
        px = origin[0] + (i + 0.5 + offset[0]) * spacing
        py = origin[1] + (j + 0.5 + offset[1]) * spacing
        a, b, c = tri[t, 0], tri[t, 1], tri[t, 2]
        det = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])
        flat = det == 0.0
        det = np.where(flat, 1.0, det)
        la = ((b[:, 0] - px) * (c[:, 1] - py) - (b[:, 1] - py) * (c[:, 0] - px)) / det
        lb = ((c[:, 0] - px) * (a[:, 1] - py) - (c[:, 1] - py) * (a[:, 0] - px)) / det
        lc = 1.0 - la - lb
        low = np.minimum(np.minimum(la, lb), lc)
        near = ~flat & (np.abs(low) <= EDGE_TOLERANCE)
        degenerate[i[near], j[near]] = True
        hit = ~flat & (low > EDGE_TOLERANCE)
        hits_i.append(i[hit])
        hits_j.append(j[hit])
        hits_z.append(la[hit] * a[hit, 2] + lb[hit] * b[hit, 2] + lc[hit] * c[hit, 2])

    if hits_i:
        hi, hj, hz = np.concatenate(hits_i), np.concatenate(hits_j), np.concatenate(hits_z)
    else:
        hi = hj = np.zeros(0, dtype=np.int64)
        hz = np.zeros(0)
    counts = np.zeros(shape, dtype=np.int64)
    np.add.at(counts, (hi, hj), 1)
    degenerate |= (counts & 1).astype(bool)
    if columns is not None:
        degenerate &= columns
    return hi, hj, hz, degenerate


def voxelize(
    mesh: TriangleMesh,
    dx_lbm: float,
    s: int,
    pad: int = 2,
    strict: bool | None = None,
    memory_cap: int | None = None,
) -> GeometryField:
    """Voxelize a closed mesh onto a geometry field of spacing dx_lbm / 2**s.

    Args:
        mesh: Closed mesh in its body frame.
        dx_lbm: LBM cell size in meters.
        s: Super-sampling factor, >= 0.
        pad: Padding around the bounding box in LBM cells, >= 1.
        strict: Topology strictness, defaults to ``settings.STRICT_MESH``.
        memory_cap: Byte cap, defaults to ``settings.GEOMETRY_MEMORY_CAP_BYTES``.

    Returns:
        The geometry field.

    Raises:
        MeshTopologyError: If the mesh is not watertight in strict mode.
        GeometryResourceError: If the field would exceed the memory cap.
        ValueError: If ``s`` or ``pad`` is out of range.
    """
    if s < 0:
        raise ValueError(f"super-sampling factor must be >= 0, got {s}")
    if pad < 1:
        raise ValueError(f"padding must be at least one LBM cell, got {pad}")
    check_topology(mesh, strict=strict)

    origin, extents = field_layout(mesh, dx_lbm, s, pad)
    cap = settings.GEOMETRY_MEMORY_CAP_BYTES if memory_cap is None else memory_cap
    required = estimate_bytes(extents)
    if required > cap:
        raise GeometryResourceError(required, cap)

    spacing = dx_lbm / (1 << s)
    nx, ny, nz = extents
    tri = mesh.triangles

    toggles = np.zeros((nx, ny, nz + 1), dtype=np.uint8)
    columns: np.ndarray | None = None
    for attempt, offset in enumerate(RAY_OFFSETS):
        hi, hj, hz, degenerate = _cast(tri, origin, spacing, (nx, ny), np.asarray(offset), columns)
        last = attempt == len(RAY_OFFSETS) - 1
        accept = np.ones(hi.size, dtype=bool) if last else ~degenerate[hi, hj]
        k0 = np.ceil((hz[accept] - origin[2]) / spacing - 0.5).astype(np.int64)
        np.add.at(toggles, (hi[accept], hj[accept], np.clip(k0, 0, nz)), 1)
        if not degenerate.any():
            break
        if last:
            logger.warning(
                f"{int(degenerate.sum())} columns of {mesh.name!r} stayed ambiguous after "
                f"{len(RAY_OFFSETS)} ray offsets"
            )
            break
        logger.debug(f"Recasting {int(degenerate.sum())} ambiguous columns of {mesh.name!r}")
        columns = degenerate

    bits = np.bitwise_xor.accumulate(toggles & 1, axis=2)[:, :, :nz].astype(bool)
    geom = GeometryField(s=s, dx_lbm=dx_lbm, origin=origin, bits=bits)
    logger.info(
        f"Voxelized {mesh.name!r} at s={s}: extents {extents}, "
        f"{geom.inside_count} inside cells, volume {geom.volume:.6e} m^3"
    )
    return geom


def write_geometry_cache(geom: GeometryField, path: str | Path) -> None:
    """Store a geometry field; the file appears only once fully written."""
    path = Path(path)
    header = np.zeros(1, dtype=CACHE_HEADER)
    header["magic"] = CACHE_MAGIC
    header["version"] = CACHE_VERSION
    header["s"] = geom.s
    header["dx"] = geom.dx_lbm
    header["spacing"] = geom.spacing
    header["origin"] = geom.origin
    header["extents"] = geom.extents
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(header.tobytes())
        fh.write(np.packbits(geom.bits, axis=None).tobytes())
    os.replace(tmp, path)


def read_geometry_cache(path: str | Path) -> GeometryField:
    """Load a geometry field written by :func:`write_geometry_cache`.

    Raises:
        GeometryCacheError: If the file is unreadable or inconsistent.
    """
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise GeometryCacheError(f"cannot read geometry cache {path}: {exc}") from exc
    if len(data) < CACHE_HEADER.itemsize:
        raise GeometryCacheError(f"geometry cache {path} is truncated")
    header = np.frombuffer(data, dtype=CACHE_HEADER, count=1)[0]
    if bytes(header["magic"]) != CACHE_MAGIC:
        raise GeometryCacheError(f"{path} is not a geometry cache file")
    if int(header["version"]) != CACHE_VERSION:
        raise GeometryCacheError(
            f"geometry cache {path} has version {int(header['version'])}, expected {CACHE_VERSION}"
        )
    s = int(header["s"])
    dx = float(header["dx"])
    if float(header["spacing"]) != dx / (1 << s):
        raise GeometryCacheError(f"geometry cache {path} has inconsistent spacing")
    extents = tuple(int(n) for n in header["extents"])
    count = extents[0] * extents[1] * extents[2]
    packed = np.frombuffer(data, dtype=np.uint8, offset=CACHE_HEADER.itemsize)
    if packed.size != (count + 7) // 8:
        raise GeometryCacheError(f"geometry cache {path} has {packed.size} payload bytes")
    bits = np.unpackbits(packed, count=count).astype(bool).reshape(extents)
    return GeometryField(s=s, dx_lbm=dx, origin=np.array(header["origin"]), bits=bits)
