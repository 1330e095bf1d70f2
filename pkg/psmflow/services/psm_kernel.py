"""Fused PSM collide-and-stream kernel.

One call advances every cell by

    f_i(x + c_i, t + 1) = f_i(x, t) + (1 - B) Omega_i^F + B Omega_i^S

reading only ``pdf.read`` and writing only ``pdf.write``. The kernel collides
each slab and pushes the post-collision values to their destination cells.
Populations that would leave the domain through a non-periodic face are
stored in the opposite direction of the source cell (raw half-way
bounce-back); :mod:`psmflow.services.boundaries` then adds the face-specific
corrections.

Cells with B = 0 take the plain LBM path, so with no covered cells the result
is value-for-value the plain LBM step.
"""

import itertools
import logging
from dataclasses import dataclass

import numpy as np

from psmflow.models.fields import (
    Coverage,
    FractionField,
    InvalidStateError,
    MacroscopicFields,
    ObjectVelocityField,
    PdfField,
    RelaxationParams,
    cell_of,
    flat_cells,
    linear_index,
)
from psmflow.models.stencil import Stencil
from psmflow.services.lattice import (
    FluidCollision,
    SolidCollision,
    equilibrium_unchecked,
    guo_source,
    macroscopic,
    solid_collision,
    srt_term,
    trt_term,
)
from psmflow.utils.parallel import Slab, WorkerPool

logger = logging.getLogger(__name__)

# (source slice in slab coordinates, destination slice or None, source slice in global coordinates)
AxisMove = tuple[slice, slice | None, slice]


@dataclass(frozen=True)
class KernelConfig:
    """Numerical choices for the fused kernel.

    Attributes:
        relaxation: Relaxation time parameters.
        variant: Solid collision operator.
        collision: Fluid collision operator.
        periodic: Periodicity of the x, y and z axes.
        force: Uniform body force density in lattice units, or None.
    """

    relaxation: RelaxationParams
    variant: SolidCollision = SolidCollision.SC2
    collision: FluidCollision = FluidCollision.SRT
    periodic: tuple[bool, bool, bool] = (True, True, True)
    force: tuple[float, float, float] | None = None


def coverage_from_fields(fraction: FractionField, velocity: ObjectVelocityField) -> Coverage:
    """Build a coverage list from every cell with B > 0."""
    flat_b = flat_cells(fraction.B)
    index = np.flatnonzero(flat_b > 0.0).astype(np.int64)
    return Coverage(
        index=index,
        epsilon=flat_b[index].copy(),
        fraction=flat_b[index].copy(),
        body_id=flat_cells(velocity.body_id)[index].copy(),
    )


def _axis_moves(n: int, start: int, length: int, c: int, periodic: bool) -> list[AxisMove]:
    """Source/destination ranges along one axis for a shift by ``c``."""
    if c == 0:
        return [(slice(0, length), slice(start, start + length), slice(start, start + length))]

    moves: list[AxisMove] = []
    lo = max(0, -c - start)
    hi = min(length, n - c - start)
    if hi > lo:
        moves.append(
            (slice(lo, hi), slice(start + lo + c, start + hi + c), slice(start + lo, start + hi))
        )
    for s_lo, s_hi in ((0, min(lo, length)), (max(hi, 0), length)):
        if s_hi <= s_lo:
            continue
        src_global = slice(start + s_lo, start + s_hi)
        if periodic:
            d0 = (start + s_lo + c) % n
            moves.append((slice(s_lo, s_hi), slice(d0, d0 + s_hi - s_lo), src_global))
        else:
            moves.append((slice(s_lo, s_hi), None, src_global))
    return moves


def push_stream(
    post: np.ndarray,
    write: np.ndarray,
    slab: Slab,
    stencil: Stencil,
    periodic: tuple[bool, bool, bool],
) -> None:
    """Push a slab of post-collision PDFs into the write buffer."""
    dims = write.shape[1:]
    extents = [(0, dims[a]) for a in range(3)]
    extents[slab.axis] = (slab.start, slab.length)

    for i in range(stencil.q):
        per_axis = [
            _axis_moves(dims[a], extents[a][0], extents[a][1], int(stencil.c[i, a]), periodic[a])
            for a in range(3)
        ]
        ib = int(stencil.opposite[i])
        for mx, my, mz in itertools.product(*per_axis):
            src = (mx[0], my[0], mz[0])
            if mx[1] is None or my[1] is None or mz[1] is None:
                write[ib][mx[2], my[2], mz[2]] = post[i][src]
            else:
                write[i][mx[1], my[1], mz[1]] = post[i][src]


def _collide_slab(
    f: np.ndarray,
    slab: Slab,
    dims: tuple[int, int, int],
    fraction: FractionField,
    velocity: ObjectVelocityField,
    coverage: Coverage,
    cov_range: tuple[int, int],
    config: KernelConfig,
    stencil: Stencil,
    macro: MacroscopicFields | None,
) -> tuple[np.ndarray, np.ndarray]:
    """Collide one slab; returns (post-collision PDFs, Omega^S rows of its covered cells)."""
    force = None if config.force is None else np.asarray(config.force, dtype=np.float64)
    tau = config.relaxation.tau
    try:
        rho, u = macroscopic(f, stencil, force=force)
    except InvalidStateError as exc:
        if exc.cell is None or len(exc.cell) != 3:
            raise
        cell = list(exc.cell)
        cell[slab.axis] += slab.start
        raise InvalidStateError(exc.reason, cell=tuple(cell)) from exc  # type: ignore[arg-type]

    if macro is not None:
        sel = slab.cell_slices()
        macro.rho[sel] = rho
        macro.u[(slice(None), *sel)] = u

    feq = equilibrium_unchecked(u, rho, stencil)
    omega_minus = None
    if config.collision is FluidCollision.TRT:
        omega_f = trt_term(f, feq, config.relaxation, stencil)
        omega_minus = config.relaxation.omega_minus
    else:
        omega_f = srt_term(f, feq, tau)
    if force is not None:
        omega_f += guo_source(u, force, tau, stencil, omega_minus)
    post = f + omega_f

    k0, k1 = cov_range
    if k1 == k0:
        return post, np.zeros((0, stencil.q))

    gx, gy, gz = cell_of(coverage.index[k0:k1], dims)
    local = [gx, gy, gz]
    local[slab.axis] = local[slab.axis] - slab.start
    lx, ly, lz = local

    f_c = f[:, lx, ly, lz]
    b_c = fraction.B[gx, gy, gz]
    us_c = velocity.u_s[:, gx, gy, gz]
    omega_s = solid_collision(
        config.variant,
        f_c,
        rho[lx, ly, lz],
        u[:, lx, ly, lz],
        us_c,
        tau,
        stencil,
        feq_fluid=feq[:, lx, ly, lz],
    )
    post[:, lx, ly, lz] = f_c + (1.0 - b_c) * omega_f[:, lx, ly, lz] + b_c * omega_s
    return post, omega_s.T


def psm_stream_collide(
    pdf: PdfField,
    fraction: FractionField,
    velocity: ObjectVelocityField,
    coverage: Coverage,
    config: KernelConfig,
    pool: WorkerPool | None = None,
    macro: MacroscopicFields | None = None,
) -> np.ndarray:
    """Advance all cells by one fused PSM collide-and-stream step.

    Args:
        pdf: Double-buffered PDFs; ``read`` is consumed and ``write`` filled.
            Buffers are not swapped here.
        fraction: Solid fraction field B.
        velocity: Solid velocity field u_s (lattice units).
        coverage: Covered cells, sorted by linear index. Cells outside the
            list are treated as B = 0.
        config: Kernel configuration.
        pool: Worker pool; defaults to single-threaded execution.
        macro: If given, receives the pre-collision density and velocity.

    Returns:
        Omega^S for every covered cell, shape (len(coverage), q), in coverage
        order. Feed it to the force and torque reductions.

    Raises:
        InvalidStateError: If a cell has non-positive or non-finite density.
    """
    if pdf.read is pdf.write:
        raise ValueError("read and write buffers must be distinct")
    stencil = pdf.stencil
    dims = pdf.dims
    pool = pool or WorkerPool(1)
    slabs = pool.slabs(dims)

    stride = 1
    for a in range(slabs[0].axis):
        stride *= dims[a]
    bounds = np.searchsorted(
        coverage.index, [s.start * stride for s in slabs] + [slabs[-1].stop * stride]
    )
    omega_s = np.zeros((len(coverage), stencil.q))

    def work(k: int) -> None:
        slab = slabs[k]
        f = pdf.read[(slice(None), *slab.cell_slices())]
        k0, k1 = int(bounds[k]), int(bounds[k + 1])
        post, rows = _collide_slab(
            f, slab, dims, fraction, velocity, coverage, (k0, k1), config, stencil, macro
        )
        omega_s[k0:k1] = rows
        push_stream(post, pdf.write, slab, stencil, config.periodic)

    pool.map(work, range(len(slabs)))
    return omega_s


def covered_cell_centers(coverage: Coverage, dims: tuple[int, int, int]) -> np.ndarray:
    """Lattice coordinates of covered cell centers, shape (n, 3).

    Cell (i, j, k) spans [i, i + 1) x [j, j + 1) x [k, k + 1), so its center
    sits at half-integer coordinates.
    """
    x, y, z = cell_of(coverage.index, dims)
    return np.stack([x, y, z], axis=1).astype(np.float64) + 0.5


def cells_to_index(cells: np.ndarray, dims: tuple[int, int, int]) -> np.ndarray:
    """Linear indices for an (n, 3) integer array of cells."""
    return linear_index(cells[:, 0], cells[:, 1], cells[:, 2], dims)
