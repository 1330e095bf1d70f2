"""Field containers for the lattice state.

All cell arrays are indexed ``[x, y, z]`` but laid out x-fastest in memory
(structure of arrays per direction), so a slab ``[..., z0:z1]`` is one
contiguous block. Linear cell indices use the same x-fastest order.
"""

from dataclasses import dataclass, field

import numpy as np

from psmflow.models.stencil import CS2, Stencil

Dims = tuple[int, int, int]


class InvalidStateError(Exception):
    """Raised when the lattice state is physically invalid.

    Attributes:
        cell: (x, y, z) index of the first offending cell, if known.
        step: Time step index, filled in by the engine.
        reason: Short description ("non-positive density", "non-finite PDF").
    """

    def __init__(
        self,
        reason: str,
        cell: tuple[int, int, int] | None = None,
        step: int | None = None,
    ) -> None:
        self.reason = reason
        self.cell = cell
        self.step = step
        super().__init__(self._render())

    def _render(self) -> str:
        msg = self.reason
        if self.cell is not None:
            msg += f" at cell {self.cell}"
        if self.step is not None:
            msg += f" (step {self.step})"
        return msg

    def at_step(self, step: int) -> "InvalidStateError":
        """Return a copy of this error tagged with the step index."""
        return InvalidStateError(self.reason, cell=self.cell, step=step)


def allocate_cells(dims: Dims, leading: tuple[int, ...] = (), dtype=np.float64) -> np.ndarray:
    """Allocate a zeroed cell array indexed ``[*leading, x, y, z]``, x-fastest."""
    nx, ny, nz = dims
    raw = np.zeros((*leading, nz, ny, nx), dtype=dtype)
    n_lead = len(leading)
    return raw.transpose(*range(n_lead), n_lead + 2, n_lead + 1, n_lead)


def linear_index(x: np.ndarray, y: np.ndarray, z: np.ndarray, dims: Dims) -> np.ndarray:
    """x-fastest linear cell index."""
    return np.ravel_multi_index((x, y, z), dims, order="F")


def cell_of(index: int | np.ndarray, dims: Dims) -> tuple:
    """Inverse of :func:`linear_index`."""
    return np.unravel_index(index, dims, order="F")


def flat_cells(a: np.ndarray) -> np.ndarray:
    """Flat x-fastest view of a cell array allocated by :func:`allocate_cells`."""
    view = a.reshape(-1, order="F")
    if not np.shares_memory(view, a):
        raise ValueError("cell array is not x-fastest; a flat view would copy")
    return view


def first_bad_cell(mask: np.ndarray) -> tuple[int, int, int]:
    """(x, y, z) of the lowest linear index where ``mask`` is set."""
    flat = np.flatnonzero(mask.ravel(order="F"))
    x, y, z = cell_of(int(flat[0]), mask.shape)
    return int(x), int(y), int(z)


class PdfField:
    """Double-buffered distribution functions on a uniform grid.

    A time step reads only from ``read`` and writes only to ``write``;
    :meth:`swap` exchanges the two afterwards.
    """

    def __init__(self, stencil: Stencil, dims: Dims) -> None:
        self.stencil = stencil
        self.dims: Dims = tuple(int(d) for d in dims)  # type: ignore[assignment]
        if stencil.dim == 2 and self.dims[2] != 1:
            raise ValueError(f"{stencil.name} requires nz == 1, got dims {self.dims}")
        self.read = allocate_cells(self.dims, (stencil.q,))
        self.write = allocate_cells(self.dims, (stencil.q,))

    @property
    def n_cells(self) -> int:
        nx, ny, nz = self.dims
        return nx * ny * nz

    def swap(self) -> None:
        """Exchange read and write buffers."""
        self.read, self.write = self.write, self.read

    def load(self, values: np.ndarray) -> None:
        """Copy ``values`` (shape (q, nx, ny, nz)) into the read buffer."""
        self.read[...] = values

    def total_mass(self) -> float:
        """Sum of all PDFs in the read buffer."""
        return float(np.sum(self.read, dtype=np.float64))

    def check_finite(self) -> None:
        """Raise InvalidStateError if any PDF in the read buffer is NaN/Inf."""
        finite = np.isfinite(self.read).all(axis=0)
        if not finite.all():
            raise InvalidStateError("non-finite PDF", cell=first_bad_cell(~finite))


@dataclass
class MacroscopicFields:
    """Density and velocity per cell (lattice units).

    Attributes:
        rho: Density, shape (nx, ny, nz).
        u: Velocity, shape (3, nx, ny, nz); the z component is zero in 2D.
    """

    rho: np.ndarray
    u: np.ndarray

    @classmethod
    def zeros(cls, dims: Dims) -> "MacroscopicFields":
        return cls(rho=allocate_cells(dims), u=allocate_cells(dims, (3,)))

    def max_speed(self) -> float:
        return float(np.sqrt(np.max(np.sum(self.u * self.u, axis=0))))


@dataclass
class Coverage:
    """Cells touched by one or more bodies at the current step.

    Attributes:
        index: Sorted x-fastest linear indices of cells with epsilon > 0.
        epsilon: Geometric overlap fraction per covered cell.
        fraction: Solid fraction B per covered cell (after weighting).
        body_id: Index of the body owning each covered cell.
    """

    index: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    epsilon: np.ndarray = field(default_factory=lambda: np.zeros(0))
    fraction: np.ndarray = field(default_factory=lambda: np.zeros(0))
    body_id: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int32))

    def __len__(self) -> int:
        return int(self.index.size)

    def for_body(self, body_id: int) -> "Coverage":
        keep = self.body_id == body_id
        return Coverage(
            index=self.index[keep],
            epsilon=self.epsilon[keep],
            fraction=self.fraction[keep],
            body_id=self.body_id[keep],
        )


class FractionField:
    """Solid fraction B(x, t) in [0, 1] for every cell."""

    def __init__(self, dims: Dims) -> None:
        self.dims = dims
        self.B = allocate_cells(dims)

    def clear(self, coverage: Coverage) -> None:
        """Zero the cells listed in ``coverage`` (the previous step's cover)."""
        flat_cells(self.B)[coverage.index] = 0.0

    def scatter(self, coverage: Coverage) -> None:
        flat_cells(self.B)[coverage.index] = coverage.fraction

    def is_valid(self) -> bool:
        return bool(np.all((self.B >= 0.0) & (self.B <= 1.0)))


class ObjectVelocityField:
    """Solid velocity u_s per cell and the id of the covering body.

    Only read where B > 0; elsewhere the velocity is kept at zero and the
    body id at -1.
    """

    def __init__(self, dims: Dims) -> None:
        self.dims = dims
        self.u_s = allocate_cells(dims, (3,))
        self.body_id = allocate_cells(dims, dtype=np.int32)
        self.body_id[...] = -1

    def clear(self, coverage: Coverage) -> None:
        for a in range(3):
            flat_cells(self.u_s[a])[coverage.index] = 0.0
        flat_cells(self.body_id)[coverage.index] = -1

    def scatter(self, coverage: Coverage, velocities: np.ndarray) -> None:
        """Write per-covered-cell velocities, shape (n, 3)."""
        for a in range(3):
            flat_cells(self.u_s[a])[coverage.index] = velocities[:, a]
        flat_cells(self.body_id)[coverage.index] = coverage.body_id


@dataclass(frozen=True)
class RelaxationParams:
    """Relaxation time and the quantities derived from it.

    Attributes:
        tau: Relaxation time in lattice units, strictly above 1/2.
        magic: TRT magic parameter Lambda (only used by the TRT operator).
    """

    tau: float
    magic: float = 3.0 / 16.0

    def __post_init__(self) -> None:
        if not self.tau > 0.5:
            raise ValueError(f"relaxation time tau={self.tau} must exceed 0.5")

    @property
    def omega(self) -> float:
        return 1.0 / self.tau

    @property
    def viscosity(self) -> float:
        """Lattice kinematic viscosity cs2 * (tau - 1/2)."""
        return CS2 * (self.tau - 0.5)

    @property
    def omega_minus(self) -> float:
        """Relaxation rate of the antisymmetric part for TRT."""
        return 1.0 / (self.magic / (self.tau - 0.5) + 0.5)

    @classmethod
    def from_viscosity(cls, nu_lattice: float) -> "RelaxationParams":
        return cls(tau=nu_lattice / CS2 + 0.5)
