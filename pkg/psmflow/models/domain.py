"""Simulation domain description and per-step reports."""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from psmflow.models.stencil import CS2

FACES = ("x-", "x+", "y-", "y+", "z-", "z+")


class BoundaryKind(str, Enum):
    """Boundary treatment of one domain face."""

    PERIODIC = "periodic"
    WALL = "wall"
    VELOCITY = "velocity"
    PRESSURE = "pressure"


@dataclass(frozen=True)
class FaceBoundary:
    """Boundary condition on a single face.

    Attributes:
        kind: Treatment of the face.
        velocity: Wall or inflow velocity in lattice units (VELOCITY only).
        density: Outflow density in lattice units (PRESSURE only).
    """

    kind: BoundaryKind = BoundaryKind.PERIODIC
    velocity: tuple[float, float, float] = (0.0, 0.0, 0.0)
    density: float = 1.0

    @property
    def is_periodic(self) -> bool:
        return self.kind is BoundaryKind.PERIODIC


def face_axis(face: str) -> tuple[int, int]:
    """(axis, side) of a face name, side -1 for the low face and +1 for the high one."""
    return "xyz".index(face[0]), (-1 if face[1] == "-" else 1)


@dataclass
class Domain:
    """Uniform grid with its physical scales and face boundaries.

    Attributes:
        dims: Cell counts (nx, ny, nz); nz == 1 for 2D.
        dx: Cell size in meters.
        dt: Time step in seconds.
        rho_f: Fluid density in kg/m^3.
        nu: Kinematic viscosity in m^2/s.
        faces: Boundary per face name (see ``FACES``); missing faces are periodic.
    """

    dims: tuple[int, int, int]
    dx: float
    dt: float
    rho_f: float
    nu: float
    faces: dict[str, FaceBoundary] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.dims = tuple(int(d) for d in self.dims)  # type: ignore[assignment]
        for name in FACES:
            self.faces.setdefault(name, FaceBoundary())

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.dims))

    @property
    def nu_lattice(self) -> float:
        return self.nu * self.dt / self.dx**2

    @property
    def tau(self) -> float:
        """Relaxation time from tau = nu_lattice / cs2 + 1/2."""
        return self.nu_lattice / CS2 + 0.5

    @property
    def periodic(self) -> tuple[bool, bool, bool]:
        """Per-axis periodicity (both faces of an axis must agree)."""
        return tuple(  # type: ignore[return-value]
            self.faces[f"{a}-"].is_periodic and self.faces[f"{a}+"].is_periodic for a in "xyz"
        )

    @property
    def is_closed(self) -> bool:
        """True when no face lets mass in or out."""
        return all(
            b.kind in (BoundaryKind.PERIODIC, BoundaryKind.WALL) for b in self.faces.values()
        )


@dataclass
class BodyLoad:
    """Hydrodynamic load on one body in SI units."""

    body: str
    force: np.ndarray
    torque: np.ndarray


@dataclass
class StepReport:
    """Summary of one completed time step.

    Attributes:
        step: Index of the completed step (1 after the first step).
        time: Simulated time in seconds.
        mass: Total lattice mass after the step.
        max_speed: Largest lattice velocity magnitude seen by the kernel.
        loads: Hydrodynamic force and torque per body.
        phase_ns: Wall-clock nanoseconds per pipeline phase, in execution order.
    """

    step: int
    time: float
    mass: float
    max_speed: float
    loads: list[BodyLoad] = field(default_factory=list)
    phase_ns: dict[str, int] = field(default_factory=dict)

    def is_finite(self) -> bool:
        values = [self.mass, self.max_speed]
        for load in self.loads:
            values.extend(load.force.tolist())
            values.extend(load.torque.tolist())
        return bool(np.all(np.isfinite(values)))
