"""Scenario file schemas.

A scenario is one JSON document with the blocks ``domain``, ``bodies``,
``numerics``, ``output`` and ``execution``. Physical values are SI; lattice
quantities are derived from them when the simulation is built. Unknown keys
are rejected so that typos surface as errors with their key path.
"""

import math
from pathlib import Path
from typing import Annotated, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

from psmflow.models.domain import FACES, BoundaryKind
from psmflow.models.stencil import CS2
from psmflow.services.lattice import FluidCollision, FractionMode, SolidCollision

Vector = tuple[float, float, float]


class StrictModel(BaseModel):
    """Base model rejecting unknown keys."""

    model_config = ConfigDict(extra="forbid")


class BoundaryConfig(StrictModel):
    """Boundary condition of one face.

    Attributes:
        kind: periodic, wall, velocity or pressure.
        velocity: Inflow velocity in m/s (velocity faces).
        density: Outflow density in lattice units (pressure faces).
    """

    kind: BoundaryKind = BoundaryKind.PERIODIC
    velocity: Vector = (0.0, 0.0, 0.0)
    density: float = Field(1.0, gt=0.0)


class DomainConfig(StrictModel):
    """Grid, fluid and boundary description.

    Exactly one of ``dt`` and ``tau`` must be given; the other follows from
    tau = nu dt / dx^2 / cs2 + 1/2.

    Attributes:
        extents: Cell counts (nx, ny, nz).
        dx: Cell size in m.
        dt: Time step in s.
        tau: Relaxation time, > 0.5.
        nu: Kinematic viscosity in m^2/s.
        rho_f: Fluid density in kg/m^3.
        boundaries: Face name to boundary; missing faces are periodic.
        body_force: Uniform acceleration of the fluid in m/s^2.
        initial_velocity: Uniform initial fluid velocity in m/s.
    """

    extents: tuple[int, int, int]
    dx: float = Field(..., gt=0.0)
    dt: Optional[float] = Field(None, gt=0.0)
    tau: Optional[float] = None
    nu: float = Field(..., gt=0.0)
    rho_f: float = Field(..., gt=0.0)
    boundaries: dict[str, BoundaryConfig] = Field(default_factory=dict)
    body_force: Optional[Vector] = None
    initial_velocity: Vector = (0.0, 0.0, 0.0)

    @model_validator(mode="after")
    def check_domain(self) -> "DomainConfig":
        if any(n < 1 for n in self.extents):
            raise ValueError(f"extents must be positive, got {self.extents}")
        if (self.dt is None) == (self.tau is None):
            raise ValueError("give exactly one of dt and tau")
        if self.tau is not None and not self.tau > 0.5:
            raise ValueError(f"tau={self.tau} must exceed 0.5")
        unknown = sorted(set(self.boundaries) - set(FACES))
        if unknown:
            raise ValueError(f"unknown boundary faces {unknown}; faces are {list(FACES)}")
        return self

    @property
    def time_step(self) -> float:
        if self.dt is not None:
            return self.dt
        return (self.tau - 0.5) * CS2 * self.dx**2 / self.nu  # type: ignore[operator]


class PrimitiveConfig(StrictModel):
    """Procedural shape.

    Attributes:
        kind: cube, sphere, cylinder or blade.
        size: Edge length, diameter or span in m.
        options: Shape-specific extras (height, segments, subdivisions,
            chord, thickness, twist).
    """

    kind: Literal["cube", "sphere", "cylinder", "blade"]
    size: float = Field(..., gt=0.0)
    options: dict[str, float] = Field(default_factory=dict)


class PrescribedConfig(StrictModel):
    """Fixed-rate rotation and constant drift."""

    kind: Literal["prescribed"] = "prescribed"
    axis: Vector = (0.0, 0.0, 1.0)
    rate: float = 0.0
    velocity: Vector = (0.0, 0.0, 0.0)

    @model_validator(mode="after")
    def check_axis(self) -> "PrescribedConfig":
        if math.hypot(*self.axis) == 0.0:
            raise ValueError("rotation axis must be non-zero")
        return self


class DynamicConfig(StrictModel):
    """Free motion under gravity, buoyancy and hydrodynamic load."""

    kind: Literal["dynamic"] = "dynamic"
    density: float = Field(..., gt=0.0)
    gravity: Vector = (0.0, 0.0, -9.81)
    smoothing: float = Field(0.0, ge=0.0, lt=1.0)
    rotate: bool = True


class BodyConfig(StrictModel):
    """One rigid body.

    Attributes:
        name: Label for logs and output columns.
        mesh: Mesh file path (relative to the scenario file).
        mesh_scale: Factor applied to mesh coordinates (e.g. 1e-3 for mm).
        primitive: Procedural shape, used instead of ``mesh``.
        geometry_cache: Optional geometry field cache written by ``voxelize``.
        s: Super-sampling factor.
        position: Initial center of mass in m.
        orientation: Initial rotation vector in rad.
        motion: Prescribed or dynamic motion.
    """

    name: str = Field(..., min_length=1)
    mesh: Optional[str] = None
    mesh_scale: float = Field(1.0, gt=0.0)
    primitive: Optional[PrimitiveConfig] = None
    geometry_cache: Optional[str] = None
    s: int = Field(1, ge=0, le=6)
    position: Vector
    orientation: Vector = (0.0, 0.0, 0.0)
    motion: Annotated[
        Union[PrescribedConfig, DynamicConfig], Field(discriminator="kind")
    ] = Field(default_factory=PrescribedConfig)

    @model_validator(mode="after")
    def check_shape(self) -> "BodyConfig":
        if (self.mesh is None) == (self.primitive is None):
            raise ValueError("give exactly one of mesh and primitive")
        return self


class NumericsConfig(StrictModel):
    """Discretization choices."""

    stencil: Literal["D2Q9", "D3Q19"] = "D3Q19"
    solid_collision: SolidCollision = SolidCollision.SC2
    fraction_mode: FractionMode = FractionMode.DIRECT
    collision: FluidCollision = FluidCollision.SRT
    magic: float = Field(3.0 / 16.0, gt=0.0)


class OutputConfig(StrictModel):
    """What to write and where.

    Attributes:
        directory: Output directory (``PSMFLOW_OUTPUT_DIR`` overrides it).
        kinds: Artifacts to produce.
        interval: Steps between grid snapshots; 0 writes only the final one.
        report_every: Steps between rows of the step report CSV.
    """

    directory: str = "output"
    kinds: list[Literal["vtk", "csv"]] = Field(default_factory=lambda: ["csv"])
    interval: int = Field(0, ge=0)
    report_every: int = Field(1, ge=1)


class ExecutionConfig(StrictModel):
    """How long and on how many workers."""

    steps: int = Field(0, ge=0)
    workers: int = Field(1, ge=1)


class ScenarioConfig(StrictModel):
    """Complete scenario."""

    name: str = "scenario"
    domain: DomainConfig
    bodies: list[BodyConfig] = Field(default_factory=list)
    numerics: NumericsConfig = Field(default_factory=NumericsConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)
    execution: ExecutionConfig = Field(default_factory=ExecutionConfig)

    @model_validator(mode="after")
    def check_scenario(self) -> "ScenarioConfig":
        if self.numerics.stencil == "D2Q9" and self.domain.extents[2] != 1:
            raise ValueError("D2Q9 scenarios need extents[2] == 1")
        names = [b.name for b in self.bodies]
        if len(set(names)) != len(names):
            raise ValueError(f"body names must be unique, got {names}")
        return self


def load_scenario(path: str | Path) -> ScenarioConfig:
    """Read and validate a scenario file.

    Raises:
        pydantic.ValidationError: If the file does not match the schema.
        OSError: If the file cannot be read.
    """
    return ScenarioConfig.model_validate_json(Path(path).read_text(encoding="utf-8"))
