"""Time-step pipeline.

Each step runs these phases in a fixed order:

1. pose: prescribed bodies move to their closed-form pose for the step
2. fraction: B and u_s are rebuilt around every non-static body
3. kernel: fused PSM collide-and-stream into the write buffer
4. reduce: hydrodynamic force and torque per body
5. bodies: dynamic bodies are integrated
6. boundaries: face corrections on the write buffer
7. swap, then observers (output writers) run

Wall-clock time per phase is recorded in the step report.
"""

import logging
import math
import time
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import numpy as np

from psmflow.config import settings
from psmflow.models.body import BodyForces, RigidBody
from psmflow.models.domain import BodyLoad, Domain, StepReport
from psmflow.models.fields import (
    Coverage,
    FractionField,
    InvalidStateError,
    MacroscopicFields,
    ObjectVelocityField,
    PdfField,
    RelaxationParams,
    allocate_cells,
)
from psmflow.models.stencil import Stencil
from psmflow.services.boundaries import apply_boundaries, validate_boundaries
from psmflow.services.fraction import fraction_field_from_geometry, merge_coverages
from psmflow.services.kinematics import (
    advance_prescribed,
    external_force,
    integrate_dynamic,
    solid_velocity_at,
)
from psmflow.services.lattice import (
    FluidCollision,
    FractionMode,
    SolidCollision,
    equilibrium,
    macroscopic,
)
from psmflow.services.psm_kernel import KernelConfig, covered_cell_centers, psm_stream_collide
from psmflow.services.reductions import reduce_force, reduce_torque
from psmflow.utils.parallel import WorkerPool
from psmflow.utils.units import UnitConverter

logger = logging.getLogger(__name__)

PHASES = ("pose", "fraction", "kernel", "reduce", "bodies", "boundaries", "output")

Observer = Callable[["Simulation", StepReport], None]


@dataclass(frozen=True)
class Numerics:
    """Numerical options of a simulation.

    Attributes:
        solid_collision: Solid collision operator.
        fraction_mode: Overlap-to-B mapping.
        collision: Fluid collision operator.
        magic: TRT magic parameter.
        body_force: Uniform fluid body force in lattice units, or None.
    """

    solid_collision: SolidCollision = SolidCollision.SC2
    fraction_mode: FractionMode = FractionMode.DIRECT
    collision: FluidCollision = FluidCollision.SRT
    magic: float = 3.0 / 16.0
    body_force: tuple[float, float, float] | None = None


@dataclass
class _PhaseTimer:
    phase_ns: dict[str, int] = field(default_factory=dict)

    def run(self, name: str, work: Callable[[], object]) -> object:
        start = time.perf_counter_ns()
        try:
            return work()
        finally:
            self.phase_ns[name] = self.phase_ns.get(name, 0) + time.perf_counter_ns() - start


class Simulation:
    """Owns the lattice state and the bodies and advances them step by step.

    Example:
        with Simulation(domain, D3Q19, bodies, Numerics(), workers=4) as sim:
            for report in sim.run(1000):
                ...
    """

    def __init__(
        self,
        domain: Domain,
        stencil: Stencil,
        bodies: Sequence[RigidBody] = (),
        numerics: Numerics = Numerics(),
        workers: int = 1,
        initial_velocity: np.ndarray | None = None,
        observers: Sequence[Observer] = (),
    ) -> None:
        validate_boundaries(domain)
        self.domain = domain
        self.stencil = stencil
        self.bodies = list(bodies)
        for k, body in enumerate(self.bodies):
            body.body_id = k
        self.numerics = numerics
        self.units = UnitConverter(domain.dx, domain.dt, domain.rho_f)
        self.relaxation = RelaxationParams(domain.tau, magic=numerics.magic)
        self.kernel_config = KernelConfig(
            relaxation=self.relaxation,
            variant=numerics.solid_collision,
            collision=numerics.collision,
            periodic=domain.periodic,
            force=numerics.body_force,
        )
        self.pool = WorkerPool(workers)
        self.observers = list(observers)

        dims = domain.dims
        self.pdf = PdfField(stencil, dims)
        self.macro = MacroscopicFields.zeros(dims)
        self.fraction = FractionField(dims)
        self.velocity = ObjectVelocityField(dims)
        self.coverage = Coverage()
        self.omega_s = np.zeros((0, stencil.q))
        self.step_index = 0

        rho = allocate_cells(dims)
        rho[...] = 1.0
        u = allocate_cells(dims, (3,))
        if initial_velocity is not None:
            for a in range(3):
                u[a] = initial_velocity[a]
        self.initialize(rho, u)

        self._check_parameters()

    def initialize(self, rho: np.ndarray, u: np.ndarray) -> None:
        """Set the PDFs to equilibrium of the given lattice-unit fields.

        Args:
            rho: Density, shape (nx, ny, nz).
            u: Velocity, shape (3, nx, ny, nz).

        Raises:
            ValueError: If the shapes do not match the domain.
            InvalidStateError: If a density is not positive.
        """
        dims = self.domain.dims
        if rho.shape != dims or u.shape != (3, *dims):
            raise ValueError(f"initial fields {rho.shape}, {u.shape} do not match domain {dims}")
        if not np.all(rho > 0.0):
            raise InvalidStateError("non-positive initial density")
        self.pdf.load(equilibrium(u, rho, self.stencil))
        self.macro.rho[...] = rho
        self.macro.u[...] = u
        self.initial_mass = self.pdf.total_mass()

    def __enter__(self) -> "Simulation":
        return self

    def __exit__(self, *exc: object) -> None:
        self.close()

    def close(self) -> None:
        self.pool.close()

    @property
    def time(self) -> float:
        return self.step_index * self.domain.dt

    def _check_parameters(self) -> None:
        tau = self.relaxation.tau
        if tau > 2.0:
            logger.warning(f"tau={tau:.4f} is above 2; expect reduced accuracy")
        speeds = [
            float(np.linalg.norm(self.units.velocity_to_lattice(b.velocity))) for b in self.bodies
        ]
        for spec in self.domain.faces.values():
            speeds.append(float(np.linalg.norm(spec.velocity)))
        if speeds and max(speeds) > 0.1:
            logger.warning(f"lattice velocity {max(speeds):.4f} exceeds 0.1")

    def rebuild_fields(self) -> None:
        """Rebuild B and u_s around all bodies for the current poses."""
        dims = self.domain.dims
        dx, dt = self.domain.dx, self.domain.dt
        parts = [
            fraction_field_from_geometry(
                body.geometry,
                body.pose,
                dims,
                dx,
                self.relaxation.tau,
                self.numerics.fraction_mode,
                body_id=body.body_id,
            )
            for body in self.bodies
        ]
        coverage = merge_coverages(parts)
        self.fraction.clear(self.coverage)
        self.velocity.clear(self.coverage)
        if len(coverage):
            centers = covered_cell_centers(coverage, dims) * dx
            u_s = np.zeros((len(coverage), 3))
            for body in self.bodies:
                rows = coverage.body_id == body.body_id
                u_s[rows] = solid_velocity_at(body, centers[rows], dx, dt)
            self.fraction.scatter(coverage)
            self.velocity.scatter(coverage, u_s)
        self.coverage = coverage

    def _update_poses(self) -> None:
        for body in self.bodies:
            if not body.is_dynamic:
                advance_prescribed(body, self.step_index, self.domain.dt)

    def _needs_rebuild(self) -> bool:
        return self.step_index == 0 or any(not body.is_static for body in self.bodies)

    def _reduce(self) -> list[BodyLoad]:
        loads = []
        dims = self.domain.dims
        for body in self.bodies:
            rows = self.coverage.body_id == body.body_id
            frac = self.coverage.fraction[rows]
            omega = self.omega_s[rows]
            force_lat = reduce_force(frac, omega, self.stencil)
            centers = covered_cell_centers(self.coverage.for_body(body.body_id), dims)
            torque_lat = reduce_torque(
                frac, omega, centers, body.center_of_mass / self.domain.dx, self.stencil
            )
            # the reductions give what the fluid receives; the body feels the opposite
            body.forces = BodyForces(
                hydro_force=-self.units.force_to_si(force_lat),
                hydro_torque=-self.units.torque_to_si(torque_lat),
                external_force=external_force(body, self.domain.rho_f),
            )
            loads.append(BodyLoad(body.name, body.forces.hydro_force, body.forces.hydro_torque))
        return loads

    def _integrate(self) -> None:
        for body in self.bodies:
            if body.is_dynamic:
                integrate_dynamic(body, body.forces, self.domain.dt)

    def step(self) -> StepReport:
        """Advance the state by one time step.

        Returns:
            Report of the completed step.

        Raises:
            InvalidStateError: With the index of the failing step.
        """
        timer = _PhaseTimer()
        timer.run("pose", self._update_poses)
        if self._needs_rebuild():
            timer.run("fraction", self.rebuild_fields)
        else:
            timer.phase_ns["fraction"] = 0
        try:
            self.omega_s = timer.run(  # type: ignore[assignment]
                "kernel",
                lambda: psm_stream_collide(
                    self.pdf,
                    self.fraction,
                    self.velocity,
                    self.coverage,
                    self.kernel_config,
                    pool=self.pool,
                    macro=self.macro,
                ),
            )
        except InvalidStateError as exc:
            raise exc.at_step(self.step_index) from exc
        loads = timer.run("reduce", self._reduce)
        timer.run("bodies", self._integrate)
        timer.run(
            "boundaries",
            lambda: apply_boundaries(self.pdf.write, self.stencil, self.domain, self.macro),
        )
        self.pdf.swap()
        self.step_index += 1

        report = StepReport(
            step=self.step_index,
            time=self.time,
            mass=self.pdf.total_mass(),
            max_speed=self.macro.max_speed(),
            loads=loads,  # type: ignore[arg-type]
            phase_ns=timer.phase_ns,
        )
        if not report.is_finite():
            raise InvalidStateError("non-finite step report", step=self.step_index)
        timer.run("output", lambda: [obs(self, report) for obs in self.observers])
        report.phase_ns = {name: timer.phase_ns.get(name, 0) for name in PHASES}
        self._log(report)
        return report

    def _log(self, report: StepReport) -> None:
        if logger.isEnabledFor(logging.DEBUG):
            phases = ", ".join(f"{k}={v / 1e6:.3f}ms" for k, v in report.phase_ns.items())
            logger.debug(f"Step {report.step}: {phases}")
        if report.step % max(1, settings.LOG_EVERY) == 0:
            loads = "; ".join(
                f"{load.body} F={np.array2string(load.force, precision=4)}" for load in report.loads
            )
            logger.info(
                f"Step {report.step} t={report.time:.4e}s mass={report.mass:.12e} "
                f"max|u|={report.max_speed:.4f} {loads}"
            )
            if report.max_speed > 0.1:
                logger.warning(f"max lattice velocity {report.max_speed:.4f} exceeds 0.1")

    def run(self, steps: int):
        """Yield the report of each of the next ``steps`` steps."""
        for _ in range(steps):
            yield self.step()

    def mass_drift(self) -> float:
        """Relative change of total mass since initialization."""
        return (self.pdf.total_mass() - self.initial_mass) / self.initial_mass

    def macroscopic_snapshot(self) -> MacroscopicFields:
        """Density and velocity of the current read buffer."""
        force = None if self.numerics.body_force is None else np.asarray(self.numerics.body_force)
        rho, u = macroscopic(self.pdf.read, self.stencil, force=force)
        return MacroscopicFields(rho=rho, u=u)


def kinetic_energy(macro: MacroscopicFields) -> float:
    """Total kinetic energy 0.5 * sum(rho |u|^2) in lattice units."""
    e = 0.5 * macro.rho * np.sum(macro.u * macro.u, axis=0)
    return math.fsum(e.ravel())
