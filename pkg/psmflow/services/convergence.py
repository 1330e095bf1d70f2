"""Grid convergence studies.

Two smooth flows are run at several resolutions and the observed order is
the least-squares slope of log(error) against log(dx):

* ``taylor_green``: decaying periodic shear without solids, compared with
  the analytic viscous decay. Diffusive scaling keeps tau fixed and lets the
  velocity scale with dx.
* ``psm_disk``: body-force driven flow past a static PSM disk in a periodic
  box. The drag per unit depth is compared with the finest resolution.
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import stats

from psmflow.models.domain import Domain
from psmflow.models.fields import allocate_cells
from psmflow.models.stencil import D2Q9
from psmflow.schemas.scenario import (
    BodyConfig,
    DomainConfig,
    NumericsConfig,
    PrimitiveConfig,
    ScenarioConfig,
)
from psmflow.schemas.validation import ValidationSuiteError
from psmflow.services.engine import Simulation, kinetic_energy
from psmflow.services.output import CsvSeries
from psmflow.services.scenario_builder import build_simulation
from psmflow.utils.provenance import Provenance

logger = logging.getLogger(__name__)

STUDIES = ("taylor_green", "psm_disk")

TG_RESOLUTIONS = (16, 32, 64)
TG_VELOCITY = 0.08  # lattice velocity at N = 16
TG_TAU = 1.0

DISK_RESOLUTIONS = (16, 32, 64, 128)
DISK_LENGTH = 1.0
DISK_RADIUS = 0.15
DISK_NU = 0.01
DISK_TAU = 0.8
DISK_FORCE = 0.1
DISK_END_TIME = 0.625
DISK_SUPERSAMPLING = 2


@dataclass
class ConvergenceResult:
    """Errors per resolution and the fitted order.

    Attributes:
        study: Study name.
        resolutions: Cells per side of each run with an error.
        errors: Error per resolution.
        order: Slope of log(error) over log(dx).
        status: "ok", or "inconclusive" when errors do not fall with dx.
        extra: Study-specific diagnostics.
    """

    study: str
    resolutions: list[int]
    errors: list[float]
    order: float = math.nan
    status: str = "ok"
    extra: dict[str, float] = field(default_factory=dict)

    def write(self, path: str | Path, provenance: Provenance) -> Path:
        with CsvSeries(path, ["study", "n", "dx", "error"], provenance) as series:
            for n, err in zip(self.resolutions, self.errors):
                series.append([self.study, n, 1.0 / n, err])
        return Path(path)


def observed_order(resolutions: list[int], errors: list[float]) -> tuple[float, str]:
    """Least-squares slope of log(error) over log(dx) and the study status."""
    dx = 1.0 / np.asarray(resolutions, dtype=np.float64)
    err = np.asarray(errors, dtype=np.float64)
    if err.size < 2 or np.any(err <= 0.0) or not np.all(np.isfinite(err)):
        return math.nan, "inconclusive"
    fit = stats.linregress(np.log(dx), np.log(err))
    order = np.argsort(-dx)
    monotone = bool(np.all(np.diff(err[order]) < 0.0))
    return float(fit.slope), "ok" if monotone else "inconclusive"


def taylor_green_fields(n: int, u0: float) -> tuple[np.ndarray, np.ndarray]:
    """Initial density and velocity of the decaying shear flow on an n x n grid."""
    k = 2.0 * math.pi / n
    x = np.arange(n) + 0.5
    X, Y = np.meshgrid(x, x, indexing="ij")
    rho = allocate_cells((n, n, 1))
    u = allocate_cells((n, n, 1), (3,))
    rho[:, :, 0] = 1.0 - 0.75 * u0 * u0 * (np.cos(2.0 * k * X) + np.cos(2.0 * k * Y))
    u[0, :, :, 0] = -u0 * np.cos(k * X) * np.sin(k * Y)
    u[1, :, :, 0] = u0 * np.sin(k * X) * np.cos(k * Y)
    return rho, u


def taylor_green_run(n: int, steps: Optional[int] = None) -> tuple[float, float]:
    """Relative velocity error after ``steps`` and the energy decay rate error.

    Returns:
        (relative L2 velocity error, relative error of the fitted energy decay rate)
    """
    u0 = TG_VELOCITY * TG_RESOLUTIONS[0] / n
    steps = steps if steps is not None else n * n // 16
    dx = 1.0 / n
    dt = dx * dx
    nu_lattice = (TG_TAU - 0.5) / 3.0
    domain = Domain(dims=(n, n, 1), dx=dx, dt=dt, rho_f=1.0, nu=nu_lattice * dx * dx / dt)
    k = 2.0 * math.pi / n
    rate = 4.0 * nu_lattice * k * k

    rho, u = taylor_green_fields(n, u0)
    times, energies = [0.0], []
    with Simulation(domain, D2Q9) as sim:
        sim.initialize(rho, u)
        energies.append(kinetic_energy(sim.macroscopic_snapshot()))
        for report in sim.run(steps):
            times.append(float(report.step))
            energies.append(kinetic_energy(sim.macroscopic_snapshot()))
        final = sim.macroscopic_snapshot()

    decay = math.exp(-0.5 * rate * steps)
    diff = final.u[:2] - u[:2] * decay
    norm = math.fsum((u[:2] * u[:2]).ravel())
    error = math.sqrt(math.fsum((diff * diff).ravel()) / norm) / decay
    fit = stats.linregress(np.asarray(times), np.log(np.asarray(energies)))
    rate_error = abs(-fit.slope - rate) / rate
    logger.info(f"Taylor-Green N={n}: velocity error {error:.3e}, rate error {rate_error:.2%}")
    return error, rate_error


def taylor_green(resolutions: tuple[int, ...] = TG_RESOLUTIONS) -> ConvergenceResult:
    """Order of the pure-fluid solver on decaying shear.

    Raises:
        ValidationSuiteError: If fewer than three resolutions are given.
    """
    if len(resolutions) < 3:
        raise ValidationSuiteError("the convergence study needs at least three resolutions")
    errors, rate_errors = [], []
    for n in resolutions:
        err, rate_err = taylor_green_run(n)
        errors.append(err)
        rate_errors.append(rate_err)
    order, status = observed_order(list(resolutions), errors)
    return ConvergenceResult(
        study="taylor_green",
        resolutions=list(resolutions),
        errors=errors,
        order=order,
        status=status,
        extra={f"decay_rate_error_{n}": e for n, e in zip(resolutions, rate_errors)},
    )


def disk_scenario(n: int) -> ScenarioConfig:
    """Periodic box with a static disk at its center, driven along x."""
    dx = DISK_LENGTH / n
    disk = BodyConfig(
        name="disk",
        primitive=PrimitiveConfig(
            kind="cylinder", size=2.0 * DISK_RADIUS, options={"height": 4.0 * dx, "segments": 256}
        ),
        s=DISK_SUPERSAMPLING,
        position=(DISK_LENGTH / 2.0, DISK_LENGTH / 2.0, 0.5 * dx),
    )
    return ScenarioConfig(
        name=f"psm_disk_{n}",
        domain=DomainConfig(
            extents=(n, n, 1),
            dx=dx,
            tau=DISK_TAU,
            nu=DISK_NU,
            rho_f=1.0,
            body_force=(DISK_FORCE, 0.0, 0.0),
        ),
        bodies=[disk],
        numerics=NumericsConfig(stencil="D2Q9"),
    )


def disk_drag(n: int, workers: int = 1) -> float:
    """Drag per unit depth on the disk at the end time, in N/m."""
    config = disk_scenario(n)
    steps = round(DISK_END_TIME / config.domain.time_step)
    with build_simulation(config, workers=workers) as sim:
        for _ in sim.run(steps):
            pass
        drag = float(sim.bodies[0].forces.hydro_force[0]) / config.domain.dx
    logger.info(f"PSM disk N={n}: {steps} steps, drag {drag:.6e} N/m")
    return drag


def psm_disk(
    resolutions: tuple[int, ...] = DISK_RESOLUTIONS, workers: int = 1
) -> ConvergenceResult:
    """Self-convergence of the disk drag against the finest resolution.

    Raises:
        ValidationSuiteError: If fewer than three resolutions are given.
    """
    if len(resolutions) < 3:
        raise ValidationSuiteError("the convergence study needs at least three resolutions")
    ordered = sorted(resolutions)
    drags = [disk_drag(n, workers) for n in ordered]
    reference = drags[-1]
    errors = [abs(d - reference) / abs(reference) for d in drags[:-1]]
    order, status = observed_order(ordered[:-1], errors)
    return ConvergenceResult(
        study="psm_disk",
        resolutions=ordered[:-1],
        errors=errors,
        order=order,
        status=status,
        extra={"reference_drag": reference},
    )


def convergence_study(
    name: str, resolutions: Optional[tuple[int, ...]] = None, workers: int = 1
) -> ConvergenceResult:
    """Run a study by name.

    Raises:
        ValidationSuiteError: If ``name`` is not a known study.
    """
    if name == "taylor_green":
        return taylor_green(resolutions or TG_RESOLUTIONS)
    if name == "psm_disk":
        return psm_disk(resolutions or DISK_RESOLUTIONS, workers)
    raise ValidationSuiteError(f"unknown study {name!r}; choose one of {STUDIES}")
