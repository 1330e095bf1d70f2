"""Settling-sphere suite.

A sphere is released at rest in a closed box of quiescent oil and settles
under gravity, buoyancy and the hydrodynamic load. The settling velocity
history is compared with a digitized experimental curve when one is given,
otherwise with the tabulated terminal velocity of the oil.
"""

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from psmflow.models.domain import FACES, BoundaryKind
from psmflow.models.fields import InvalidStateError
from psmflow.schemas.scenario import (
    BodyConfig,
    BoundaryConfig,
    DomainConfig,
    DynamicConfig,
    ExecutionConfig,
    NumericsConfig,
    PrimitiveConfig,
    ScenarioConfig,
)
from psmflow.schemas.validation import (
    SettlingCase,
    SettlingSuite,
    ValidationSuiteError,
    load_settling_suite,
)
from psmflow.services.lattice import SolidCollision
from psmflow.services.output import CsvSeries
from psmflow.services.scenario_builder import build_simulation
from psmflow.utils.provenance import Provenance

logger = logging.getLogger(__name__)

SCALES = {"full": 1.0, "half": 0.5, "quarter": 0.25}
SERIES_COLUMNS = ["step", "time", "height", "settling_velocity"]

# stop once the gap below the sphere is this many diameters
STOP_GAP = 0.5
RISE_NOISE = 1e-3
PLATEAU_LEVEL = 0.95
PLATEAU_SHARE = 0.1
# largest relative difference of the maximum speed between two resolutions
SCALE_AGREEMENT = 0.10


def scaled_grid(grid: tuple[int, int, int], scale: str) -> tuple[int, int, int]:
    """Uniformly coarsened grid; 135x135x216 gives 68x68x108 and 34x34x54.

    Raises:
        ValidationSuiteError: If ``scale`` is not full, half or quarter.
    """
    if scale not in SCALES:
        raise ValidationSuiteError(f"unknown scale {scale!r}; choose one of {sorted(SCALES)}")
    factor = SCALES[scale]
    return tuple(math.ceil(n * factor - 1e-9) for n in grid)  # type: ignore[return-value]


def settling_scenario(suite: SettlingSuite, case: SettlingCase, scale: str) -> ScenarioConfig:
    """Scenario of one case at one resolution.

    The cell size follows from the container width, the time step from the
    suite's lattice velocity at the terminal speed. All faces are no-slip walls.
    """
    extents = scaled_grid(suite.grid, scale)
    dx = suite.container[0] / extents[0]
    dt = suite.lattice_velocity * dx / case.terminal_velocity
    nu = case.viscosity / case.fluid_density
    position = (
        extents[0] * dx / 2.0,
        extents[1] * dx / 2.0,
        suite.release_height,
    )
    sphere = BodyConfig(
        name="sphere",
        primitive=PrimitiveConfig(kind="sphere", size=suite.sphere_diameter),
        s=suite.supersampling,
        position=position,
        motion=DynamicConfig(density=suite.sphere_density, gravity=suite.gravity),
    )
    return ScenarioConfig(
        name=f"settling_{case.name}_{scale}",
        domain=DomainConfig(
            extents=extents,
            dx=dx,
            dt=dt,
            nu=nu,
            rho_f=case.fluid_density,
            boundaries={face: BoundaryConfig(kind=BoundaryKind.WALL) for face in FACES},
        ),
        bodies=[sphere],
        numerics=NumericsConfig(stencil="D3Q19", solid_collision=SolidCollision.SC2),
        execution=ExecutionConfig(steps=default_steps(suite, case, dt)),
    )


def default_steps(suite: SettlingSuite, case: SettlingCase, dt: float) -> int:
    """Steps to fall from the release point to the floor at terminal speed, plus 20%."""
    distance = suite.release_height - suite.sphere_diameter / 2.0
    return math.ceil(1.2 * distance / case.terminal_velocity / dt)


def read_reference_curve(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    """Digitized (time, velocity) pairs from a CSV file.

    Lines starting with ``#`` and a non-numeric header row are skipped.
    Velocities are taken by magnitude.

    Raises:
        ValidationSuiteError: If the file is missing, empty or malformed.
    """
    path = Path(path)
    times, speeds = [], []
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [row for row in csv.reader(fh) if row and not row[0].lstrip().startswith("#")]
    except OSError as exc:
        raise ValidationSuiteError(f"cannot read reference curve {path}: {exc}") from exc
    for k, row in enumerate(rows):
        try:
            t, v = float(row[0]), float(row[1])
        except (ValueError, IndexError) as exc:
            if k == 0:
                continue
            raise ValidationSuiteError(f"{path}: bad row {k + 1}: {row}") from exc
        times.append(t)
        speeds.append(abs(v))
    if not times:
        raise ValidationSuiteError(f"reference curve {path} holds no data")
    return np.asarray(times), np.asarray(speeds)


@dataclass
class CurveShape:
    """Qualitative shape of a settling curve.

    Attributes:
        monotone_rise: Speed does not drop (beyond noise) before its maximum.
        plateau: Speed stays within 5% of its maximum for at least a tenth of the run.
        single_plateau: No second rise above the maximum after the plateau is left.
    """

    monotone_rise: bool
    plateau: bool
    single_plateau: bool

    def problems(self) -> list[str]:
        """What keeps the curve from rising to one plateau; empty when it does."""
        problems = []
        if not self.monotone_rise:
            problems.append("speed drops before its maximum")
        if not self.plateau:
            problems.append("no plateau")
        elif not self.single_plateau:
            problems.append("more than one plateau")
        return problems


def curve_shape(speeds: np.ndarray) -> CurveShape:
    """Classify a settling speed series (positive downward)."""
    speeds = np.asarray(speeds, dtype=np.float64)
    if speeds.size < 2:
        return CurveShape(False, False, False)
    peak = int(np.argmax(speeds))
    top = float(speeds[peak])
    rise = bool(np.all(np.diff(speeds[: peak + 1]) >= -RISE_NOISE * top))

    high = speeds >= PLATEAU_LEVEL * top
    first = int(np.argmax(high))
    run = first
    while run < speeds.size and high[run]:
        run += 1
    plateau = (run - first) >= PLATEAU_SHARE * speeds.size
    single = not np.any(high[run:])
    return CurveShape(monotone_rise=rise, plateau=plateau, single_plateau=single)


@dataclass
class SettlingResult:
    """Settling history and verdict of one case.

    Attributes:
        case: Case label.
        scale: Resolution name.
        reynolds: Reynolds number computed from the case parameters.
        times: Time of each recorded step in s.
        heights: Sphere center height in m.
        speeds: Settling speed (positive downward) in m/s.
        reference_speed: Maximum speed of the reference.
        tolerance: Accepted relative error.
        status: "pass", "fail" or "diverged".
        diverged_step: Step of the invalid state, if any.
        series_path: CSV of the history, if written.
        detail: Why the case failed.
    """

    case: str
    scale: str
    reynolds: float
    reference_speed: float
    tolerance: float
    times: np.ndarray = field(default_factory=lambda: np.zeros(0))
    heights: np.ndarray = field(default_factory=lambda: np.zeros(0))
    speeds: np.ndarray = field(default_factory=lambda: np.zeros(0))
    status: str = "fail"
    diverged_step: Optional[int] = None
    series_path: Optional[Path] = None
    detail: str = ""

    @property
    def max_speed(self) -> float:
        return float(np.max(self.speeds)) if self.speeds.size else math.nan

    @property
    def relative_error(self) -> float:
        return abs(self.max_speed - self.reference_speed) / self.reference_speed

    @property
    def shape(self) -> CurveShape:
        return curve_shape(self.speeds)

    def summary(self) -> str:
        if self.status == "diverged":
            return f"{self.case} [{self.scale}] diverged at step {self.diverged_step}"
        return (
            f"{self.case} [{self.scale}] Re={self.reynolds:.2f} "
            f"max u={self.max_speed:.5f} m/s ref={self.reference_speed:.5f} m/s "
            f"error={self.relative_error:.2%} (tol {self.tolerance:.0%}) {self.status}"
            + (f": {self.detail}" if self.detail else "")
        )

    def judge(self, check_reference: bool) -> str:
        """Set ``status`` and ``detail`` from the recorded history.

        The curve must rise monotonically to a single plateau. The maximum
        speed is held to the case tolerance only when ``check_reference`` is
        set; coarse runs are judged on shape and on agreement between scales.
        """
        if self.status == "diverged":
            return self.status
        problems = self.shape.problems()
        if check_reference and not self.relative_error <= self.tolerance:
            problems.append(f"max speed off the reference by {self.relative_error:.2%}")
        self.detail = "; ".join(problems)
        self.status = "fail" if problems else "pass"
        return self.status


@dataclass
class ScaleAgreement:
    """Maximum settling speed of one case at a coarse and a fine scale."""

    case: str
    scales: tuple[str, str]
    speeds: tuple[float, float]

    @property
    def difference(self) -> float:
        """Relative difference, taken against the finer run; NaN if either run has no speed."""
        coarse, fine = self.speeds
        if not (math.isfinite(coarse) and math.isfinite(fine)) or fine <= 0.0:
            return math.nan
        return abs(coarse - fine) / fine

    @property
    def passed(self) -> bool:
        return self.difference <= SCALE_AGREEMENT

    def summary(self) -> str:
        verdict = "pass" if self.passed else "fail"
        return (
            f"{self.case} [{self.scales[0]} vs {self.scales[1]}] "
            f"max u {self.speeds[0]:.5f} vs {self.speeds[1]:.5f} m/s "
            f"difference={self.difference:.2%} (tol {SCALE_AGREEMENT:.0%}) {verdict}"
        )


def scale_agreement(coarse: SettlingResult, fine: SettlingResult) -> ScaleAgreement:
    """Compare one case run at two resolutions.

    Raises:
        ValidationSuiteError: If the results belong to different cases.
    """
    if coarse.case != fine.case:
        raise ValidationSuiteError(f"cannot compare case {coarse.case} with {fine.case}")
    speeds = tuple(math.nan if r.status == "diverged" else r.max_speed for r in (coarse, fine))
    return ScaleAgreement(coarse.case, (coarse.scale, fine.scale), speeds)  # type: ignore[arg-type]


def run_settling_case(
    case: SettlingCase | str,
    scale: str = "quarter",
    suite: Optional[SettlingSuite] = None,
    reference_csv: Optional[str | Path] = None,
    steps: Optional[int] = None,
    workers: int = 1,
    output_dir: Optional[str | Path] = None,
) -> SettlingResult:
    """Let the sphere settle and compare its maximum speed with the reference.

    Args:
        case: Case or case name (E1 .. E4).
        scale: full, half or quarter resolution.
        suite: Shared parameters; the bundled file by default.
        reference_csv: Digitized (time, velocity) curve; the tabulated
            terminal velocity is used when omitted.
        steps: Step limit; by default long enough to reach the floor.
        workers: Kernel worker count.
        output_dir: Where to write ``<scenario>.csv``; nothing is written when None.

    Returns:
        The history and verdict. Divergence is reported as status "diverged",
        not raised.
    """
    suite = suite if suite is not None else load_settling_suite()
    if isinstance(case, str):
        try:
            case = suite.case(case)
        except KeyError as exc:
            raise ValidationSuiteError(str(exc)) from exc
    config = settling_scenario(suite, case, scale)
    if steps is not None:
        config = config.model_copy(update={"execution": ExecutionConfig(steps=steps)})

    if reference_csv is not None:
        _, ref_speeds = read_reference_curve(reference_csv)
        reference = float(np.max(ref_speeds))
    else:
        reference = case.terminal_velocity

    result = SettlingResult(
        case=case.name,
        scale=scale,
        reynolds=suite.reynolds_of(case),
        reference_speed=reference,
        tolerance=case.tolerance,
    )
    floor = suite.sphere_diameter * (0.5 + STOP_GAP)
    times, heights, speeds = [], [], []
    series = None
    if output_dir is not None:
        provenance = Provenance.for_config(config, workers)
        result.series_path = Path(output_dir) / f"{config.name}.csv"
        series = CsvSeries(result.series_path, SERIES_COLUMNS, provenance)

    logger.info(
        f"Settling {case.name} at {scale} scale: grid {config.domain.extents}, "
        f"{config.execution.steps} steps, Re={result.reynolds:.2f}"
    )
    try:
        with build_simulation(config, workers=workers) as sim:
            sphere = sim.bodies[0]
            for report in sim.run(config.execution.steps):
                height = float(sphere.center_of_mass[2])
                speed = -float(sphere.velocity[2])
                times.append(report.time)
                heights.append(height)
                speeds.append(speed)
                if series is not None:
                    series.append([report.step, report.time, height, speed])
                if height <= floor:
                    logger.info(f"Sphere reached the floor region at step {report.step}")
                    break
    except InvalidStateError as exc:
        result.status = "diverged"
        result.diverged_step = exc.step
        logger.error(f"Settling {case.name} diverged: {exc}")
    finally:
        if series is not None:
            series.close()

    result.times = np.asarray(times)
    result.heights = np.asarray(heights)
    result.speeds = np.asarray(speeds)
    result.judge(check_reference=scale == "full")
    logger.info(result.summary())
    return result


def run_settling_suite(
    scale: str = "quarter",
    cases: Optional[list[str]] = None,
    reference_dir: Optional[str | Path] = None,
    workers: int = 1,
    output_dir: Optional[str | Path] = None,
) -> list[SettlingResult]:
    """Run the named cases (all by default) one after the other.

    A ``<case>.csv`` file in ``reference_dir`` is used as that case's reference curve.
    """
    suite = load_settling_suite()
    names = cases or [c.name for c in suite.cases]
    results = []
    for name in names:
        reference = None
        if reference_dir is not None:
            candidate = Path(reference_dir) / f"{name}.csv"
            reference = candidate if candidate.exists() else None
        results.append(
            run_settling_case(
                name,
                scale=scale,
                suite=suite,
                reference_csv=reference,
                workers=workers,
                output_dir=output_dir,
            )
        )
    return results
