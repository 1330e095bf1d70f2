"""Rotating-body volume suite.

A body is voxelized once, then rotated about all three axes for a number of
steps while its solid fraction field is rebuilt each step. The time-averaged
solid volume sum(B) dx^3 is compared with the exact volume of the mesh.

Tables are indexed by the resolution N (cells across the body) and the
super-sampling factor s, and are emitted as CSV and as a markdown grid.
"""

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.spatial.transform import Rotation

from psmflow.models.mesh import GeometryField, Pose, TriangleMesh
from psmflow.schemas.validation import ValidationSuiteError, VolumeErrorCase
from psmflow.services.fraction import volume_error_series
from psmflow.services.kinematics import mass_properties
from psmflow.services.mesh_io import MeshError, load_mesh
from psmflow.services.output import CsvSeries
from psmflow.services.primitives import cube, twisted_blade
from psmflow.services.voxelizer import voxelize
from psmflow.utils.provenance import Provenance

logger = logging.getLogger(__name__)

BODY_SIZE = 1.0
ROTATION_PER_STEP = np.array([math.pi / 200.0, math.pi / 150.0, math.pi / 100.0])
RESOLUTIONS = (10, 20, 40)
FACTORS = (0, 1, 2, 3)

# Published errors per geometry, indexed [N][s]; None where no value exists.
PUBLISHED_ERRORS: dict[str, dict[int, tuple[Optional[float], ...]]] = {
    "cube": {
        10: (1.34e-05, 9.06e-06, 3.71e-06, 1.65e-06),
        20: (5.35e-05, 1.44e-07, 5.03e-08, 1.78e-08),
        40: (6.29e-06, 8.94e-09, 2.48e-09, 1.03e-09),
    },
    "bunny": {
        10: (4.17e-03, 5.00e-05, 3.59e-05, 9.44e-06),
        20: (3.11e-05, 1.86e-05, 2.97e-06, 7.48e-07),
        40: (1.63e-05, 1.35e-06, 4.35e-07, 1.71e-07),
    },
}

# Hard error limits per geometry, keyed (N, s); a case above its limit fails.
ACCEPTANCE_LIMITS: dict[str, dict[tuple[int, int], float]] = {
    "cube": {(20, 1): 1e-6, (40, 1): 1e-7},
    "bunny": {(20, 2): 1e-5},
}

# Geometries whose s >= 1 errors must not grow with N
MONOTONE_GEOMETRIES = ("cube",)

# Ungated cells more than this many decades above the published value are
# flagged "outside band" without failing the table.
BAND_DECADES = 1.0


def case_status(geometry: str, n: int, s: int, error: float) -> str:
    """Verdict of one table cell: "pass", "fail" or "outside band".

    Cells with an acceptance limit pass or fail against it. Other cells are
    compared with the published value, when there is one, and only flagged.
    """
    limit = ACCEPTANCE_LIMITS.get(geometry, {}).get((n, s))
    if limit is not None:
        return "pass" if error <= limit else "fail"
    row = PUBLISHED_ERRORS.get(geometry, {}).get(n)
    published = None if row is None or s >= len(row) else row[s]
    if published is None:
        return "pass"
    return "pass" if error <= published * 10.0**BAND_DECADES else "outside band"


@dataclass
class VolumeCaseResult:
    """Outcome of one table cell.

    Attributes:
        case: The case that was run.
        status: "pass", "fail", "outside band" or "skipped".
        error: Squared relative volume error, NaN when skipped.
        published: Published error for the same cell, if any.
        reference: Reference volume in m^3.
        mean_volume: Time-averaged solid volume in m^3.
        detail: Reason for a skip.
    """

    case: VolumeErrorCase
    status: str
    error: float = math.nan
    published: Optional[float] = None
    reference: float = math.nan
    mean_volume: float = math.nan
    detail: str = ""


@dataclass
class VolumeTable:
    """One geometry's grid of results."""

    geometry: str
    results: list[VolumeCaseResult] = field(default_factory=list)

    def cell(self, n: int, s: int) -> Optional[VolumeCaseResult]:
        for result in self.results:
            if result.case.n == n and result.case.s == s:
                return result
        return None

    def monotone_violations(self) -> list[tuple[int, int, int]]:
        """(s, N, next N) triples where an s >= 1 error grows with resolution."""
        if self.geometry not in MONOTONE_GEOMETRIES:
            return []
        violations = []
        for s in self.factors():
            if s < 1:
                continue
            ran = sorted(
                (r for r in self.results if r.case.s == s and r.status != "skipped"),
                key=lambda r: r.case.n,
            )
            for coarse, fine in zip(ran, ran[1:]):
                if fine.error > coarse.error:
                    violations.append((s, coarse.case.n, fine.case.n))
        return violations

    @property
    def passed(self) -> bool:
        if any(r.status == "fail" for r in self.results):
            return False
        return not self.monotone_violations()

    def resolutions(self) -> list[int]:
        return sorted({r.case.n for r in self.results})

    def factors(self) -> list[int]:
        return sorted({r.case.s for r in self.results})

    def markdown(self) -> str:
        """Grid with one row per N and one column per s."""
        factors = self.factors()
        lines = [
            f"| {self.geometry} | " + " | ".join(f"s = {s}" for s in factors) + " |",
            "|---|" + "---|" * len(factors),
        ]
        for n in self.resolutions():
            cells = []
            for s in factors:
                result = self.cell(n, s)
                if result is None or result.status == "skipped":
                    cells.append("-")
                else:
                    mark = "" if result.status == "pass" else f" ({result.status})"
                    cells.append(f"{result.error:.2E}{mark}")
            lines.append(f"| N = {n} | " + " | ".join(cells) + " |")
        violations = self.monotone_violations()
        if violations:
            lines.append("")
            for s, coarse, fine in violations:
                lines.append(f"error grows from N = {coarse} to N = {fine} at s = {s}")
        return "\n".join(lines) + "\n"

    def write(self, directory: str | Path, provenance: Provenance) -> tuple[Path, Path]:
        """Write ``volume_<geometry>.csv`` and ``volume_<geometry>.md``."""
        directory = Path(directory)
        columns = [
            "geometry",
            "n",
            "s",
            "steps",
            "error",
            "published",
            "mean_volume",
            "reference",
            "status",
        ]
        csv_path = directory / f"volume_{self.geometry}.csv"
        with CsvSeries(csv_path, columns, provenance) as series:
            for r in self.results:
                series.append(
                    [
                        self.geometry,
                        r.case.n,
                        r.case.s,
                        r.case.steps,
                        r.error,
                        math.nan if r.published is None else r.published,
                        r.mean_volume,
                        r.reference,
                        r.status,
                    ]
                )
        md_path = directory / f"volume_{self.geometry}.md"
        md_path.write_text(f"<!-- {provenance.as_line()} -->\n" + self.markdown(), encoding="utf-8")
        return csv_path, md_path


def rotation_schedule(center: np.ndarray) -> Callable[[int], Pose]:
    """Pose at step n: rotated by n times the per-step angles about x, y and z."""

    def pose(n: int) -> Pose:
        rotation = Rotation.from_euler("xyz", n * ROTATION_PER_STEP).as_matrix()
        return Pose(rotation=rotation, translation=center)

    return pose


def case_mesh(case: VolumeErrorCase) -> TriangleMesh:
    """Body mesh, BODY_SIZE across its largest extent and centered on its centroid.

    Raises:
        FileNotFoundError: If the bunny mesh file does not exist.
    """
    if case.geometry == "cube":
        return cube(BODY_SIZE)
    if case.geometry == "blade":
        return twisted_blade(BODY_SIZE, 0.4 * BODY_SIZE, 0.04 * BODY_SIZE, twist=math.pi / 2.0)
    if case.mesh is None:
        raise FileNotFoundError("no bunny mesh configured")
    path = Path(case.mesh)
    if not path.exists():
        raise FileNotFoundError(path)
    mesh = load_mesh(path)
    lo, hi = mesh.bounds
    mesh = mesh.scaled(BODY_SIZE / float(np.max(hi - lo)))
    return mesh.translated(-mass_properties(mesh, 1.0).center)


def domain_dims(geom: GeometryField, dx: float) -> tuple[int, int, int]:
    """Cubic domain holding the geometry field in any orientation, even cell count."""
    m = math.ceil(2.0 * geom.bounding_radius() / dx) + 4
    m += m % 2
    return (m, m, m)


def run_volume_case(case: VolumeErrorCase) -> VolumeCaseResult:
    """Voxelize, rotate and average the solid volume for one table cell.

    A missing mesh file yields a "skipped" result.
    """
    try:
        mesh = case_mesh(case)
    except FileNotFoundError as exc:
        logger.warning(f"Skipping {case.geometry} N={case.n} s={case.s}: mesh {exc} not found")
        return VolumeCaseResult(case=case, status="skipped", detail=f"missing mesh {exc}")
    except MeshError as exc:
        raise ValidationSuiteError(f"cannot read mesh for {case.geometry}: {exc}") from exc

    dx = BODY_SIZE / case.n
    reference = mass_properties(mesh, 1.0).volume
    geom = voxelize(mesh, dx, case.s)
    dims = domain_dims(geom, dx)
    # cell-aligned center keeps the unrotated cube exact
    center = np.asarray(dims, dtype=np.float64) * dx / 2.0
    series = volume_error_series(
        geom, rotation_schedule(center), case.steps, dims, dx, 1.0, reference
    )

    table = PUBLISHED_ERRORS.get(case.geometry, {})
    published = table[case.n][case.s] if case.n in table else None
    result = VolumeCaseResult(
        case=case,
        status=case_status(case.geometry, case.n, case.s, series.error),
        error=series.error,
        published=published,
        reference=reference,
        mean_volume=series.mean_volume,
    )
    logger.info(
        f"Volume {case.geometry} N={case.n} s={case.s}: error={series.error:.3e}"
        + (f" (published {published:.2e})" if published is not None else "")
    )
    return result


def run_volume_suite(
    geometry: str = "cube",
    resolutions: tuple[int, ...] = RESOLUTIONS,
    factors: tuple[int, ...] = FACTORS,
    steps: int = 100,
    mesh: Optional[str | Path] = None,
) -> VolumeTable:
    """Run every (N, s) cell of one geometry's table, sequentially."""
    table = VolumeTable(geometry=geometry)
    for n in resolutions:
        for s in factors:
            case = VolumeErrorCase(geometry=geometry, n=n, s=s, steps=steps, mesh=mesh)
            table.results.append(run_volume_case(case))
    return table


def thin_feature_contrast(table: VolumeTable) -> dict[int, float]:
    """Ratio of the s=0 error to the largest s>=1 error, per resolution.

    Large ratios mark geometry too thin to be captured without super-sampling.
    """
    ratios = {}
    for n in table.resolutions():
        base = table.cell(n, 0)
        finer = [r.error for r in table.results if r.case.n == n and r.case.s >= 1]
        if base is None or not finer or base.status == "skipped":
            continue
        ratios[n] = base.error / max(max(finer), 1e-300)
    return ratios
