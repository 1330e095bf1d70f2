"""Output writers: grid snapshots and CSV series.

Grid snapshots are legacy ASCII VTK files (STRUCTURED_POINTS with cell data
rho, velocity and B). Series are CSV files written with the csv module.
Floats are written with full round-trip precision, so identical states give
byte-identical files. Every artifact starts with the reproducibility line of
:class:`psmflow.utils.provenance.Provenance`.
"""

import csv
import io
import logging
from pathlib import Path
from typing import TextIO

import numpy as np

from psmflow.models.body import RigidBody
from psmflow.models.domain import StepReport
from psmflow.utils.provenance import Provenance

logger = logging.getLogger(__name__)


class OutputError(Exception):
    """Raised when an artifact cannot be written.

    Attributes:
        path: Destination that failed.
    """

    def __init__(self, path: Path, reason: str) -> None:
        self.path = path
        super().__init__(f"cannot write {path}: {reason}")


def _open(path: Path) -> TextIO:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        return open(path, "w", newline="", encoding="utf-8")
    except OSError as exc:
        raise OutputError(path, str(exc)) from exc


def _numbers(values: np.ndarray) -> str:
    """Newline-separated repr of each value (x-fastest order)."""
    return "\n".join(repr(float(v)) for v in values) + "\n"


def render_vtk(
    rho: np.ndarray,
    u: np.ndarray,
    B: np.ndarray,
    dx: float,
    provenance: Provenance,
) -> str:
    """Legacy VTK text of one snapshot.

    Args:
        rho: Density, shape (nx, ny, nz).
        u: Velocity, shape (3, nx, ny, nz).
        B: Solid fraction, shape (nx, ny, nz).
        dx: Cell size in meters (grid spacing).
        provenance: Reproducibility header (goes into the title line).
    """
    nx, ny, nz = rho.shape
    n = nx * ny * nz
    out = io.StringIO()
    out.write("# vtk DataFile Version 3.0\n")
    out.write(provenance.as_line()[:255] + "\n")
    out.write("ASCII\nDATASET STRUCTURED_POINTS\n")
    out.write(f"DIMENSIONS {nx + 1} {ny + 1} {nz + 1}\n")
    out.write("ORIGIN 0 0 0\n")
    out.write(f"SPACING {dx!r} {dx!r} {dx!r}\n")
    out.write(f"CELL_DATA {n}\n")
    out.write("SCALARS rho double 1\nLOOKUP_TABLE default\n")
    out.write(_numbers(np.asarray(rho).ravel(order="F")))
    out.write("VECTORS velocity double\n")
    vec = np.stack([np.asarray(u[a]).ravel(order="F") for a in range(3)], axis=1)
    out.write("\n".join(" ".join(repr(float(v)) for v in row) for row in vec) + "\n")
    out.write("SCALARS B double 1\nLOOKUP_TABLE default\n")
    out.write(_numbers(np.asarray(B).ravel(order="F")))
    return out.getvalue()


def write_vtk(
    path: str | Path,
    rho: np.ndarray,
    u: np.ndarray,
    B: np.ndarray,
    dx: float,
    provenance: Provenance,
) -> Path:
    """Write a snapshot to ``path``.

    Raises:
        OutputError: If the file cannot be written.
    """
    path = Path(path)
    text = render_vtk(rho, u, B, dx, provenance)
    fh = _open(path)
    try:
        with fh:
            fh.write(text)
    except OSError as exc:
        raise OutputError(path, str(exc)) from exc
    logger.debug(f"Wrote snapshot {path}")
    return path


class CsvSeries:
    """CSV file with a provenance comment line and a header row.

    Example:
        with CsvSeries(path, ["step", "time"], provenance) as series:
            series.append([1, 0.01])
    """

    def __init__(self, path: str | Path, columns: list[str], provenance: Provenance) -> None:
        self.path = Path(path)
        self.columns = columns
        self.rows = 0
        self._fh = _open(self.path)
        self._writer = csv.writer(self._fh, lineterminator="\n")
        self._fh.write(f"# {provenance.as_line()}\n")
        self._writer.writerow(columns)

    def __enter__(self) -> "CsvSeries":
        return self

    def __exit__(self, *exc: object) -> None:
        self.close()

    def append(self, values) -> None:
        row = [v if isinstance(v, (int, str)) else float(v) for v in values]
        if len(row) != len(self.columns):
            raise ValueError(f"row has {len(row)} values for {len(self.columns)} columns")
        try:
            self._writer.writerow(row)
        except OSError as exc:
            raise OutputError(self.path, str(exc)) from exc
        self.rows += 1

    def close(self) -> None:
        if not self._fh.closed:
            self._fh.close()


def _xyz(prefix: str) -> list[str]:
    return [f"{prefix}_{a}" for a in "xyz"]


def step_report_columns(bodies: list[str]) -> list[str]:
    columns = ["step", "time", "mass", "max_speed"]
    for name in bodies:
        columns += _xyz(f"{name}_force") + _xyz(f"{name}_torque")
    return columns


def step_report_row(report: StepReport) -> list:
    row: list = [report.step, report.time, report.mass, report.max_speed]
    for load in report.loads:
        row += list(load.force) + list(load.torque)
    return row


BODY_TRACE_COLUMNS = (
    ["step", "time"]
    + _xyz("position")
    + _xyz("velocity")
    + _xyz("omega")
    + _xyz("force")
    + _xyz("torque")
)


def body_trace_row(step: int, time: float, body: RigidBody) -> list:
    return (
        [step, time]
        + list(body.center_of_mass)
        + list(body.velocity)
        + list(body.omega)
        + list(body.forces.hydro_force)
        + list(body.forces.hydro_torque)
    )


class RunRecorder:
    """Simulation observer writing the step report, body traces and snapshots.

    Args:
        directory: Output directory.
        name: Scenario name used as file prefix.
        body_names: Bodies in simulation order.
        provenance: Reproducibility header.
        kinds: Artifacts to write ("csv", "vtk").
        report_every: Steps between step-report and trace rows.
        interval: Steps between snapshots; 0 disables periodic snapshots.
    """

    def __init__(
        self,
        directory: str | Path,
        name: str,
        body_names: list[str],
        provenance: Provenance,
        kinds: list[str],
        report_every: int = 1,
        interval: int = 0,
    ) -> None:
        self.directory = Path(directory)
        self.name = name
        self.provenance = provenance
        self.kinds = set(kinds)
        self.report_every = report_every
        self.interval = interval
        self.snapshots: list[Path] = []
        self.report: CsvSeries | None = None
        self.traces: dict[str, CsvSeries] = {}
        if "csv" in self.kinds:
            self.report = CsvSeries(
                self.directory / f"{name}_steps.csv", step_report_columns(body_names), provenance
            )
            for body in body_names:
                self.traces[body] = CsvSeries(
                    self.directory / f"{name}_{body}_trace.csv", BODY_TRACE_COLUMNS, provenance
                )

    def __call__(self, sim, report: StepReport) -> None:
        if report.step % self.report_every == 0:
            if self.report is not None:
                self.report.append(step_report_row(report))
            for body in sim.bodies:
                if body.name in self.traces:
                    self.traces[body.name].append(body_trace_row(report.step, report.time, body))
        if "vtk" in self.kinds and self.interval and report.step % self.interval == 0:
            self.snapshot(sim, report.step)

    def snapshot(self, sim, step: int) -> Path:
        macro = sim.macroscopic_snapshot()
        path = self.directory / f"{self.name}_{step:08d}.vtk"
        self.snapshots.append(
            write_vtk(path, macro.rho, macro.u, sim.fraction.B, sim.domain.dx, self.provenance)
        )
        return path

    def close(self) -> None:
        if self.report is not None:
            self.report.close()
        for series in self.traces.values():
            series.close()
