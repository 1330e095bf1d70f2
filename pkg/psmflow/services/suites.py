"""Named validation suites behind ``psmflow validate``."""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from psmflow.schemas.validation import ValidationSuiteError
from psmflow.services.convergence import convergence_study
from psmflow.services.output import CsvSeries
from psmflow.services.settling import SCALES, run_settling_suite, scale_agreement
from psmflow.services.volume_suite import run_volume_suite, thin_feature_contrast
from psmflow.utils.provenance import Provenance

logger = logging.getLogger(__name__)

SUITES = (
    "volume-cube",
    "volume-bunny",
    "volume-blade",
    "settling",
    "convergence-taylor-green",
    "convergence-psm-disk",
)


class UnknownSuiteError(ValidationSuiteError):
    """Raised for a suite name that is not in ``SUITES``."""

    def __init__(self, name: str) -> None:
        self.name = name
        super().__init__(f"unknown suite {name!r}; available suites: {', '.join(SUITES)}")


@dataclass
class SuiteOutcome:
    """What a suite run produced.

    Attributes:
        name: Suite name.
        passed: False if any case failed or diverged.
        lines: Human-readable summary.
        artifacts: Files written.
    """

    name: str
    passed: bool
    lines: list[str] = field(default_factory=list)
    artifacts: list[Path] = field(default_factory=list)


def run_suite(
    name: str,
    output_dir: str | Path,
    provenance: Provenance,
    scale: str = "quarter",
    mesh: Optional[str | Path] = None,
    reference_dir: Optional[str | Path] = None,
    workers: int = 1,
    compare_scale: Optional[str] = None,
) -> SuiteOutcome:
    """Run one suite and write its tables.

    Args:
        name: One of ``SUITES``.
        output_dir: Directory for CSV and markdown results.
        provenance: Header for every artifact.
        scale: Settling resolution (full, half, quarter).
        mesh: Mesh file of the bunny table.
        reference_dir: Digitized settling curves named ``<case>.csv``.
        workers: Kernel worker count.
        compare_scale: Second settling resolution; every case must then
            reach the same maximum speed at both scales.

    Raises:
        UnknownSuiteError: If ``name`` is not a suite.
        ValidationSuiteError: If ``compare_scale`` is not a known scale.
    """
    if name not in SUITES:
        raise UnknownSuiteError(name)
    if compare_scale is not None and compare_scale not in SCALES:
        raise ValidationSuiteError(
            f"unknown scale {compare_scale!r}; choose one of {sorted(SCALES)}"
        )
    output_dir = Path(output_dir)
    logger.info(f"Running suite {name}")

    if name.startswith("volume-"):
        geometry = name.split("-", 1)[1]
        table = run_volume_suite(geometry, mesh=mesh)
        outcome = SuiteOutcome(name, table.passed, lines=table.markdown().splitlines())
        outcome.artifacts.extend(table.write(output_dir, provenance))
        if geometry == "blade":
            for n, ratio in thin_feature_contrast(table).items():
                outcome.lines.append(f"N = {n}: s=0 error / s>=1 error = {ratio:.3g}")
        return outcome

    if name == "settling":
        results = run_settling_suite(
            scale=scale, reference_dir=reference_dir, workers=workers, output_dir=output_dir
        )
        outcome = SuiteOutcome(name, all(r.status == "pass" for r in results))
        if compare_scale is not None and compare_scale != scale:
            others = run_settling_suite(
                scale=compare_scale,
                reference_dir=reference_dir,
                workers=workers,
                output_dir=output_dir,
            )
            outcome.passed = outcome.passed and all(r.status == "pass" for r in others)
            coarse, fine = results, others
            if SCALES[compare_scale] < SCALES[scale]:
                coarse, fine = others, results
            for low, high in zip(coarse, fine):
                agreement = scale_agreement(low, high)
                outcome.lines.append(agreement.summary())
                outcome.passed = outcome.passed and agreement.passed
            results = results + others
        path = output_dir / f"settling_{scale}_summary.csv"
        columns = [
            "case",
            "scale",
            "reynolds",
            "max_speed",
            "reference",
            "error",
            "tolerance",
            "status",
        ]
        with CsvSeries(path, columns, provenance) as series:
            for r in results:
                series.append(
                    [
                        r.case,
                        r.scale,
                        r.reynolds,
                        r.max_speed,
                        r.reference_speed,
                        r.relative_error,
                        r.tolerance,
                        r.status,
                    ]
                )
                outcome.lines.append(r.summary())
                if r.series_path is not None:
                    outcome.artifacts.append(r.series_path)
        outcome.artifacts.append(path)
        return outcome

    study = name.split("-", 1)[1].replace("-", "_")
    result = convergence_study(study, workers=workers)
    path = result.write(output_dir / f"convergence_{study}.csv", provenance)
    lines = [f"{n:>5d}  {err:.6e}" for n, err in zip(result.resolutions, result.errors)]
    lines.append(f"observed order {result.order:.3f} ({result.status})")
    lines += [f"{key} = {value:.6g}" for key, value in result.extra.items()]
    return SuiteOutcome(name, result.status == "ok", lines=lines, artifacts=[path])
