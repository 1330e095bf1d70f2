"""Kernel throughput benchmark.

Measures mega lattice updates per second (MLUPS) of the step pipeline for
four variants of one scenario: plain LBM, PSM with a static body and PSM
with a rotating body voxelized at s=0 and s=1. Only the pose, fraction and
kernel phases are timed; boundaries, reductions and output are excluded.

The roofline bound assumes each cell update reads and writes every PDF once:
P_max = BW / (2 * q * 8 bytes).

A run passes when PSM with a static body keeps at least 85% of the plain LBM
throughput, the rotating runs at s=0 and s=1 differ by at most 5%, and the
pose update plus fraction rebuild take at most 15% of a rotating step.
"""

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from psmflow.schemas.scenario import (
    BodyConfig,
    ExecutionConfig,
    PrescribedConfig,
    PrimitiveConfig,
    ScenarioConfig,
)
from psmflow.services.scenario_builder import build_simulation

logger = logging.getLogger(__name__)

TIMED_PHASES = ("pose", "fraction", "kernel")
VARIANTS = ("lbm", "psm_static", "psm_rotating_s0", "psm_rotating_s1")
ROTATING = ("psm_rotating_s0", "psm_rotating_s1")

PSM_RATIO_MIN = 0.85
SUPERSAMPLING_DIFFERENCE_MAX = 0.05
ROTATION_SHARE_MAX = 0.15


def roofline_mlups(bandwidth_mb_s: float, q: int) -> float:
    """Bandwidth bound on MLUPS for a q-direction stencil in double precision."""
    return bandwidth_mb_s / (2 * q * 8)


def copy_bandwidth(n_bytes: int = 1 << 26, repeats: int = 5) -> float:
    """Sustained copy bandwidth in MB/s (read plus write), best of ``repeats``."""
    n = n_bytes // 8
    src = np.ones(n)
    dst = np.empty(n)
    best = math.inf
    for _ in range(repeats):
        start = time.perf_counter_ns()
        np.copyto(dst, src)
        best = min(best, time.perf_counter_ns() - start)
    return 2.0 * n * 8 / (best * 1e-9) / 1e6


@dataclass
class BenchmarkReport:
    """Benchmark results.

    Attributes:
        mlups: MLUPS per variant.
        phase_share: Share of the pose update and fraction rebuild in the timed
            step, per variant.
        bandwidth_mb_s: Measured copy bandwidth.
        roofline: Bandwidth bound in MLUPS.
        cells: Lattice cells per step.
        steps: Timed steps per variant.
        workers: Worker count.
    """

    mlups: dict[str, float] = field(default_factory=dict)
    phase_share: dict[str, float] = field(default_factory=dict)
    bandwidth_mb_s: float = 0.0
    roofline: float = 0.0
    cells: int = 0
    steps: int = 0
    workers: int = 1

    @property
    def psm_ratio(self) -> float:
        """PSM static over plain LBM throughput."""
        return self.mlups["psm_static"] / self.mlups["lbm"]

    @property
    def supersampling_difference(self) -> float:
        """Relative MLUPS difference between the s=0 and s=1 rotating runs."""
        s0, s1 = self.mlups["psm_rotating_s0"], self.mlups["psm_rotating_s1"]
        return abs(s0 - s1) / max(s0, s1)

    @property
    def rotation_share(self) -> float:
        """Largest pose-plus-fraction share of the rotating runs."""
        return max(self.phase_share.get(name, 0.0) for name in ROTATING)

    def statuses(self) -> dict[str, str]:
        """Pass or fail per gated ratio."""
        checks = {
            "psm_lbm_ratio": self.psm_ratio >= PSM_RATIO_MIN,
            "s0_s1_difference": self.supersampling_difference <= SUPERSAMPLING_DIFFERENCE_MAX,
            "rotation_share": self.rotation_share <= ROTATION_SHARE_MAX,
        }
        return {name: "pass" if ok else "fail" for name, ok in checks.items()}

    @property
    def passed(self) -> bool:
        return all(status == "pass" for status in self.statuses().values())

    def lines(self) -> list[str]:
        """key=value lines for machine parsing."""
        out = [f"cells={self.cells}", f"steps={self.steps}", f"workers={self.workers}"]
        out += [f"mlups_{name}={value:.6f}" for name, value in self.mlups.items()]
        out += [f"rotation_share_{name}={v:.6f}" for name, v in self.phase_share.items()]
        out += [
            f"bandwidth_mb_s={self.bandwidth_mb_s:.3f}",
            f"roofline_mlups={self.roofline:.3f}",
            f"psm_lbm_ratio={self.psm_ratio:.6f}",
            f"s0_s1_difference={self.supersampling_difference:.6f}",
            f"rotation_share={self.rotation_share:.6f}",
        ]
        out += [f"status_{name}={status}" for name, status in self.statuses().items()]
        return out


def variant_configs(config: ScenarioConfig) -> dict[str, ScenarioConfig]:
    """The four benchmark variants derived from ``config``.

    The domain is made fully periodic. The first body of the scenario (or a
    centered cube a quarter of the smallest extent wide) is kept static or
    spun about z at a rate that moves its rim at about 0.01 lattice units.
    """
    domain = config.domain.model_copy(update={"boundaries": {}, "body_force": None})
    dt = domain.time_step
    extents = np.asarray(domain.extents)
    if config.bodies:
        body = config.bodies[0].model_copy(update={"geometry_cache": None})
    else:
        side = max(1, int(extents[extents > 1].min()) // 4) * domain.dx
        body = BodyConfig(
            name="cube",
            primitive=PrimitiveConfig(kind="cube", size=side),
            position=tuple(float(v) for v in extents * domain.dx / 2.0),  # type: ignore[arg-type]
        )
    radius = 0.25 * float(extents[extents > 1].min()) * domain.dx
    rate = 0.01 * domain.dx / dt / radius

    static = body.model_copy(update={"motion": PrescribedConfig()})
    rotating = body.model_copy(update={"motion": PrescribedConfig(rate=rate)})
    base = config.model_copy(
        update={"domain": domain, "execution": ExecutionConfig(), "bodies": []}
    )
    return {
        "lbm": base,
        "psm_static": base.model_copy(update={"bodies": [static]}),
        "psm_rotating_s0": base.model_copy(
            update={"bodies": [rotating.model_copy(update={"s": 0})]}
        ),
        "psm_rotating_s1": base.model_copy(
            update={"bodies": [rotating.model_copy(update={"s": 1})]}
        ),
    }


def measure_mlups(
    config: ScenarioConfig,
    steps: int = 50,
    warmup: int = 5,
    workers: int = 1,
    base_dir: str = ".",
) -> BenchmarkReport:
    """Time every variant and measure the local roofline.

    Raises:
        ValueError: If ``steps`` does not exceed ``warmup``.
    """
    if steps <= warmup:
        raise ValueError(f"steps ({steps}) must exceed warmup ({warmup})")
    report = BenchmarkReport(steps=steps - warmup, workers=workers)
    for name, variant in variant_configs(config).items():
        with build_simulation(variant, base_dir=base_dir, workers=workers) as sim:
            report.cells = sim.pdf.n_cells
            totals = dict.fromkeys(TIMED_PHASES, 0)
            for k, step in enumerate(sim.run(steps)):
                if k < warmup:
                    continue
                for phase in TIMED_PHASES:
                    totals[phase] += step.phase_ns.get(phase, 0)
            elapsed = sum(totals.values()) * 1e-9
            report.mlups[name] = report.cells * report.steps / elapsed / 1e6
            report.phase_share[name] = (totals["pose"] + totals["fraction"]) * 1e-9 / elapsed
            logger.info(f"Benchmark {name}: {report.mlups[name]:.3f} MLUPS")
            q = sim.stencil.q
    report.bandwidth_mb_s = copy_bandwidth()
    report.roofline = roofline_mlups(report.bandwidth_mb_s, q)
    return report
