"""Command-line entry point: ``psmflow run | voxelize | benchmark | validate``.

Exit status: 0 on success, 1 when a validation suite or the benchmark misses its limits,
2 for configuration and input errors, 3 for an invalid simulation state and
4 when a resource limit is exceeded.
"""

import argparse
import logging
import sys
from collections.abc import Sequence
from pathlib import Path

from pydantic import ValidationError

from psmflow import __version__
from psmflow.config import settings
from psmflow.models.fields import InvalidStateError
from psmflow.schemas.scenario import ScenarioConfig, load_scenario
from psmflow.schemas.validation import ValidationSuiteError
from psmflow.services.benchmark import measure_mlups
from psmflow.services.boundaries import BoundaryConfigError
from psmflow.services.mesh_io import MeshError, load_mesh
from psmflow.services.output import OutputError, RunRecorder
from psmflow.services.scenario_builder import build_simulation
from psmflow.services.suites import SUITES, run_suite
from psmflow.services.voxelizer import (
    GeometryCacheError,
    GeometryResourceError,
    voxelize,
    write_geometry_cache,
)
from psmflow.utils.provenance import Provenance

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2
EXIT_INVALID_STATE = 3
EXIT_RESOURCE = 4


def configure_logging(verbose: bool) -> None:
    debug = verbose or settings.DEBUG
    logging.basicConfig(
        level=logging.DEBUG if debug else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def format_validation_error(exc: ValidationError) -> str:
    """One line per problem, prefixed with the dotted key path."""
    lines = []
    for err in exc.errors():
        path = ".".join(str(part) for part in err["loc"]) or "<root>"
        lines.append(f"{path}: {err['msg']}")
    return "\n".join(lines)


def output_directory(args_out: str | None, configured: str) -> Path:
    """--out wins, then PSMFLOW_OUTPUT_DIR, then the scenario's directory."""
    return Path(args_out or settings.OUTPUT_DIR or configured)


def load_config(path: str, steps: int | None) -> ScenarioConfig:
    config = load_scenario(path)
    if steps is not None:
        execution = config.execution.model_copy(update={"steps": steps})
        config = config.model_copy(update={"execution": execution})
    return config


def cmd_run(args: argparse.Namespace) -> int:
    """Run a scenario file and write its artifacts."""
    config = load_config(args.config, args.steps)
    workers = args.workers or config.execution.workers
    provenance = Provenance.for_config(config, workers)
    out = output_directory(args.out, config.output.directory)
    logger.info(provenance.as_line())

    recorder = RunRecorder(
        out,
        config.name,
        [b.name for b in config.bodies],
        provenance,
        list(config.output.kinds),
        report_every=config.output.report_every,
        interval=config.output.interval,
    )
    try:
        with build_simulation(
            config,
            base_dir=Path(args.config).parent,
            workers=workers,
            observers=[recorder],
            strict=args.strict_mesh,
        ) as sim:
            last = None
            for last in sim.run(config.execution.steps):
                pass
            if "vtk" in recorder.kinds:
                recorder.snapshot(sim, sim.step_index)
            drift = sim.mass_drift()
    finally:
        recorder.close()

    print(f"steps={sim.step_index} time={sim.time!r} mass_drift={drift:.3e}")
    if last is not None:
        print(f"mass={last.mass!r} max_speed={last.max_speed!r}")
        for load in last.loads:
            print(f"{load.body}: force={list(load.force)} torque={list(load.torque)}")
    for path in recorder.snapshots:
        print(f"wrote {path}")
    return EXIT_OK


def cmd_voxelize(args: argparse.Namespace) -> int:
    """Voxelize a mesh once and store the geometry field."""
    mesh = load_mesh(args.mesh, strict=args.strict_mesh)
    if args.scale != 1.0:
        mesh = mesh.scaled(args.scale)
    geom = voxelize(mesh, args.dx, args.s, strict=args.strict_mesh)
    write_geometry_cache(geom, args.out)
    print(f"extents={geom.extents[0]}x{geom.extents[1]}x{geom.extents[2]}")
    print(f"inside={geom.inside_count}")
    print(f"volume={geom.volume!r}")
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_benchmark(args: argparse.Namespace) -> int:
    """Measure MLUPS of the four kernel variants and gate their ratios."""
    config = load_scenario(args.config)
    workers = args.workers or config.execution.workers
    report = measure_mlups(
        config,
        steps=args.steps or 50,
        warmup=args.warmup,
        workers=workers,
        base_dir=str(Path(args.config).parent),
    )
    provenance = Provenance.for_config(config, workers)
    lines = report.lines()
    for line in lines:
        print(line)
    out = output_directory(args.out, config.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{config.name}_benchmark.txt"
    path.write_text(f"# {provenance.as_line()}\n" + "\n".join(lines) + "\n", encoding="utf-8")
    print(f"benchmark: {'PASS' if report.passed else 'FAIL'}")
    return EXIT_OK if report.passed else EXIT_FAILED


def cmd_validate(args: argparse.Namespace) -> int:
    """Run a validation suite and report pass or fail."""
    workers = args.workers or settings.WORKERS
    provenance = Provenance.for_config(
        {
            "suite": args.suite,
            "scale": args.scale,
            "compare_scale": args.compare_scale,
            "mesh": args.mesh,
            "version": __version__,
        },
        workers,
    )
    outcome = run_suite(
        args.suite,
        output_directory(args.out, "output"),
        provenance,
        scale=args.scale,
        mesh=args.mesh,
        reference_dir=args.reference_dir,
        workers=workers,
        compare_scale=args.compare_scale,
    )
    for line in outcome.lines:
        print(line)
    for path in outcome.artifacts:
        print(f"wrote {path}")
    print(f"{outcome.name}: {'PASS' if outcome.passed else 'FAIL'}")
    return EXIT_OK if outcome.passed else EXIT_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="psmflow",
        description="Lattice Boltzmann solver with partially saturated cells for moving bodies.",
    )
    parser.add_argument("--version", action="version", version=f"psmflow {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="per-phase timings")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario file")
    run.add_argument("--config", required=True, help="scenario JSON file")
    run.add_argument("--steps", type=int, help="override execution.steps")
    run.add_argument("--workers", type=int, help="override execution.workers")
    run.add_argument("--out", help="output directory")
    run.add_argument("--strict-mesh", action=argparse.BooleanOptionalAction, default=None)
    run.set_defaults(handler=cmd_run)

    vox = sub.add_parser("voxelize", help="precompute a geometry field cache")
    vox.add_argument("mesh", help="STL or OBJ file")
    vox.add_argument("--dx", type=float, required=True, help="LBM cell size in m")
    vox.add_argument("-s", type=int, default=1, help="super-sampling factor")
    vox.add_argument("--scale", type=float, default=1.0, help="mesh coordinate factor")
    vox.add_argument("--out", required=True, help="cache file")
    vox.add_argument("--strict-mesh", action=argparse.BooleanOptionalAction, default=None)
    vox.set_defaults(handler=cmd_voxelize)

    bench = sub.add_parser("benchmark", help="measure kernel MLUPS")
    bench.add_argument("--config", required=True, help="scenario JSON file")
    bench.add_argument("--steps", type=int, help="timed plus warm-up steps (default 50)")
    bench.add_argument("--warmup", type=int, default=5)
    bench.add_argument("--workers", type=int)
    bench.add_argument("--out", help="output directory")
    bench.set_defaults(handler=cmd_benchmark)

    val = sub.add_parser("validate", help=f"run a validation suite ({', '.join(SUITES)})")
    val.add_argument("suite", help="suite name")
    val.add_argument("--scale", default="quarter", help="settling resolution: full, half, quarter")
    val.add_argument(
        "--compare-scale", help="second settling resolution the first must agree with"
    )
    val.add_argument("--mesh", help="mesh file of the bunny table")
    val.add_argument("--reference-dir", help="directory of digitized settling curves")
    val.add_argument("--workers", type=int)
    val.add_argument("--out", help="output directory")
    val.set_defaults(handler=cmd_validate)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    try:
        return args.handler(args)
    except ValidationError as exc:
        print(f"invalid configuration:\n{format_validation_error(exc)}", file=sys.stderr)
        return EXIT_CONFIG
    except (BoundaryConfigError, MeshError, GeometryCacheError, ValidationSuiteError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvalidStateError as exc:
        print(f"invalid state: {exc}", file=sys.stderr)
        return EXIT_INVALID_STATE
    except GeometryResourceError as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except OutputError as exc:
        print(f"output error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE


if __name__ == "__main__":
    sys.exit(main())
