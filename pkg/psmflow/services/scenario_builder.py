"""Turn a validated scenario into a ready-to-run simulation."""

import logging
import math
from collections.abc import Sequence
from pathlib import Path

import numpy as np
from scipy.spatial.transform import Rotation

from psmflow.config import settings
from psmflow.models.body import DynamicMotion, PrescribedMotion, RigidBody
from psmflow.models.domain import Domain, FaceBoundary
from psmflow.models.mesh import GeometryField, Pose, TriangleMesh
from psmflow.models.stencil import get_stencil
from psmflow.schemas.scenario import BodyConfig, DomainConfig, ScenarioConfig
from psmflow.services.engine import Numerics, Observer, Simulation
from psmflow.services.kinematics import MassProperties, mass_properties, sphere_mass_properties
from psmflow.services.mesh_io import load_mesh
from psmflow.services.primitives import make_primitive
from psmflow.services.voxelizer import read_geometry_cache, voxelize
from psmflow.utils.units import UnitConverter

logger = logging.getLogger(__name__)


def build_domain(config: DomainConfig) -> Domain:
    """Domain with lattice-unit face velocities."""
    dt = config.time_step
    units = UnitConverter(config.dx, dt, config.rho_f)
    faces = {
        name: FaceBoundary(
            kind=spec.kind,
            velocity=tuple(  # type: ignore[arg-type]
                float(v) for v in units.velocity_to_lattice(spec.velocity)
            ),
            density=spec.density,
        )
        for name, spec in config.boundaries.items()
    }
    return Domain(
        dims=config.extents, dx=config.dx, dt=dt, rho_f=config.rho_f, nu=config.nu, faces=faces
    )


def body_mesh(config: BodyConfig, base_dir: Path, strict: bool | None = None) -> TriangleMesh:
    """Mesh of a body in meters, before recentering."""
    if config.primitive is not None:
        primitive = config.primitive
        return make_primitive(primitive.kind, primitive.size, **primitive.options)
    path = Path(config.mesh)  # type: ignore[arg-type]
    if not path.is_absolute():
        path = base_dir / path
    mesh = load_mesh(path, strict=strict)
    return mesh.scaled(config.mesh_scale) if config.mesh_scale != 1.0 else mesh


def body_properties(config: BodyConfig, mesh: TriangleMesh) -> MassProperties:
    """Mass properties; analytic for sphere primitives."""
    density = config.motion.density if config.motion.kind == "dynamic" else 1.0
    if config.primitive is not None and config.primitive.kind == "sphere":
        return sphere_mass_properties(config.primitive.size / 2.0, density)
    return mass_properties(mesh, density)


def body_geometry(
    config: BodyConfig, mesh: TriangleMesh, dx: float, base_dir: Path, strict: bool | None
) -> GeometryField:
    """Geometry field from the cache when it matches, otherwise voxelized."""
    if config.geometry_cache:
        path = Path(config.geometry_cache)
        if not path.is_absolute():
            path = base_dir / path
        if path.exists():
            geom = read_geometry_cache(path)
            if geom.s == config.s and math.isclose(geom.dx_lbm, dx, rel_tol=1e-12):
                logger.info(f"Using geometry cache {path} for body {config.name!r}")
                return geom
            logger.warning(f"Geometry cache {path} does not match s={config.s}, dx={dx}; ignoring")
    return voxelize(mesh, dx, config.s, strict=strict)


def build_body(
    config: BodyConfig, dx: float, base_dir: Path, strict: bool | None = None
) -> RigidBody:
    """Rigid body with its mesh recentered on the center of mass."""
    mesh = body_mesh(config, base_dir, strict)
    props = body_properties(config, mesh)
    mesh = mesh.translated(-props.center)
    geometry = body_geometry(config, mesh, dx, base_dir, strict)

    if config.motion.kind == "dynamic":
        motion: PrescribedMotion | DynamicMotion = DynamicMotion(
            density=config.motion.density,
            gravity=np.asarray(config.motion.gravity),
            smoothing=config.motion.smoothing,
            rotate=config.motion.rotate,
        )
    else:
        motion = PrescribedMotion(
            axis=np.asarray(config.motion.axis),
            rate=config.motion.rate,
            velocity=np.asarray(config.motion.velocity),
        )
    pose = Pose(
        rotation=Rotation.from_rotvec(config.orientation).as_matrix(),
        translation=np.asarray(config.position),
    )
    return RigidBody(
        name=config.name,
        geometry=geometry,
        initial_pose=pose,
        mass=props.mass,
        inertia=props.inertia,
        volume=props.volume,
        motion=motion,
    )


def build_simulation(
    config: ScenarioConfig,
    base_dir: str | Path = ".",
    workers: int | None = None,
    observers: Sequence[Observer] = (),
    strict: bool | None = None,
) -> Simulation:
    """Build the simulation described by ``config``.

    Args:
        config: Validated scenario.
        base_dir: Directory that relative mesh and cache paths refer to.
        workers: Worker count; defaults to the scenario's, then ``settings.WORKERS``.
        observers: Callbacks run after every step.
        strict: Mesh topology strictness; defaults to ``settings.STRICT_MESH``.
    """
    base_dir = Path(base_dir)
    domain = build_domain(config.domain)
    units = UnitConverter(domain.dx, domain.dt, domain.rho_f)
    bodies = [build_body(b, domain.dx, base_dir, strict) for b in config.bodies]

    force = None
    if config.domain.body_force is not None:
        force = tuple(float(v) for v in units.acceleration_to_lattice(config.domain.body_force))
    numerics = Numerics(
        solid_collision=config.numerics.solid_collision,
        fraction_mode=config.numerics.fraction_mode,
        collision=config.numerics.collision,
        magic=config.numerics.magic,
        body_force=force,  # type: ignore[arg-type]
    )
    speed = max(
        [float(np.linalg.norm(config.domain.initial_velocity))]
        + [float(np.linalg.norm(f.velocity)) for f in config.domain.boundaries.values()]
    )
    units.log_summary(domain.nu, speed)

    if workers is None:
        workers = config.execution.workers if config.execution.workers > 1 else settings.WORKERS
    return Simulation(
        domain,
        get_stencil(config.numerics.stencil),
        bodies,
        numerics,
        workers=workers,
        initial_velocity=units.velocity_to_lattice(config.domain.initial_velocity),
        observers=observers,
    )
