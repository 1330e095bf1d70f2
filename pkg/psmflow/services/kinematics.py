"""Rigid-body kinematics, dynamics and mass properties.

Orientation algebra uses ``scipy.spatial.transform.Rotation``. Prescribed
poses are evaluated in closed form from the step index; dynamic bodies are
advanced with semi-implicit Euler and re-orthonormalized every step.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation

from psmflow.models.body import BodyForces, DynamicMotion, PrescribedMotion, RigidBody
from psmflow.models.mesh import Pose, TriangleMesh

logger = logging.getLogger(__name__)


@dataclass
class MassProperties:
    """Mass properties of a homogeneous solid.

    Attributes:
        volume: Volume in m^3.
        center: Center of mass, shape (3,).
        mass: Mass in kg.
        inertia: Inertia tensor about ``center``, shape (3, 3).
    """

    volume: float
    center: np.ndarray
    mass: float
    inertia: np.ndarray


# second moment of the unit tetrahedron (0, e1, e2, e3), scaled by its determinant
_CANONICAL = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 120.0


def mass_properties(mesh: TriangleMesh, density: float) -> MassProperties:
    """Volume, center of mass and central inertia of a closed mesh.

    Sums signed tetrahedra spanned by the origin and each outward-oriented face.

    Raises:
        ValueError: If the enclosed volume is not positive (open or inverted mesh).
    """
    tri = mesh.triangles
    a, b, c = tri[:, 0], tri[:, 1], tri[:, 2]
    det = np.einsum("ij,ij->i", a, np.cross(b, c))
    volume = math.fsum(det) / 6.0
    if not volume > 0.0:
        raise ValueError(f"mesh {mesh.name!r} encloses volume {volume}; check orientation")
    center = (det[:, None] * (a + b + c)).sum(axis=0) / (24.0 * volume)
    second = np.einsum("n,nia,ij,njb->ab", det, tri, _CANONICAL, tri)
    central = second - volume * np.outer(center, center)
    inertia = density * (np.trace(central) * np.eye(3) - central)
    return MassProperties(volume=volume, center=center, mass=density * volume, inertia=inertia)


def sphere_mass_properties(radius: float, density: float) -> MassProperties:
    """Analytic mass properties of a solid sphere centered at the origin."""
    volume = 4.0 / 3.0 * math.pi * radius**3
    mass = density * volume
    return MassProperties(
        volume=volume, center=np.zeros(3), mass=mass, inertia=0.4 * mass * radius**2 * np.eye(3)
    )


def rigid_velocity(
    velocity: np.ndarray, omega: np.ndarray, center: np.ndarray, points: np.ndarray
) -> np.ndarray:
    """v + omega x (x - R) for points of shape (n, 3)."""
    return velocity + np.cross(omega, np.asarray(points) - center)


def solid_velocity_at(body: RigidBody, points: np.ndarray, dx: float, dt: float) -> np.ndarray:
    """Solid velocity of ``body`` at simulation-frame points, in lattice units.

    Args:
        body: Body with its current pose and velocities.
        points: Positions in meters, shape (n, 3).
        dx: Cell size in meters.
        dt: Time step in seconds.

    Returns:
        Velocities of shape (n, 3) scaled by dt / dx.
    """
    return rigid_velocity(body.velocity, body.omega, body.center_of_mass, points) * (dt / dx)


def prescribed_pose(initial: Pose, motion: PrescribedMotion, time: float) -> Pose:
    """Closed-form pose of a prescribed motion at ``time``."""
    turn = Rotation.from_rotvec(motion.axis * (motion.rate * time))
    return Pose(
        rotation=turn.as_matrix() @ initial.rotation,
        translation=initial.translation + motion.velocity * time,
    )


def advance_prescribed(body: RigidBody, step: int, dt: float) -> Pose:
    """Set and return the pose of a prescribed body at step ``step``.

    Raises:
        TypeError: If the body is not in prescribed mode.
    """
    if not isinstance(body.motion, PrescribedMotion):
        raise TypeError(f"body {body.name!r} is not in prescribed mode")
    body.pose = prescribed_pose(body.initial_pose, body.motion, step * dt)
    return body.pose


def external_force(body: RigidBody, rho_f: float) -> np.ndarray:
    """Gravity plus analytic buoyancy, (rho_s - rho_f) V g."""
    if not isinstance(body.motion, DynamicMotion):
        return np.zeros(3)
    return (body.motion.density - rho_f) * body.volume * body.motion.gravity


def orthonormalize(rotation: np.ndarray) -> np.ndarray:
    """Nearest proper rotation by QR with a positive-diagonal sign fix."""
    q, r = np.linalg.qr(rotation)
    return q * np.sign(np.diag(r))


def integrate_dynamic(body: RigidBody, forces: BodyForces, dt: float) -> RigidBody:
    """Advance a dynamic body by one semi-implicit Euler step.

    Velocities are updated first from the current loads, positions and
    orientation then move with the updated velocities.

    Raises:
        TypeError: If the body is not in dynamic mode.
        ValueError: If the mass is not positive or a load is not finite.
    """
    motion = body.motion
    if not isinstance(motion, DynamicMotion):
        raise TypeError(f"body {body.name!r} is not in dynamic mode")
    if not body.mass > 0.0:
        raise ValueError(f"body {body.name!r} has mass {body.mass}")
    if not forces.is_finite():
        raise ValueError(f"non-finite load on body {body.name!r}")

    hydro = forces.hydro_force
    if motion.smoothing > 0.0:
        if body.smoothed_force is None:
            body.smoothed_force = hydro.copy()
        else:
            body.smoothed_force = (
                motion.smoothing * body.smoothed_force + (1.0 - motion.smoothing) * hydro
            )
        hydro = body.smoothed_force

    body.forces = forces
    body.velocity = body.velocity + (hydro + forces.external_force) / body.mass * dt
    translation = body.pose.translation + body.velocity * dt

    rotation = body.pose.rotation
    if motion.rotate:
        alpha = np.linalg.solve(body.world_inertia(), forces.hydro_torque)
        body.omega = body.omega + alpha * dt
        rotation = orthonormalize(Rotation.from_rotvec(body.omega * dt).as_matrix() @ rotation)
    body.pose = Pose(rotation=rotation, translation=translation)
    return body
