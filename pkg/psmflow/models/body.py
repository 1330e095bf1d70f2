"""Rigid bodies and their motion modes."""

from dataclasses import dataclass, field

import numpy as np

from psmflow.models.mesh import GeometryField, Pose


@dataclass
class PrescribedMotion:
    """Fixed-rate rotation about an axis through the center of mass plus drift.

    Attributes:
        axis: Rotation axis (normalized on construction).
        rate: Angular rate in rad/s (positive is counter-clockwise about ``axis``).
        velocity: Constant translation velocity in m/s.
    """

    axis: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    rate: float = 0.0
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self) -> None:
        axis = np.asarray(self.axis, dtype=np.float64)
        norm = float(np.linalg.norm(axis))
        if norm == 0.0:
            raise ValueError("rotation axis must be non-zero")
        self.axis = axis / norm
        self.velocity = np.asarray(self.velocity, dtype=np.float64)

    @property
    def is_static(self) -> bool:
        return self.rate == 0.0 and not np.any(self.velocity)

    @property
    def angular_velocity(self) -> np.ndarray:
        return self.axis * self.rate


@dataclass
class DynamicMotion:
    """Free motion driven by gravity, buoyancy and the hydrodynamic load.

    Attributes:
        density: Solid density in kg/m^3.
        gravity: Gravitational acceleration in m/s^2.
        smoothing: Exponential smoothing factor for the hydrodynamic force,
            0 disables it.
        rotate: Integrate the rotational degrees of freedom.
    """

    density: float
    gravity: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, -9.81]))
    smoothing: float = 0.0
    rotate: bool = True

    def __post_init__(self) -> None:
        self.gravity = np.asarray(self.gravity, dtype=np.float64)
        if not 0.0 <= self.smoothing < 1.0:
            raise ValueError(f"smoothing must lie in [0, 1), got {self.smoothing}")


@dataclass
class BodyForces:
    """Loads acting on a body in SI units.

    Attributes:
        hydro_force: Hydrodynamic force in N.
        hydro_torque: Hydrodynamic torque about the center of mass in N m.
        external_force: Gravity plus buoyancy in N.
    """

    hydro_force: np.ndarray = field(default_factory=lambda: np.zeros(3))
    hydro_torque: np.ndarray = field(default_factory=lambda: np.zeros(3))
    external_force: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def is_finite(self) -> bool:
        return bool(
            np.all(np.isfinite(self.hydro_force))
            and np.all(np.isfinite(self.hydro_torque))
            and np.all(np.isfinite(self.external_force))
        )


@dataclass
class RigidBody:
    """A rigid body carried through the simulation.

    The geometry field lives in the body frame, whose origin is the center of
    mass, so ``pose.translation`` is the center of mass in the simulation frame.

    Attributes:
        name: Label used in logs and output columns.
        geometry: Voxelized shape in the body frame.
        initial_pose: Pose at step 0.
        pose: Current pose.
        velocity: Linear velocity v in m/s.
        omega: Angular velocity in rad/s (simulation frame).
        mass: Mass in kg.
        inertia: Inertia tensor about the center of mass in the body frame (kg m^2).
        volume: Body volume in m^3.
        motion: Prescribed or dynamic motion mode.
        body_id: Index of the body in the simulation.
        forces: Loads from the latest step.
    """

    name: str
    geometry: GeometryField
    initial_pose: Pose
    mass: float
    inertia: np.ndarray
    volume: float
    motion: PrescribedMotion | DynamicMotion
    body_id: int = 0
    pose: Pose = field(default=None)  # type: ignore[assignment]
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    omega: np.ndarray = field(default_factory=lambda: np.zeros(3))
    forces: BodyForces = field(default_factory=BodyForces)
    smoothed_force: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.pose is None:
            start = self.initial_pose
            self.pose = Pose(start.rotation.copy(), start.translation.copy())
        self.inertia = np.asarray(self.inertia, dtype=np.float64)
        if isinstance(self.motion, PrescribedMotion):
            self.velocity = self.motion.velocity.copy()
            self.omega = self.motion.angular_velocity.copy()

    @property
    def center_of_mass(self) -> np.ndarray:
        return self.pose.translation

    @property
    def is_dynamic(self) -> bool:
        return isinstance(self.motion, DynamicMotion)

    @property
    def is_static(self) -> bool:
        return isinstance(self.motion, PrescribedMotion) and self.motion.is_static

    def world_inertia(self) -> np.ndarray:
        """Inertia tensor rotated into the simulation frame, R I R^T."""
        r = self.pose.rotation
        return r @ self.inertia @ r.T
