"""Tests for rigid-body mass properties, poses and time integration.

These tests verify:
- Mesh mass properties against closed-form values
- Prescribed poses in closed form and after a full revolution
- Divergence-free rigid velocity fields
- Semi-implicit Euler updates, force smoothing and re-orthonormalization
- Motion-mode and load validation
"""

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from psmflow.models.body import BodyForces, DynamicMotion, PrescribedMotion, RigidBody
from psmflow.models.mesh import GeometryField, Pose
from psmflow.services.kinematics import (
    advance_prescribed,
    external_force,
    integrate_dynamic,
    mass_properties,
    orthonormalize,
    prescribed_pose,
    rigid_velocity,
    solid_velocity_at,
    sphere_mass_properties,
)
from psmflow.services.primitives import cube, icosphere


def make_body(
    motion, mass=1.0, volume=1e-3, inertia=None, position=(0.0, 0.0, 0.0)
) -> RigidBody:
    """Body with an empty geometry field; only its kinematics matter here."""
    geometry = GeometryField(s=0, dx_lbm=1.0, origin=np.zeros(3), bits=np.zeros((1, 1, 1)))
    return RigidBody(
        name="body",
        geometry=geometry,
        initial_pose=Pose(translation=np.asarray(position, dtype=np.float64)),
        mass=mass,
        inertia=np.eye(3) * 1e-4 if inertia is None else inertia,
        volume=volume,
        motion=motion,
    )


class TestMassProperties:
    """Tests for mass_properties and sphere_mass_properties."""

    def test_cube(self):
        """Test volume, center and inertia of a 2 m cube."""
        props = mass_properties(cube(2.0), 1000.0)
        assert props.volume == pytest.approx(8.0)
        assert props.mass == pytest.approx(8000.0)
        assert np.allclose(props.center, 0.0, atol=1e-14)
        assert np.allclose(props.inertia, np.eye(3) * 8000.0 * 8.0 / 12.0)

    def test_offset_cube_center(self):
        """Test that the center follows a translation and inertia stays central."""
        props = mass_properties(cube(1.0).translated([3.0, -1.0, 2.0]), 1.0)
        assert np.allclose(props.center, [3.0, -1.0, 2.0])
        assert np.allclose(props.inertia, np.eye(3) / 6.0)

    def test_icosphere_approaches_sphere(self):
        """Test that a fine icosphere is within 1% of the analytic sphere."""
        props = mass_properties(icosphere(0.5, 4), 1120.0)
        exact = sphere_mass_properties(0.5, 1120.0)
        assert props.volume == pytest.approx(exact.volume, rel=0.01)
        assert np.allclose(np.diag(props.inertia), np.diag(exact.inertia), rtol=0.02)

    def test_inverted_mesh_rejected(self):
        """Test that inward-facing triangles give a ValueError."""
        with pytest.raises(ValueError, match="check orientation"):
            mass_properties(cube(1.0).flipped(), 1.0)


class TestPrescribedMotion:
    """Tests for closed-form prescribed poses."""

    def test_rotation_and_drift(self):
        """Test a quarter turn about z with constant drift."""
        motion = PrescribedMotion(
            axis=np.array([0.0, 0.0, 2.0]), rate=np.pi / 2, velocity=[1.0, 0.0, 0.0]
        )
        pose = prescribed_pose(Pose(translation=np.array([0.0, 1.0, 0.0])), motion, 1.0)
        assert np.allclose(pose.rotation @ [1.0, 0.0, 0.0], [0.0, 1.0, 0.0])
        assert np.allclose(pose.translation, [1.0, 1.0, 0.0])

    def test_advance_uses_step_time(self):
        """Test that the pose at step n equals the pose at time n * dt."""
        motion = PrescribedMotion(axis=np.array([1.0, 1.0, 0.0]), rate=0.3)
        body = make_body(motion)
        pose = advance_prescribed(body, 7, 0.5)
        expected = Rotation.from_rotvec(motion.axis * 0.3 * 3.5).as_matrix()
        assert np.allclose(pose.rotation, expected)
        assert body.pose is pose

    def test_body_velocity_from_motion(self):
        """Test that prescribed bodies carry the motion's velocities."""
        body = make_body(PrescribedMotion(rate=2.0, velocity=[0.0, 0.5, 0.0]))
        assert np.allclose(body.omega, [0.0, 0.0, 2.0])
        assert np.allclose(body.velocity, [0.0, 0.5, 0.0])
        assert not body.is_static

    def test_static_body(self):
        """Test that zero rate and drift mark a body static."""
        assert make_body(PrescribedMotion()).is_static

    def test_zero_axis_rejected(self):
        """Test that a zero rotation axis raises ValueError."""
        with pytest.raises(ValueError, match="non-zero"):
            PrescribedMotion(axis=np.zeros(3))

    def test_advance_rejects_dynamic_body(self):
        """Test that dynamic bodies cannot be advanced in closed form."""
        with pytest.raises(TypeError, match="prescribed"):
            advance_prescribed(make_body(DynamicMotion(density=1000.0)), 1, 0.1)

    @pytest.mark.parametrize("axis", [[0.0, 0.0, 1.0], [1.0, 2.0, -0.5]])
    def test_full_revolution_returns_to_identity(self, axis):
        """Test that one full turn restores the initial orientation to 1e-12."""
        rate = 0.7
        motion = PrescribedMotion(axis=np.array(axis), rate=rate)
        pose = prescribed_pose(Pose(), motion, 2.0 * np.pi / rate)
        assert np.max(np.abs(pose.rotation - np.eye(3))) < 1e-12
        assert np.allclose(pose.translation, 0.0)

    def test_stepped_revolution_returns_to_identity(self):
        """Test that stepping through a full turn lands on the identity."""
        steps, dt = 400, 0.01
        motion = PrescribedMotion(axis=np.array([0.0, 1.0, 1.0]), rate=2.0 * np.pi / (steps * dt))
        body = make_body(motion)
        for step in range(steps + 1):
            pose = advance_prescribed(body, step, dt)
        assert np.max(np.abs(pose.rotation - np.eye(3))) < 1e-12


class TestSolidVelocity:
    """Tests for rigid-body velocity fields."""

    def test_rotation_about_center(self):
        """Test v = omega x r for a spin about z."""
        omega = np.array([0.0, 0.0, 1.0])
        v = rigid_velocity(np.zeros(3), omega, np.zeros(3), np.array([[1.0, 0.0, 0.0]]))
        assert np.allclose(v, [[0.0, 1.0, 0.0]])

    def test_lattice_scaling(self):
        """Test that velocities are scaled by dt / dx."""
        body = make_body(PrescribedMotion(velocity=[0.2, 0.0, 0.0]), position=(1.0, 1.0, 1.0))
        v = solid_velocity_at(body, np.array([[1.0, 1.0, 1.0]]), dx=0.01, dt=1e-3)
        assert np.allclose(v, [[0.02, 0.0, 0.0]])

    def test_rigid_field_is_divergence_free(self):
        """Test that central differences of v + omega x r sum to zero divergence."""
        h = 0.1
        axis = np.arange(-1.0, 1.0 + h / 2, h)
        x, y, z = np.meshgrid(axis, axis, axis, indexing="ij")
        points = np.stack([x.ravel(), y.ravel(), z.ravel()], axis=1)
        velocity = np.array([0.3, -0.2, 0.1])
        omega = np.array([0.5, -1.5, 2.0])
        center = np.array([0.2, 0.1, -0.3])
        v = rigid_velocity(velocity, omega, center, points).reshape(x.shape + (3,))
        divergence = sum(np.gradient(v[..., a], h, axis=a) for a in range(3))
        assert np.max(np.abs(divergence)) < 1e-12

    def test_body_field_is_divergence_free(self):
        """Test that the lattice-unit solid velocity of a spinning body has no divergence."""
        motion = PrescribedMotion(axis=np.array([1.0, -1.0, 2.0]), rate=3.0, velocity=[0.1, 0, 0])
        body = make_body(motion, position=(0.5, 0.5, 0.5))
        h = 0.05
        axis = np.arange(0.0, 1.0 + h / 2, h)
        x, y, z = np.meshgrid(axis, axis, axis, indexing="ij")
        points = np.stack([x.ravel(), y.ravel(), z.ravel()], axis=1)
        u_s = solid_velocity_at(body, points, dx=h, dt=1e-3).reshape(x.shape + (3,))
        divergence = sum(np.gradient(u_s[..., a], 1.0, axis=a) for a in range(3))
        assert np.max(np.abs(divergence)) < 1e-12


class TestDynamicIntegration:
    """Tests for semi-implicit Euler integration."""

    def test_buoyant_gravity(self):
        """Test (rho_s - rho_f) V g for a dynamic body and zero for prescribed ones."""
        body = make_body(DynamicMotion(density=1120.0), volume=2e-3)
        assert np.allclose(external_force(body, 1000.0), [0.0, 0.0, -120.0 * 2e-3 * 9.81])
        assert not external_force(make_body(PrescribedMotion()), 1000.0).any()

    def test_velocity_updates_before_position(self):
        """Test that the new position uses the updated velocity."""
        body = make_body(DynamicMotion(density=2000.0), mass=2.0)
        forces = BodyForces(external_force=np.array([0.0, 0.0, -4.0]))
        integrate_dynamic(body, forces, 0.1)
        assert np.allclose(body.velocity, [0.0, 0.0, -0.2])
        assert np.allclose(body.pose.translation, [0.0, 0.0, -0.02])

    def test_force_smoothing(self):
        """Test exponential smoothing of the hydrodynamic force."""
        body = make_body(DynamicMotion(density=1000.0, smoothing=0.5, rotate=False))
        integrate_dynamic(body, BodyForces(hydro_force=np.array([2.0, 0.0, 0.0])), 1.0)
        assert np.allclose(body.smoothed_force, [2.0, 0.0, 0.0])
        integrate_dynamic(body, BodyForces(hydro_force=np.array([0.0, 0.0, 0.0])), 1.0)
        assert np.allclose(body.smoothed_force, [1.0, 0.0, 0.0])
        assert np.allclose(body.velocity, [3.0, 0.0, 0.0])

    def test_torque_spins_body(self):
        """Test that a torque about z produces angular velocity about z."""
        body = make_body(DynamicMotion(density=1000.0), inertia=np.eye(3) * 0.5)
        integrate_dynamic(body, BodyForces(hydro_torque=np.array([0.0, 0.0, 1.0])), 0.1)
        assert np.allclose(body.omega, [0.0, 0.0, 0.2])
        assert body.pose.orthonormality_defect() < 1e-14

    def test_orientation_stays_orthonormal(self):
        """Test that many rotation steps keep R orthonormal."""
        body = make_body(DynamicMotion(density=1000.0), inertia=np.diag([1.0, 2.0, 3.0]))
        body.omega = np.array([0.3, -0.7, 1.1])
        for _ in range(500):
            integrate_dynamic(body, BodyForces(), 0.05)
        assert body.pose.orthonormality_defect() < 1e-12
        assert np.linalg.det(body.pose.rotation) == pytest.approx(1.0)

    def test_orthonormalize(self, rng):
        """Test that a perturbed rotation is mapped back to SO(3)."""
        r = Rotation.from_rotvec([0.1, 0.2, 0.3]).as_matrix() + 1e-6 * rng.normal(size=(3, 3))
        q = orthonormalize(r)
        assert np.allclose(q.T @ q, np.eye(3), atol=1e-14)
        assert np.linalg.det(q) > 0.0
        assert np.allclose(q, r, atol=1e-5)

    def test_non_finite_load_rejected(self):
        """Test that NaN loads raise ValueError."""
        body = make_body(DynamicMotion(density=1000.0))
        with pytest.raises(ValueError, match="non-finite"):
            integrate_dynamic(body, BodyForces(hydro_force=np.array([np.nan, 0.0, 0.0])), 0.1)

    def test_prescribed_body_rejected(self):
        """Test that prescribed bodies cannot be integrated."""
        with pytest.raises(TypeError, match="dynamic"):
            integrate_dynamic(make_body(PrescribedMotion()), BodyForces(), 0.1)

    def test_invalid_smoothing(self):
        """Test that smoothing must lie in [0, 1)."""
        with pytest.raises(ValueError, match="smoothing"):
            DynamicMotion(density=1000.0, smoothing=1.0)

    def test_improper_pose_rejected(self):
        """Test that a reflection is not accepted as a pose rotation."""
        with pytest.raises(ValueError, match="proper rotation"):
            Pose(rotation=np.diag([1.0, 1.0, -1.0]))
