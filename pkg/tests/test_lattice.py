"""Tests for stencils and the local lattice operators.

These tests verify:
- Stencil weights, opposites and isotropy
- Equilibrium moments and the Mach-number warning
- SRT/TRT conservation
- The three solid collision operators
- Overlap-to-fraction weighting and its range checks
"""

import logging

import numpy as np
import pytest
from hypothesis import given, settings as hyp_settings
from hypothesis import strategies as st

from psmflow.models.fields import InvalidStateError, RelaxationParams
from psmflow.models.stencil import CS2, D2Q9, D3Q19, get_stencil
from psmflow.services.lattice import (
    FractionMode,
    FractionRangeError,
    SolidCollision,
    equilibrium,
    guo_source,
    macroscopic,
    solid_collision,
    srt_collide,
    trt_term,
    weight_fraction,
)


class TestStencil:
    """Tests for the DdQq velocity sets."""

    def test_weights_sum_to_one(self, stencil):
        """Test that lattice weights are normalized."""
        assert stencil.w.sum() == pytest.approx(1.0, abs=1e-15)

    def test_direction_counts(self):
        """Test the number of directions of each stencil."""
        assert D2Q9.q == 9
        assert D3Q19.q == 19

    def test_opposite_reverses_velocity(self, stencil):
        """Test that c[opposite[i]] == -c[i] for every direction."""
        assert np.array_equal(stencil.c[stencil.opposite], -stencil.c)

    def test_rest_direction_first(self, stencil):
        """Test that direction 0 is the rest population."""
        assert not stencil.c[0].any()

    def test_second_moment_isotropic(self, stencil):
        """Test that sum w c c equals cs2 times identity."""
        assert stencil.isotropy_defect() < 1e-15

    def test_get_stencil_case_insensitive(self):
        """Test lookup by lower-case name."""
        assert get_stencil("d3q19") is D3Q19

    def test_get_stencil_unknown(self):
        """Test that unsupported stencils raise KeyError."""
        with pytest.raises(KeyError, match="D3Q27"):
            get_stencil("D3Q27")

    def test_arrays_read_only(self):
        """Test that shared stencil arrays cannot be modified."""
        with pytest.raises(ValueError):
            D3Q19.w[0] = 0.5


class TestEquilibrium:
    """Tests for the second-order equilibrium."""

    def test_moments_match_inputs(self, stencil, rng):
        """Test that feq reproduces rho and rho * u."""
        n = 50
        rho = 1.0 + 0.1 * rng.uniform(-1, 1, n)
        u = np.zeros((3, n))
        u[: stencil.dim] = 0.08 * rng.uniform(-1, 1, (stencil.dim, n))
        feq = equilibrium(u, rho, stencil)
        assert np.allclose(feq.sum(axis=0), rho, rtol=0, atol=1e-14)
        mom = np.einsum("ia,in->an", stencil.cf, feq)
        assert np.allclose(mom, rho * u, rtol=0, atol=1e-14)

    def test_rest_state_is_weights(self, stencil):
        """Test that feq at rest with unit density equals the weights."""
        feq = equilibrium(np.zeros((3, 1)), np.ones(1), stencil)
        assert np.allclose(feq[:, 0], stencil.w)

    def test_negative_kinetic_term(self, d2q9):
        """Test the -u.u/(2 cs2) sign of the rest population."""
        u = np.array([[0.1], [0.0], [0.0]])
        feq = equilibrium(u, np.ones(1), d2q9)
        assert feq[0, 0] == pytest.approx(d2q9.w[0] * (1.0 - 0.01 / (2.0 * CS2)))

    def test_warns_above_speed_of_sound(self, d3q19, caplog):
        """Test that a supersonic velocity logs a warning."""
        with caplog.at_level(logging.WARNING):
            equilibrium(np.array([[0.7], [0.0], [0.0]]), np.ones(1), d3q19)
        assert "speed of sound" in caplog.text


class TestMacroscopic:
    """Tests for density and velocity moments."""

    def test_roundtrip_with_equilibrium(self, d3q19):
        """Test that moments of feq(rho, u) give back rho and u."""
        rho = np.array([0.9, 1.1])
        u = np.array([[0.01, -0.02], [0.03, 0.0], [-0.01, 0.02]])
        r, v = macroscopic(equilibrium(u, rho, d3q19), d3q19)
        assert np.allclose(r, rho, atol=1e-15)
        assert np.allclose(v, u, atol=1e-15)

    def test_half_force_shift(self, d2q9):
        """Test that the Guo velocity includes F / (2 rho)."""
        f = equilibrium(np.zeros((3, 1)), np.ones(1), d2q9)
        _, u = macroscopic(f, d2q9, force=np.array([1e-4, 0.0, 0.0]))
        assert u[0, 0] == pytest.approx(5e-5)

    def test_non_positive_density_raises(self, d2q9):
        """Test that a zero density cell raises InvalidStateError."""
        f = np.zeros((9, 3))
        f[:, 0] = d2q9.w
        f[:, 2] = d2q9.w
        with pytest.raises(InvalidStateError, match="non-positive density"):
            macroscopic(f, d2q9)

    def test_nan_reported_as_non_finite(self, d2q9):
        """Test that NaN PDFs are reported as non-finite."""
        f = np.tile(d2q9.w[:, None], (1, 2))
        f[3, 1] = np.nan
        with pytest.raises(InvalidStateError, match="non-finite"):
            macroscopic(f, d2q9)


class TestFluidCollision:
    """Tests for SRT and TRT."""

    def test_srt_conserves_mass_and_momentum(self, stencil, rng):
        """Test that SRT leaves the first two moments unchanged."""
        f = np.abs(rng.normal(stencil.w[:, None], 0.01, (stencil.q, 20)))
        rho, u = macroscopic(f, stencil)
        post = srt_collide(f, 0.8, rho, u, stencil)
        assert np.allclose(post.sum(axis=0), rho, atol=1e-14)
        assert np.allclose(
            np.einsum("ia,in->an", stencil.cf, post), rho * u, atol=1e-14
        )

    def test_srt_rejects_unstable_tau(self, d2q9):
        """Test that tau <= 1/2 is rejected."""
        f = np.tile(d2q9.w[:, None], (1, 1))
        with pytest.raises(ValueError, match="tau"):
            srt_collide(f, 0.5, np.ones(1), np.zeros((3, 1)), d2q9)

    def test_trt_conserves_moments(self, d3q19, rng):
        """Test that the TRT term has zero mass and momentum."""
        f = np.abs(rng.normal(d3q19.w[:, None], 0.01, (19, 10)))
        rho, u = macroscopic(f, d3q19)
        omega = trt_term(f, equilibrium(u, rho, d3q19), RelaxationParams(0.9), d3q19)
        assert np.allclose(omega.sum(axis=0), 0.0, atol=1e-15)
        assert np.allclose(np.einsum("ia,in->an", d3q19.cf, omega), 0.0, atol=1e-15)

    def test_trt_magic_sets_odd_rate(self):
        """Test omega_minus for Lambda = 3/16 at tau = 1."""
        params = RelaxationParams(1.0, magic=3.0 / 16.0)
        assert params.omega_minus == pytest.approx(1.0 / (0.375 + 0.5))

    def test_guo_source_momentum(self, d2q9):
        """Test that the Guo source injects (1 - 1/(2 tau)) F of momentum."""
        force = np.array([1e-3, -2e-3, 0.0])
        src = guo_source(np.zeros((3, 1)), force, 1.0, d2q9)
        assert src.sum() == pytest.approx(0.0, abs=1e-18)
        mom = np.einsum("ia,in->a", d2q9.cf, src)
        assert np.allclose(mom, 0.5 * force, atol=1e-18)


class TestSolidCollision:
    """Tests for the SC1, SC2 and SC3 operators."""

    @pytest.mark.parametrize("variant", list(SolidCollision))
    def test_conserves_mass(self, variant, d3q19, rng):
        """Test that every variant has zero mass moment."""
        f = np.abs(rng.normal(d3q19.w[:, None], 0.01, (19, 8)))
        rho, u = macroscopic(f, d3q19)
        u_s = 0.02 * rng.uniform(-1, 1, (3, 8))
        omega = solid_collision(variant, f, rho, u, u_s, 0.8, d3q19)
        assert np.allclose(omega.sum(axis=0), 0.0, atol=1e-14)

    @pytest.mark.parametrize("variant", list(SolidCollision))
    def test_zero_at_matching_equilibrium(self, variant, stencil):
        """Test that a fluid at equilibrium with the solid velocity feels nothing."""
        u = np.zeros((3, 1))
        u[0] = 0.03
        rho = np.ones(1)
        f = equilibrium(u, rho, stencil)
        omega = solid_collision(variant, f, rho, u, u.copy(), 0.7, stencil)
        assert np.allclose(omega, 0.0, atol=1e-16)

    def test_sc2_relaxes_toward_solid_equilibrium(self, d2q9, rng):
        """Test SC2 = feq(u_s) - f + (1 - 1/tau)(f - feq(u_s)) with a distinct fluid velocity."""
        f = np.abs(rng.normal(d2q9.w[:, None], 0.01, (9, 4)))
        rho, u = macroscopic(f, d2q9)
        u[0] += 0.04
        u_s = np.zeros((3, 4))
        u_s[1] = 0.02
        tau = 0.8
        feq_s = equilibrium(u_s, rho, d2q9)
        expected = (feq_s - f) + (1.0 - 1.0 / tau) * (f - feq_s)
        got = solid_collision("SC2", f, rho, u, u_s, tau, d2q9)
        assert np.allclose(got, expected, atol=1e-16)

    def test_sc2_ignores_fluid_velocity(self, d2q9, rng):
        """Test that SC2 depends on the fluid state only through f and rho."""
        f = np.abs(rng.normal(d2q9.w[:, None], 0.01, (9, 2)))
        rho, u = macroscopic(f, d2q9)
        u_s = np.zeros((3, 2))
        a = solid_collision("SC2", f, rho, u, u_s, 0.9, d2q9)
        b = solid_collision("SC2", f, rho, u + 0.05, u_s, 0.9, d2q9)
        assert np.array_equal(a, b)

    def test_sc2_full_solid_relaxes_to_solid_velocity(self, d2q9, rng):
        """Test that with B = 1 the SC2 update gives feq(u_s) plus scaled non-equilibrium."""
        f = np.abs(rng.normal(d2q9.w[:, None], 0.01, (9, 3)))
        rho, u = macroscopic(f, d2q9)
        u_s = np.zeros((3, 3))
        post = f + solid_collision("SC2", f, rho, u, u_s, 1.0, d2q9)
        assert np.allclose(post, equilibrium(u_s, rho, d2q9), atol=1e-15)

    def test_sc3_pushes_momentum_toward_solid(self, d2q9):
        """Test that SC3 on a moving fluid over a resting solid removes x momentum."""
        u = np.zeros((3, 1))
        u[0] = 0.05
        rho = np.ones(1)
        f = equilibrium(u, rho, d2q9)
        omega = solid_collision("SC3", f, rho, u, np.zeros((3, 1)), 0.8, d2q9)
        assert np.einsum("i,in->", d2q9.cf[:, 0], omega) < 0.0


class TestWeightFraction:
    """Tests for the epsilon -> B mapping."""

    def test_direct_is_identity(self):
        """Test that direct mode returns epsilon."""
        eps = np.array([0.0, 0.25, 1.0])
        assert np.array_equal(weight_fraction(eps, 0.8, "direct"), eps)

    def test_weighted_values(self):
        """Test the weighted formula at tau = 1."""
        b = weight_fraction(np.array([0.0, 0.5, 1.0]), 1.0, FractionMode.WEIGHTED)
        assert np.allclose(b[[0, 2]], [0.0, 1.0])
        assert b[1] == pytest.approx(0.5 * 0.5 / (0.5 + 0.5))

    @given(
        eps=st.floats(0.0, 1.0),
        tau=st.floats(0.51, 3.0),
    )
    @hyp_settings(max_examples=100, deadline=None)
    def test_weighted_stays_in_unit_interval(self, eps, tau):
        """Test that weighted B lies in [0, 1] and never exceeds epsilon."""
        b = float(weight_fraction(eps, tau, "weighted"))
        assert 0.0 <= b <= 1.0
        assert b <= eps + 1e-15

    def test_tiny_excursion_clamped(self):
        """Test that values within tolerance outside [0, 1] are clamped."""
        b = weight_fraction(np.array([-1e-12, 1.0 + 1e-12]), 0.8)
        assert np.array_equal(b, [0.0, 1.0])

    def test_out_of_range_rejected(self):
        """Test that epsilon beyond tolerance raises FractionRangeError."""
        with pytest.raises(FractionRangeError):
            weight_fraction(np.array([1.1]), 0.8)

    def test_custom_tolerance(self):
        """Test that a wider tolerance accepts and clamps larger excursions."""
        b = weight_fraction(np.array([1.05]), 0.8, tolerance=0.1)
        assert b[0] == 1.0
