"""Tests for the force and torque reductions.

These tests verify:
- Force and torque agree with a naive per-cell, per-direction loop
- Empty coverage gives zero loads
- The dx^3/dt prefactor
- Summation order does not change the result
"""

import numpy as np
import pytest
from hypothesis import given, settings as hyp_settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from psmflow.models.stencil import D2Q9, D3Q19
from psmflow.services.reductions import cell_momentum, reduce_force, reduce_torque

values = st.floats(-1.0, 1.0, allow_nan=False, allow_infinity=False)


def naive_force(fraction, omega_s, stencil):
    out = np.zeros(3)
    for s in range(len(fraction)):
        for i in range(stencil.q):
            out += fraction[s] * omega_s[s, i] * stencil.cf[i]
    return out


def naive_torque(fraction, omega_s, centers, com, stencil):
    out = np.zeros(3)
    for s in range(len(fraction)):
        mom = np.zeros(3)
        for i in range(stencil.q):
            mom += omega_s[s, i] * stencil.cf[i]
        out += fraction[s] * np.cross(centers[s] - com, mom)
    return out


class TestForceReduction:
    """Tests for reduce_force."""

    @given(data=st.data(), n=st.integers(1, 12))
    @hyp_settings(max_examples=50, deadline=None)
    def test_matches_naive_loop(self, data, n):
        """Test agreement with a double loop over cells and directions."""
        stencil = data.draw(st.sampled_from([D2Q9, D3Q19]))
        fraction = data.draw(arrays(np.float64, n, elements=st.floats(0.0, 1.0)))
        omega_s = data.draw(arrays(np.float64, (n, stencil.q), elements=values))
        got = reduce_force(fraction, omega_s, stencil)
        assert np.allclose(got, naive_force(fraction, omega_s, stencil), rtol=0, atol=1e-12)

    def test_empty_coverage(self, d3q19):
        """Test that no covered cells give a zero force."""
        got = reduce_force(np.zeros(0), np.zeros((0, 19)), d3q19)
        assert np.array_equal(got, np.zeros(3))

    def test_physical_prefactor(self, d3q19, rng):
        """Test scaling by dx^3 / dt."""
        fraction = rng.uniform(0, 1, 5)
        omega_s = rng.normal(0, 1e-3, (5, 19))
        unit = reduce_force(fraction, omega_s, d3q19)
        scaled = reduce_force(fraction, omega_s, d3q19, dx=0.01, dt=1e-4)
        assert np.allclose(scaled, unit * 1e-6 / 1e-4, rtol=1e-14)

    def test_rest_direction_ignored(self, d2q9):
        """Test that Omega_0 carries no momentum."""
        omega_s = np.zeros((1, 9))
        omega_s[0, 0] = 5.0
        assert np.array_equal(cell_momentum(omega_s, d2q9), np.zeros((1, 3)))

    def test_order_independent(self, d3q19, rng):
        """Test that permuting the covered cells gives the same bits."""
        fraction = rng.uniform(0, 1, 200)
        omega_s = rng.normal(0, 1.0, (200, 19)) * 10.0 ** rng.integers(-8, 3, (200, 1))
        perm = rng.permutation(200)
        a = reduce_force(fraction, omega_s, d3q19)
        b = reduce_force(fraction[perm], omega_s[perm], d3q19)
        assert np.array_equal(a, b)


class TestTorqueReduction:
    """Tests for reduce_torque."""

    @given(data=st.data(), n=st.integers(1, 10))
    @hyp_settings(max_examples=50, deadline=None)
    def test_matches_naive_loop(self, data, n):
        """Test agreement with a naive lever-arm loop."""
        fraction = data.draw(arrays(np.float64, n, elements=st.floats(0.0, 1.0)))
        omega_s = data.draw(arrays(np.float64, (n, 19), elements=values))
        centers = data.draw(arrays(np.float64, (n, 3), elements=st.floats(0.0, 20.0)))
        com = data.draw(arrays(np.float64, 3, elements=st.floats(0.0, 20.0)))
        got = reduce_torque(fraction, omega_s, centers, com, D3Q19)
        expected = naive_torque(fraction, omega_s, centers, com, D3Q19)
        assert np.allclose(got, expected, rtol=0, atol=1e-10)

    def test_no_torque_about_point_of_application(self, d3q19):
        """Test that a single cell exerts no torque about its own center."""
        omega_s = np.zeros((1, 19))
        omega_s[0, 1] = 0.3
        center = np.array([[2.5, 3.5, 4.5]])
        torque = reduce_torque(np.ones(1), omega_s, center, center[0], d3q19)
        assert np.array_equal(torque, np.zeros(3))

    def test_lever_arm_sign(self, d3q19):
        """Test that +x momentum at +y offset gives a -z torque."""
        omega_s = np.zeros((1, 19))
        omega_s[0, 1] = 1.0
        torque = reduce_torque(np.ones(1), omega_s, np.array([[0.0, 1.0, 0.0]]), np.zeros(3), d3q19)
        assert torque == pytest.approx([0.0, 0.0, -1.0])
