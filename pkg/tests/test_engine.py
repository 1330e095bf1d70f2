"""Tests for the time-step pipeline.

These tests verify:
- Step reports, phase timing and observers
- Mass conservation with and without bodies
- Loads on static, prescribed and dynamic bodies, and their symmetry
- Field rebuilds only for moving bodies
- Worker-count independence of the whole pipeline
- Failing steps are reported with their index and cell
"""

import numpy as np
import pytest

from psmflow.models.domain import Domain
from psmflow.models.fields import InvalidStateError, allocate_cells
from psmflow.models.stencil import D3Q19
from psmflow.schemas.scenario import NumericsConfig, ScenarioConfig
from psmflow.services.engine import PHASES, Simulation, kinetic_energy
from psmflow.services.scenario_builder import build_simulation


def box_scenario(motion: dict | None = None, shape: str = "cube", **domain) -> ScenarioConfig:
    """16^3 periodic box (dx = 1 cm, dt = 0.1 s) with one body at its center."""
    body = {
        "name": "body",
        "primitive": {"kind": shape, "size": 0.06, "options": {"subdivisions": 2}},
        "s": 1,
        "position": [0.08, 0.08, 0.08],
    }
    if motion is not None:
        body["motion"] = motion
    fields = {"extents": [16, 16, 16], "dx": 0.01, "tau": 0.8, "nu": 1e-4, "rho_f": 1000.0}
    fields.update(domain)
    return ScenarioConfig.model_validate({"name": "box", "domain": fields, "bodies": [body]})


class TestPureFluid:
    """Tests without bodies."""

    def test_report_fields(self, periodic_domain):
        """Test step index, time and phase keys of a report."""
        with Simulation(periodic_domain, D3Q19) as sim:
            report = sim.step()
        assert report.step == 1
        assert report.time == pytest.approx(periodic_domain.dt)
        assert list(report.phase_ns) == list(PHASES)
        assert report.loads == []
        assert report.is_finite()

    def test_uniform_flow_is_steady(self, periodic_domain):
        """Test that a uniform flow keeps its velocity and mass."""
        velocity = np.array([0.03, 0.0, 0.0])
        with Simulation(periodic_domain, D3Q19, initial_velocity=velocity) as sim:
            for _ in sim.run(10):
                pass
            macro = sim.macroscopic_snapshot()
            drift = sim.mass_drift()
        assert np.allclose(macro.u[0], 0.03, atol=1e-14)
        assert abs(drift) < 1e-14

    def test_observers_see_every_step(self, periodic_domain):
        """Test that observers run once per step with the step's report."""
        seen = []
        with Simulation(
            periodic_domain, D3Q19, observers=[lambda sim, r: seen.append(r.step)]
        ) as sim:
            for _ in sim.run(3):
                pass
        assert seen == [1, 2, 3]

    def test_initialize_custom_fields(self, periodic_domain, rng):
        """Test that initialize loads equilibrium of the given fields."""
        dims = periodic_domain.dims
        rho = allocate_cells(dims)
        rho[...] = 1.0 + 0.01 * rng.uniform(size=dims)
        u = allocate_cells(dims, (3,))
        u[1] = 0.02
        with Simulation(periodic_domain, D3Q19) as sim:
            sim.initialize(rho, u)
            macro = sim.macroscopic_snapshot()
            assert sim.initial_mass == pytest.approx(float(rho.sum()))
        assert np.allclose(macro.rho, rho, atol=1e-14)
        assert np.allclose(macro.u[1], 0.02, atol=1e-14)
        assert kinetic_energy(macro) == pytest.approx(0.5 * float(rho.sum()) * 0.02**2)

    def test_initialize_rejects_bad_fields(self, periodic_domain):
        """Test shape and density checks of initialize."""
        dims = periodic_domain.dims
        with Simulation(periodic_domain, D3Q19) as sim:
            with pytest.raises(ValueError, match="do not match"):
                sim.initialize(np.ones((2, 2, 2)), np.zeros((3, 2, 2, 2)))
            with pytest.raises(InvalidStateError, match="non-positive"):
                sim.initialize(allocate_cells(dims), allocate_cells(dims, (3,)))

    def test_failure_reports_step_and_cell(self, periodic_domain):
        """Test that a NaN injected after two steps fails step index 2 at its cell."""
        with Simulation(periodic_domain, D3Q19) as sim:
            sim.step()
            sim.step()
            sim.pdf.read[:, 3, 4, 5] = np.nan
            with pytest.raises(InvalidStateError) as info:
                sim.step()
        assert info.value.step == 2
        assert info.value.cell == (3, 4, 5)
        assert info.value.reason == "non-finite PDF"

    def test_high_tau_warns(self, caplog):
        """Test that tau above 2 is reported."""
        domain = Domain((4, 4, 4), dx=1.0, dt=1.0, rho_f=1.0, nu=1.0)
        with caplog.at_level("WARNING"), Simulation(domain, D3Q19):
            pass
        assert "above 2" in caplog.text


class TestBodies:
    """Tests with one body in a periodic box."""

    def test_static_body_feels_drag_downstream(self):
        """Test that flow past a resting cube pushes it along the flow."""
        config = box_scenario(initial_velocity=[0.002, 0.0, 0.0])
        with build_simulation(config) as sim:
            for report in sim.run(5):
                pass
            mass = sim.mass_drift()
        force = report.loads[0].force
        assert force[0] > 0.0
        assert abs(force[0]) > 10 * max(abs(force[1]), abs(force[2]))
        assert abs(mass) < 1e-12

    @pytest.mark.parametrize("orientation", [(0.0, 0.0, np.pi / 2), (np.pi / 2, 0.0, 0.0)])
    def test_quarter_turned_cube_loads_match(self, orientation):
        """Test that a cube turned by 90 degrees feels the same symmetric load."""
        loads = []
        for turn in ((0.0, 0.0, 0.0), orientation):
            config = box_scenario(initial_velocity=[0.002, 0.0, 0.0])
            body = config.bodies[0].model_copy(update={"orientation": turn})
            config = config.model_copy(update={"bodies": [body]})
            with build_simulation(config) as sim:
                for report in sim.run(5):
                    pass
            loads.append(report.loads[0])
        upright, turned = loads
        drag = abs(upright.force[0])
        assert drag > 0.0
        assert np.allclose(turned.force, upright.force, rtol=0.0, atol=1e-12 * drag)
        assert np.allclose(turned.torque, upright.torque, rtol=0.0, atol=1e-12 * drag * 0.06)
        assert np.all(np.abs(upright.force[1:]) < 1e-10 * drag)
        assert np.all(np.abs(upright.torque) < 1e-10 * drag * 0.06)

    def test_static_body_not_rebuilt(self):
        """Test that static bodies are rasterized at step 0 only."""
        with build_simulation(box_scenario()) as sim:
            first = sim.step()
            second = sim.step()
        assert first.phase_ns["fraction"] > 0
        assert second.phase_ns["fraction"] == 0

    def test_rotating_body_rebuilt_every_step(self):
        """Test that a spinning body moves its coverage."""
        motion = {"kind": "prescribed", "axis": [0.0, 0.0, 1.0], "rate": 0.5}
        with build_simulation(box_scenario(motion)) as sim:
            sim.step()
            before = sim.fraction.B.copy()
            for _ in range(3):
                report = sim.step()
            after = sim.fraction.B.copy()
        assert report.phase_ns["fraction"] > 0
        assert not np.array_equal(before, after)
        assert after.sum() == pytest.approx(before.sum(), rel=0.1)

    def test_spinning_body_torque_opposes_rotation(self):
        """Test that fluid at rest brakes a spinning body."""
        motion = {"kind": "prescribed", "axis": [0.0, 0.0, 1.0], "rate": 0.1}
        with build_simulation(box_scenario(motion)) as sim:
            for report in sim.run(3):
                pass
        assert report.loads[0].torque[2] < 0.0

    def test_dynamic_body_sinks(self):
        """Test that a heavy sphere accelerates along gravity."""
        motion = {"kind": "dynamic", "density": 2000.0, "gravity": [0.0, 0.0, -1e-4]}
        with build_simulation(box_scenario(motion, shape="sphere")) as sim:
            for _ in sim.run(10):
                pass
            body = sim.bodies[0]
        assert body.velocity[2] < 0.0
        assert body.pose.translation[2] < 0.08
        assert abs(body.velocity[0]) < 1e-3 * abs(body.velocity[2])

    def test_worker_count_independent(self):
        """Test identical loads and PDFs for one and three workers."""
        motion = {"kind": "prescribed", "axis": [1.0, 0.0, 0.0], "rate": 0.2}
        runs = []
        for workers in (1, 3):
            with build_simulation(box_scenario(motion), workers=workers) as sim:
                for report in sim.run(3):
                    pass
                runs.append((report.loads[0].force, report.loads[0].torque, sim.pdf.read.copy()))
        assert np.array_equal(runs[0][0], runs[1][0])
        assert np.array_equal(runs[0][1], runs[1][1])
        assert np.array_equal(runs[0][2], runs[1][2])


@pytest.mark.slow
@pytest.mark.parametrize("variant", ["SC1", "SC2", "SC3"])
def test_rotating_cube_conserves_mass(variant):
    """Test relative mass drift below 1e-10 over 1000 steps of a spinning cube."""
    motion = {"kind": "prescribed", "axis": [1.0, 1.0, 1.0], "rate": 0.15}
    config = box_scenario(motion).model_copy(
        update={"numerics": NumericsConfig(solid_collision=variant)}
    )
    with build_simulation(config) as sim:
        for _ in sim.run(1000):
            pass
        drift = sim.mass_drift()
    assert abs(drift) < 1e-10
