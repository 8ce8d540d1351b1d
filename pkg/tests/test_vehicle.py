"""Tests for the hexarotor model, contact model and simulator."""
import unittest

import numpy as np

from exceptions import ConfigError, SimulationDivergenceError
from geometry.rotations import UnitQuaternion
from models.schemas import VehicleParams, WallModel
from simulation.contact import contact_wrench
from simulation.simulator import VehicleSimulator, spawn_streams
from simulation.vehicle import (GRAVITY, SimState, allocate, allocation_matrix, mechanical_energy,
                                rotor_geometry, rotor_wrench, step_dynamics)
from tests.mocks.synthetic import make_scenario


class TestAllocation(unittest.TestCase):
    """Tests for the rotor allocation."""

    def setUp(self):
        self.params = VehicleParams()

    def test_thrust_axes_are_unit_and_tilted(self):
        _, axes = rotor_geometry(self.params)
        np.testing.assert_allclose(np.linalg.norm(axes, axis=1), np.ones(6))
        np.testing.assert_allclose(axes[:, 2], np.full(6, np.cos(self.params.rotor_tilt)))

    def test_full_rank(self):
        self.assertEqual(np.linalg.matrix_rank(allocation_matrix(self.params)), 6)

    def test_allocate_reproduces_wrench(self):
        """A feasible wrench maps to rotor speeds that produce it back."""
        wrench = np.array([1.0, -0.5, 29.43, 0.05, -0.02, 0.01])
        result = allocate(wrench, self.params)
        self.assertFalse(result.saturated)
        np.testing.assert_allclose(rotor_wrench(result.rotor_speeds, self.params), wrench, atol=1e-9)

    def test_hover_thrust_per_rotor(self):
        result = allocate(np.array([0.0, 0.0, self.params.mass * GRAVITY, 0.0, 0.0, 0.0]), self.params)
        expected = self.params.mass * GRAVITY / (6 * np.cos(self.params.rotor_tilt))
        np.testing.assert_allclose(result.thrusts, np.full(6, expected), rtol=1e-9)

    def test_saturation_flag(self):
        result = allocate(np.array([0.0, 0.0, 500.0, 0.0, 0.0, 0.0]), self.params)
        self.assertTrue(result.saturated)
        self.assertTrue(np.all(result.thrusts <= self.params.max_thrust + 1e-12))

    def test_negative_thrust_is_clamped(self):
        result = allocate(np.array([0.0, 0.0, -10.0, 0.0, 0.0, 0.0]), self.params)
        self.assertTrue(result.saturated)
        self.assertTrue(np.all(result.thrusts >= 0.0))

    def test_tiny_tilt_is_rejected(self):
        """With almost no tilt the force columns cannot span the lateral axes."""
        with self.assertRaises(ConfigError):
            allocation_matrix(VehicleParams(rotor_tilt_deg=1e-9))


class TestContactModel(unittest.TestCase):
    """Tests for the compliant wall."""

    def setUp(self):
        self.params = VehicleParams()
        self.wall = WallModel()

    def _state_with_tip_at(self, x: float, vx: float = 0.0) -> SimState:
        position = np.array([x - self.params.end_effector_offset[0], 0.0, 1.5])
        state = SimState.at_rest(position)
        return SimState(0.0, position, np.array([vx, 0.0, 0.0]), state.orientation,
                        np.zeros(3), np.zeros(6))

    def test_no_force_before_touching(self):
        wrench = contact_wrench(self._state_with_tip_at(1.99), self.wall, self.params)
        self.assertFalse(wrench.in_contact)
        np.testing.assert_allclose(wrench.force_world, np.zeros(3))

    def test_spring_force_on_penetration(self):
        wrench = contact_wrench(self._state_with_tip_at(2.002), self.wall, self.params)
        self.assertTrue(wrench.in_contact)
        np.testing.assert_allclose(wrench.force_world, [-self.wall.stiffness * 0.002, 0.0, 0.0], atol=1e-9)

    def test_damping_only_while_approaching(self):
        pushing = contact_wrench(self._state_with_tip_at(2.002, vx=0.1), self.wall, self.params)
        leaving = contact_wrench(self._state_with_tip_at(2.002, vx=-0.1), self.wall, self.params)
        self.assertAlmostEqual(pushing.force_world[0], -(4.0 + self.wall.damping * 0.1))
        self.assertAlmostEqual(leaving.force_world[0], -4.0)

    def test_wall_never_pulls(self):
        wrench = contact_wrench(self._state_with_tip_at(2.0001, vx=-5.0), self.wall, self.params)
        self.assertLessEqual(wrench.force_world[0], 0.0)


class TestDynamics(unittest.TestCase):
    """Tests for the rigid-body integration and the simulator."""

    def test_dt_is_validated(self):
        state = SimState.at_rest([0.0, 0.0, 1.0])
        with self.assertRaises(ValueError):
            step_dynamics(state, np.zeros(6), None, VehicleParams(), 0.02)
        with self.assertRaises(ValueError):
            step_dynamics(state, np.zeros(6), None, VehicleParams(), 0.0)

    def test_free_fall(self):
        params = VehicleParams()
        state = SimState.at_rest([0.0, 0.0, 10.0])
        for _ in range(100):
            state = step_dynamics(state, np.zeros(6), None, params, 0.001)
        np.testing.assert_allclose(state.velocity, [0.0, 0.0, -GRAVITY * 0.1], atol=1e-9)

    def test_non_finite_state_raises(self):
        params = VehicleParams()
        state = SimState.at_rest([0.0, 0.0, 1.0])
        state = SimState(0.0, state.position, np.array([np.inf, 0.0, 0.0]), state.orientation,
                         np.zeros(3), np.zeros(6))
        with self.assertRaises(SimulationDivergenceError):
            step_dynamics(state, np.zeros(6), None, params, 0.001)

    def test_spin_about_principal_axis(self):
        """Torque-free spin about body z keeps its rate and rotational energy."""
        params = VehicleParams()
        state = SimState(0.0, np.zeros(3), np.zeros(3), UnitQuaternion.identity(),
                         np.array([0.0, 0.0, 1.0]), np.zeros(6))
        rotational = mechanical_energy(state, params)
        for _ in range(1000):
            state = step_dynamics(state, np.zeros(6), None, params, 0.001)
        np.testing.assert_allclose(state.angular_velocity, [0.0, 0.0, 1.0], atol=1e-12)
        self.assertAlmostEqual(state.orientation.as_euler()[2], 1.0, places=9)
        still = SimState(0.0, np.zeros(3), np.zeros(3), state.orientation, state.angular_velocity, np.zeros(6))
        self.assertAlmostEqual(mechanical_energy(still, params), rotational, places=12)

    def test_hover_drift(self):
        """Holding the hover rotor speeds keeps the vehicle within 1e-6 m for 2 s."""
        sim = VehicleSimulator(make_scenario())
        start = sim.state.position.copy()
        hover = sim.state.rotor_speeds.copy()
        for _ in range(2000):
            sim.step(hover)
        self.assertLessEqual(np.linalg.norm(sim.state.position - start), 1e-6)

    def test_sensor_rates(self):
        scenario = make_scenario()
        sim = VehicleSimulator(scenario)
        hover = sim.state.rotor_speeds.copy()
        counts = {"imu": 0, "ft": 0, "camera": 0}
        for _ in range(1000):
            frame = sim.step(hover)
            counts["imu"] += frame.imu is not None
            counts["ft"] += frame.ft is not None
            counts["camera"] += frame.camera is not None
        self.assertEqual(counts["imu"], 500)
        self.assertEqual(counts["ft"], 200)
        self.assertEqual(counts["camera"], 30)
        self.assertAlmostEqual(sim.time, 1.0)

    def test_same_seed_same_streams(self):
        a, b = spawn_streams(5), spawn_streams(5)
        for name in a:
            np.testing.assert_array_equal(a[name].standard_normal(4), b[name].standard_normal(4))

    def test_runs_are_deterministic(self):
        scenario = make_scenario(seed=11)
        frames = []
        for _ in range(2):
            sim = VehicleSimulator(scenario)
            hover = sim.state.rotor_speeds.copy()
            last = None
            for _ in range(100):
                last = sim.step(hover)
            frames.append(last)
        np.testing.assert_array_equal(frames[0].state.position, frames[1].state.position)
        np.testing.assert_array_equal(frames[0].ft.force, frames[1].ft.force)
        np.testing.assert_array_equal(frames[0].imu.specific_force, frames[1].imu.specific_force)


if __name__ == "__main__":
    unittest.main()
