"""Tests for blending, the impedance law, wrench composition and the phase machine."""
import unittest

import numpy as np

from control.hybrid import (ControlInputs, HybridController, ImpedanceState, LowPassDerivative, PhaseState,
                            blend_lambda, compose_wrench, contact_frame_rotation, impedance_force,
                            phase_update)
from control.motion import MotionController, attitude_error
from geometry.rotations import rot_z, so3_exp
from models.schemas import BlendConfig, ImpedanceConfig, MotionConfig, Phase, VehicleParams
from simulation.sensors import CircleObservation, FtSample
from tests.mocks.synthetic import make_scenario

WALL_NORMAL = np.array([-1.0, 0.0, 0.0])


class TestBlendLambda(unittest.TestCase):
    """Tests for the cosine confidence weight."""

    def test_profile(self):
        config = BlendConfig(d_min=0.2, d_max=1.0)
        for depth, expected in ((0.1, 1.0), (0.2, 1.0), (0.6, 0.5), (1.0, 0.0), (1.5, 0.0)):
            self.assertLessEqual(abs(blend_lambda(depth, config) - expected), 1e-12)

    def test_boundaries_on_other_ranges(self):
        for d_min, d_max in ((0.05, 0.3), (0.5, 2.5), (1.0, 1.1)):
            config = BlendConfig(d_min=d_min, d_max=d_max)
            self.assertLessEqual(abs(blend_lambda(d_min, config) - 1.0), 1e-12)
            self.assertLessEqual(abs(blend_lambda(d_max, config)), 1e-12)
            self.assertLessEqual(abs(blend_lambda(0.5 * (d_min + d_max), config) - 0.5), 1e-12)

    def test_monotone_between_bounds(self):
        config = BlendConfig()
        values = [blend_lambda(d, config) for d in np.linspace(0.0, 1.2, 50)]
        self.assertTrue(np.all(np.diff(values) <= 0.0))


class TestImpedanceForce(unittest.TestCase):
    """Tests for the force law and its integrator."""

    def setUp(self):
        self.config = ImpedanceConfig(reference_force=5.0, stiffness=0.0, damping=0.0, force_p=0.5,
                                      force_i=0.2, integral_limit=3.0)

    def test_proportional_term(self):
        command, state = impedance_force(6.0, 0.0, 0.0, self.config, 0.0)
        self.assertAlmostEqual(command, 4.5)
        self.assertEqual(state.integral, 0.0)

    def test_integral_accumulates(self):
        state = ImpedanceState()
        for _ in range(200):
            command, state = impedance_force(6.0, 0.0, 0.0, self.config, 0.01, state)
        self.assertAlmostEqual(state.integral, 2.0)
        self.assertAlmostEqual(command, 4.1)

    def test_integral_term_is_clamped(self):
        state = ImpedanceState()
        for _ in range(2000):
            command, state = impedance_force(6.0, 0.0, 0.0, self.config, 0.01, state)
        self.assertAlmostEqual(state.integral, 15.0)
        self.assertAlmostEqual(command, 5.0 - 0.5 - 3.0)

    def test_scaling_terms(self):
        config = ImpedanceConfig(stiffness=0.02, damping=0.15)
        command, _ = impedance_force(5.0, 10.0, 2.0, config, 0.0)
        self.assertAlmostEqual(command, 5.0 - 0.2 - 0.3)


class TestComposeWrench(unittest.TestCase):
    """Tests for the selection-matrix composition."""

    def setUp(self):
        self.motion = np.arange(1.0, 7.0)

    def test_half_blend_in_contact_frame(self):
        result = compose_wrench(self.motion, 10.0, 0.5, np.eye(3))
        np.testing.assert_allclose(result.total, [5.5, 2.0, 3.0, 4.0, 5.0, 6.0])

    def test_rotated_contact_frame(self):
        result = compose_wrench(self.motion, 10.0, 1.0, rot_z(np.pi / 2))
        np.testing.assert_allclose(result.total, [1.0, 10.0, 3.0, 4.0, 5.0, 6.0], atol=1e-12)

    def test_zero_lambda_passes_motion_through(self):
        result = compose_wrench(self.motion, 10.0, 0.0, rot_z(0.3))
        np.testing.assert_array_equal(result.total, self.motion)
        self.assertIsNot(result.total, self.motion)

    def test_matches_literal_matrix_form(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            motion = rng.standard_normal(6) * 10.0
            force = rng.uniform(0.0, 10.0)
            lam = rng.uniform(0.0, 1.0)
            rotation = so3_exp(rng.standard_normal(3))
            r6 = np.block([[rotation, np.zeros((3, 3))], [np.zeros((3, 3)), rotation]])
            selection = np.diag([lam, 0.0, 0.0, 0.0, 0.0, 0.0])
            tau_f = np.array([force, 0.0, 0.0, 0.0, 0.0, 0.0])
            expected = r6 @ ((np.eye(6) - selection) @ r6.T @ motion + selection @ tau_f)
            result = compose_wrench(motion, force, lam, rotation)
            np.testing.assert_allclose(result.total, expected, rtol=0.0, atol=1e-12)


class TestContactFrame(unittest.TestCase):
    """Tests for the contact frame orientation."""

    def test_level_body_facing_wall(self):
        np.testing.assert_allclose(contact_frame_rotation(WALL_NORMAL, np.eye(3)), np.eye(3), atol=1e-12)

    def test_yawed_body(self):
        np.testing.assert_allclose(contact_frame_rotation(WALL_NORMAL, rot_z(0.4)), rot_z(0.4).T, atol=1e-12)


class TestPhaseUpdate(unittest.TestCase):
    """Tests for the phase transitions."""

    def setUp(self):
        self.config = BlendConfig()

    def test_approach_waits_for_depth(self):
        state = PhaseState(Phase.APPROACH, 0.0)
        self.assertIs(phase_update(state, None, False, self.config, 1.0).phase, Phase.APPROACH)
        self.assertIs(phase_update(state, 1.2, True, self.config, 1.0).phase, Phase.APPROACH)
        moved = phase_update(state, 0.9, False, self.config, 1.0)
        self.assertIs(moved.phase, Phase.TRANSITION)
        self.assertEqual(moved.entered_at, 1.0)

    def test_transition_needs_contact(self):
        state = PhaseState(Phase.TRANSITION, 0.0)
        self.assertIs(phase_update(state, 0.3, False, self.config, 1.0).phase, Phase.TRANSITION)
        self.assertIs(phase_update(state, 0.3, True, self.config, 1.0).phase, Phase.FORCE_HOLD)

    def test_force_hold_exit_after_dwell(self):
        state = PhaseState(Phase.FORCE_HOLD, 0.0)
        state = phase_update(state, 0.3, False, self.config, 1.0, dwell=0.05)
        self.assertEqual(state.contact_lost_at, 1.0)
        state = phase_update(state, 0.3, False, self.config, 1.03, dwell=0.05)
        self.assertIs(state.phase, Phase.FORCE_HOLD)
        state = phase_update(state, 0.3, False, self.config, 1.06, dwell=0.05)
        self.assertIs(state.phase, Phase.TRANSITION)

    def test_contact_regained_clears_timer(self):
        state = PhaseState(Phase.FORCE_HOLD, 0.0, contact_lost_at=1.0)
        state = phase_update(state, 0.3, True, self.config, 1.02, dwell=0.05)
        self.assertIs(state.phase, Phase.FORCE_HOLD)
        self.assertIsNone(state.contact_lost_at)


class TestLowPassDerivative(unittest.TestCase):
    """Tests for the filtered scaling-error rate."""

    def test_first_update_is_zero(self):
        self.assertEqual(LowPassDerivative(10.0).update(0.0, 5.0), 0.0)

    def test_ramp_converges_to_slope(self):
        derivative = LowPassDerivative(10.0)
        for k in range(90):
            t = k / 30.0
            value = derivative.update(t, 2.0 * t)
        self.assertAlmostEqual(value, 2.0, places=6)


class TestMotionController(unittest.TestCase):
    """Tests for the velocity PID and attitude PD."""

    def test_proportional_with_gravity_feedforward(self):
        controller = MotionController(MotionConfig(velocity_kp=(10.0, 10.0, 10.0), velocity_ki=(0.0, 0.0, 0.0)),
                                      VehicleParams())
        wrench = controller.update(np.array([0.1, 0.0, 0.0, 0.0, 0.0, 0.0]), np.zeros(3), np.eye(3), np.zeros(3),
                                   0.004)
        np.testing.assert_allclose(wrench[:3], [1.0, 0.0, 3.0 * 9.81])
        np.testing.assert_allclose(wrench[3:], np.zeros(3))

    def test_attitude_error_for_yaw(self):
        np.testing.assert_allclose(attitude_error(rot_z(0.1), np.eye(3)), [0.0, 0.0, np.sin(0.1)], atol=1e-12)

    def test_integral_term_is_clamped(self):
        config = MotionConfig(velocity_kp=(0.0, 0.0, 0.0), velocity_ki=(1.0, 1.0, 1.0), integral_limit=0.5)
        controller = MotionController(config, VehicleParams())
        for _ in range(5):
            wrench = controller.update(np.array([1.0, 0.0, 0.0, 0.0, 0.0, 0.0]), np.zeros(3), np.eye(3),
                                       np.zeros(3), 1.0)
        self.assertAlmostEqual(wrench[0], 0.5)
        controller.reset()
        np.testing.assert_array_equal(controller.integral, np.zeros(3))


class TestHybridController(unittest.TestCase):
    """Tests for the control-rate state machine."""

    def setUp(self):
        self.controller = HybridController(make_scenario())

    def _inputs(self, t, circle=None, ft=None) -> ControlInputs:
        return ControlInputs(t, np.zeros(3), np.eye(3), np.zeros(3), circle, ft)

    def test_no_target_is_pure_motion(self):
        output = self.controller.tick(self._inputs(0.0))
        self.assertIs(output.phase, Phase.APPROACH)
        self.assertEqual(output.lam, 0.0)
        np.testing.assert_array_equal(output.command.total, output.command.motion)

    def test_near_target_blends(self):
        # radius seen at 0.5 m
        circle = CircleObservation(320.0, 288.0, 42.0, np.pi * 42.0 ** 2, True)
        output = self.controller.tick(self._inputs(0.0, circle))
        self.assertIs(output.phase, Phase.TRANSITION)
        self.assertAlmostEqual(output.depth, 0.5)
        self.assertAlmostEqual(output.lam, 0.5 * (1.0 + np.cos(0.375 * np.pi)))

    def test_sustained_push_enters_force_hold(self):
        circle = CircleObservation(320.0, 288.0, 42.0, np.pi * 42.0 ** 2, True)
        self.controller.tick(self._inputs(0.0, circle))
        for k in range(1, 21):
            t = k * 0.004
            output = self.controller.tick(self._inputs(t, ft=FtSample(t, np.array([-6.0, 0.0, 0.0]), np.zeros(3))))
        self.assertIs(output.phase, Phase.FORCE_HOLD)
        self.assertTrue(output.contact)
        self.assertEqual(output.lam, 1.0)
        self.assertAlmostEqual(output.force_measured, 6.0)


if __name__ == "__main__":
    unittest.main()
