"""Tests for the contact-aware estimator front end."""
import unittest

import numpy as np

from estimation.estimator import ContactAwareEstimator, triangulate_midpoint, weighting_noise
from estimation.state import CameraExtrinsic
from geometry.rotations import UnitQuaternion
from models.schemas import EstimatorConfig, EstimatorStatus, ImuNoise
from simulation.sensors import (ROTATION_BODY_CAMERA, CameraObservation, CircleObservation, FtSample,
                                ImuSample, LandmarkObservation)
from tests.mocks.synthetic import SyntheticTrajectory, make_scenario


def _frame(t: float, count: int = 10, disparity: float = 12.0) -> CameraObservation:
    landmarks = tuple(LandmarkObservation(k, 200.0 + 25.0 * k, 150.0 + 15.0 * k, disparity, True)
                      for k in range(count))
    return CameraObservation(t, landmarks, CircleObservation.invalid())


def _estimator(**config) -> ContactAwareEstimator:
    scenario = make_scenario(estimator=EstimatorConfig(enabled=True, **config))
    extrinsic = CameraExtrinsic(UnitQuaternion.from_matrix(ROTATION_BODY_CAMERA), np.array([0.3, 0.0, 0.04]))
    return ContactAwareEstimator(scenario, extrinsic, np.random.default_rng(0))


class TestHelpers(unittest.TestCase):
    """Tests for the noise floors and ray triangulation."""

    def test_weighting_noise_floors(self):
        noise = weighting_noise(ImuNoise(accel_noise_density=0.0, gyro_noise_density=0.0, accel_bias_walk=0.0,
                                         gyro_bias_walk=0.0))
        self.assertEqual((noise.accel_noise_density, noise.gyro_noise_density, noise.accel_bias_walk,
                          noise.gyro_bias_walk), (1e-3, 1e-4, 1e-5, 1e-6))

    def test_weighting_noise_keeps_larger_values(self):
        noise = weighting_noise(ImuNoise(accel_noise_density=0.05))
        self.assertEqual(noise.accel_noise_density, 0.05)

    def test_triangulate_intersecting_rays(self):
        depth = triangulate_midpoint(np.zeros(3), np.array([0.0, 0.0, 1.0]),
                                     np.array([1.0, 0.0, 0.0]), np.array([-1.0, 0.0, 2.0]))
        self.assertAlmostEqual(depth, 2.0)

    def test_parallel_rays_give_nothing(self):
        self.assertIsNone(triangulate_midpoint(np.zeros(3), np.array([0.0, 0.0, 1.0]),
                                               np.array([1.0, 0.0, 0.0]), np.array([0.0, 0.0, 2.0])))


class TestEstimatorLifecycle(unittest.TestCase):
    """Tests for initialization, keyframing and failure handling."""

    def setUp(self):
        self.trajectory = SyntheticTrajectory()

    def test_waits_for_reference(self):
        estimator = _estimator()
        output = estimator.estimator_step(_frame(1.0))
        self.assertIs(output.status, EstimatorStatus.INITIALIZING)
        self.assertIsNone(output.state)

    def test_waits_for_start_time(self):
        estimator = _estimator(start_time=0.5)
        estimator.initialize(self.trajectory.nav_state(0.2))
        self.assertIs(estimator.estimator_step(_frame(0.2)).status, EstimatorStatus.INITIALIZING)

    def test_waits_for_stereo_landmarks(self):
        estimator = _estimator(min_init_landmarks=8)
        estimator.initialize(self.trajectory.nav_state(0.6))
        self.assertIs(estimator.estimator_step(_frame(0.6, count=5)).status, EstimatorStatus.INITIALIZING)
        self.assertIs(estimator.estimator_step(_frame(0.6, disparity=0.1)).status, EstimatorStatus.INITIALIZING)

    def test_initializes_near_reference(self):
        estimator = _estimator()
        reference = self.trajectory.nav_state(0.6)
        estimator.initialize(reference)
        output = estimator.estimator_step(_frame(0.6))
        self.assertIs(output.status, EstimatorStatus.RUNNING)
        self.assertTrue(output.keyframe_added)
        self.assertEqual(len(estimator.window), 1)
        np.testing.assert_allclose(output.state.position, reference.position, atol=0.1)
        self.assertEqual(len(estimator.window.landmarks), 10)

    def test_keyframe_interval_is_respected(self):
        estimator = _estimator(keyframe_min_interval=0.05)
        estimator.initialize(self.trajectory.nav_state(0.6))
        estimator.estimator_step(_frame(0.6))
        samples = self.trajectory.imu_samples(0.6, 0.62, 500.0)
        output = estimator.estimator_step(_frame(0.62), imu_samples=samples)
        self.assertFalse(output.keyframe_added)
        self.assertEqual(len(estimator.window), 1)
        self.assertAlmostEqual(output.state.timestamp, 0.62)

    def test_new_keyframe_runs_a_solve(self):
        estimator = _estimator()
        estimator.initialize(self.trajectory.nav_state(0.6))
        estimator.estimator_step(_frame(0.6))
        output = estimator.estimator_step(_frame(0.7), imu_samples=self.trajectory.imu_samples(0.6, 0.7, 500.0))
        self.assertTrue(output.keyframe_added)
        self.assertIsNotNone(output.solve)
        self.assertEqual(estimator.window.keyframe_ids, [0, 1])
        self.assertIs(output.status, EstimatorStatus.RUNNING)

    def test_failed_estimator_ignores_input(self):
        estimator = _estimator()
        estimator.status = EstimatorStatus.FAILED
        estimator.add_imu(self.trajectory.imu_sample(0.0))
        self.assertEqual(estimator.imu_buffer, [])
        output = estimator.estimator_step(_frame(1.0))
        self.assertIs(output.status, EstimatorStatus.FAILED)
        self.assertIsNone(output.state)

    def test_static_initializer_levels_from_gravity(self):
        """Roll, pitch and gyro bias come from the mean of a resting IMU."""
        estimator = _estimator(static_initializer=True)
        roll, pitch, g = 0.1, -0.05, 9.81
        specific_force = g * np.array([-np.sin(pitch), np.sin(roll) * np.cos(pitch), np.cos(roll) * np.cos(pitch)])
        gyro = np.array([0.01, -0.02, 0.003])
        for k in range(50):
            estimator.add_imu(ImuSample(k * 0.002, specific_force, gyro))
        reference = self.trajectory.nav_state(0.6)
        estimator.initialize(reference)
        guess = estimator._initial_guess
        yaw = reference.orientation.as_euler()[2]
        np.testing.assert_allclose(guess.orientation.as_euler(), [roll, pitch, yaw], atol=1e-9)
        np.testing.assert_allclose(guess.gyro_bias, gyro, atol=1e-12)
        np.testing.assert_allclose(guess.velocity, np.zeros(3))
        np.testing.assert_allclose(guess.position, reference.position)


class TestForceInput(unittest.TestCase):
    """Tests for F/T gating of contact."""

    def test_sustained_push_switches_contact_on(self):
        estimator = _estimator()
        states = [estimator.add_ft(FtSample(k * 0.005, np.array([-5.0, 0.0, 0.0]), np.zeros(3)))
                  for k in range(12)]
        self.assertFalse(states[0])
        self.assertTrue(states[-1])
        self.assertTrue(estimator.in_contact)

    def test_light_touch_stays_off(self):
        estimator = _estimator()
        for k in range(50):
            estimator.add_ft(FtSample(k * 0.005, np.array([-1.0, 0.0, 0.0]), np.zeros(3)))
        self.assertFalse(estimator.in_contact)


if __name__ == "__main__":
    unittest.main()
