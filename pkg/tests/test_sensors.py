"""Tests for the landmark field and the synthetic sensors."""
import unittest

import numpy as np

from geometry.rotations import UnitQuaternion
from models.schemas import CameraNoise, CameraSettings, FtNoise, ImuNoise, LandmarkSettings, WallModel
from simulation.landmarks import generate_landmark_field, wall_tangents
from simulation.sensors import (GRAVITY_WORLD, ROTATION_BODY_CAMERA, CameraModel, ImuBias, sample_camera,
                                sample_ft, sample_imu)
from simulation.vehicle import SimState

QUIET_CAMERA = CameraNoise(landmark_pixel_sigma=0.0, disparity_sigma=0.0,
                           circle_center_sigma=0.0, circle_radius_sigma=0.0)


class TestLandmarkField(unittest.TestCase):
    """Tests for landmark generation."""

    def setUp(self):
        self.wall = WallModel()
        self.settings = LandmarkSettings()

    def test_tangents_are_orthonormal(self):
        t1, t2 = wall_tangents(self.wall)
        n = self.wall.normal_vector
        basis = np.column_stack((t1, t2, n))
        np.testing.assert_allclose(basis.T @ basis, np.eye(3), atol=1e-12)

    def test_same_seed_same_field(self):
        a = generate_landmark_field(self.wall, self.settings, np.random.default_rng(4))
        b = generate_landmark_field(self.wall, self.settings, np.random.default_rng(4))
        np.testing.assert_array_equal(a, b)

    def test_target_is_untextured(self):
        points = generate_landmark_field(self.wall, self.settings, np.random.default_rng(1))
        distance = np.linalg.norm(points - np.asarray(self.wall.hole_center), axis=1)
        self.assertTrue(np.all(distance > self.wall.target_outer_radius))

    def test_points_lie_on_wall_or_floor(self):
        points = generate_landmark_field(self.wall, self.settings, np.random.default_rng(2))
        on_wall = np.isclose(points[:, 0], self.wall.point[0])
        on_floor = np.isclose(points[:, 2], 0.0)
        self.assertTrue(np.all(on_wall | on_floor))
        self.assertTrue(np.any(on_floor))

    def test_empty_field(self):
        settings = LandmarkSettings(wall_density=0.0, floor_density=0.0)
        points = generate_landmark_field(self.wall, settings, np.random.default_rng(0))
        self.assertEqual(points.shape, (0, 3))


class TestImuAndForceSensors(unittest.TestCase):
    """Tests for IMU and F/T sampling."""

    def test_level_hover_reads_gravity(self):
        state = SimState.at_rest([0.0, 0.0, 1.0])
        noise = ImuNoise(accel_noise_density=0.0, gyro_noise_density=0.0, accel_bias_walk=0.0,
                         gyro_bias_walk=0.0)
        sample, bias = sample_imu(state, np.zeros(3), ImuBias(), noise, np.random.default_rng(0), 0.002)
        np.testing.assert_allclose(sample.specific_force, -GRAVITY_WORLD)
        np.testing.assert_allclose(sample.angular_rate, np.zeros(3))
        np.testing.assert_allclose(bias.accel, np.zeros(3))

    def test_bias_is_added(self):
        state = SimState.at_rest([0.0, 0.0, 1.0], UnitQuaternion.from_euler(0.0, 0.0, 0.5))
        noise = ImuNoise(accel_noise_density=0.0, gyro_noise_density=0.0, accel_bias_walk=0.0,
                         gyro_bias_walk=0.0)
        bias = ImuBias(accel=np.array([0.1, 0.0, 0.0]), gyro=np.array([0.0, 0.01, 0.0]))
        sample, _ = sample_imu(state, np.zeros(3), bias, noise, np.random.default_rng(0), 0.002)
        np.testing.assert_allclose(sample.specific_force, [0.1, 0.0, 9.81], atol=1e-12)
        np.testing.assert_allclose(sample.angular_rate, [0.0, 0.01, 0.0])

    def test_draw_count_is_state_independent(self):
        """Two different states leave the generator in the same position."""
        noise = ImuNoise()
        a, b = np.random.default_rng(9), np.random.default_rng(9)
        sample_imu(SimState.at_rest([0.0, 0.0, 1.0]), np.zeros(3), ImuBias(), noise, a, 0.002)
        sample_imu(SimState.at_rest([5.0, 1.0, 2.0]), np.ones(3), ImuBias(), noise, b, 0.002)
        self.assertEqual(a.standard_normal(), b.standard_normal())

    def test_ft_noise(self):
        wrench = np.array([1.0, 2.0, 3.0, 0.1, 0.2, 0.3])
        sample = sample_ft(wrench, FtNoise(force_sigma=0.0, torque_sigma=0.0), np.random.default_rng(0), 0.25)
        np.testing.assert_allclose(sample.force, wrench[:3])
        np.testing.assert_allclose(sample.torque, wrench[3:])
        self.assertEqual(sample.timestamp, 0.25)


class TestCamera(unittest.TestCase):
    """Tests for the stereo camera and circle projection."""

    def setUp(self):
        self.wall = WallModel()
        self.camera = CameraModel(CameraSettings())

    def test_optical_axis_is_body_forward(self):
        np.testing.assert_allclose(ROTATION_BODY_CAMERA @ np.array([0.0, 0.0, 1.0]), [1.0, 0.0, 0.0])
        self.assertAlmostEqual(np.linalg.det(ROTATION_BODY_CAMERA), 1.0)

    def test_circle_centered_when_facing_target(self):
        """Camera centre level with and in front of the hole sees it at the principal point."""
        cam = np.asarray(CameraSettings().position_body)
        position = np.array([1.0, 0.0, 1.5]) - cam
        state = SimState.at_rest(position)
        obs = sample_camera(state, self.wall, np.zeros((0, 3)), self.camera, QUIET_CAMERA,
                            np.random.default_rng(0))
        self.assertTrue(obs.circle.valid)
        self.assertAlmostEqual(obs.circle.u, 320.0)
        self.assertAlmostEqual(obs.circle.v, 240.0)
        self.assertAlmostEqual(obs.circle.radius, 0.07 * 300.0 / 1.0)

    def test_circle_invalid_when_turned_away(self):
        state = SimState.at_rest([1.0, 0.0, 1.5], UnitQuaternion.from_euler(0.0, 0.0, np.pi / 2))
        obs = sample_camera(state, self.wall, np.zeros((0, 3)), self.camera, QUIET_CAMERA,
                            np.random.default_rng(0))
        self.assertFalse(obs.circle.valid)

    def test_landmark_projection_and_disparity(self):
        cam = np.asarray(CameraSettings().position_body)
        state = SimState.at_rest(np.array([1.0, 0.0, 1.5]) - cam)
        landmarks = np.array([[2.0, -0.2, 1.4], [0.0, 0.0, 1.5]])
        obs = sample_camera(state, self.wall, landmarks, self.camera, QUIET_CAMERA, np.random.default_rng(0))
        first, behind = obs.landmarks
        self.assertTrue(first.valid)
        self.assertFalse(behind.valid)
        # Body y=-0.2 is image right, body z=-0.1 is image down
        self.assertAlmostEqual(first.u, 320.0 + 300.0 * 0.2)
        self.assertAlmostEqual(first.v, 240.0 + 300.0 * 0.1)
        self.assertAlmostEqual(first.disparity, 300.0 * 0.08)

    def test_feature_cap(self):
        cam = np.asarray(CameraSettings().position_body)
        state = SimState.at_rest(np.array([1.0, 0.0, 1.5]) - cam)
        landmarks = np.array([[2.0, y, 1.4] for y in np.linspace(-0.3, 0.3, 5)])
        obs = sample_camera(state, self.wall, landmarks, self.camera, QUIET_CAMERA,
                            np.random.default_rng(0), max_features=2)
        self.assertEqual([o.landmark_id for o in obs.valid_landmarks], [0, 1])


if __name__ == "__main__":
    unittest.main()
