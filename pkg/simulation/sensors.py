"""Synthetic IMU, force/torque and stereo camera sensors with seeded noise.

Every sampler draws the same number of random variates per call regardless of
the vehicle state, so two runs sharing a seed consume identical random streams
even after their trajectories diverge.
"""
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from geometry.rotations import UnitQuaternion
from geometry.transforms import FrameId, RigidTransform
from models.schemas import CameraNoise, CameraSettings, FtNoise, ImuNoise, WallModel

GRAVITY_WORLD = np.array([0.0, 0.0, -9.81])

# Camera-to-body rotation. Columns are the camera axes in the body frame:
# image x to body right, image y to body down, optical axis along body x.
ROTATION_BODY_CAMERA = np.array([[0.0, 0.0, 1.0],
                                 [-1.0, 0.0, 0.0],
                                 [0.0, -1.0, 0.0]])


@dataclass(frozen=True)
class ImuSample:
    timestamp: float
    specific_force: np.ndarray
    angular_rate: np.ndarray


@dataclass(frozen=True)
class ImuBias:
    accel: np.ndarray = field(default_factory=lambda: np.zeros(3))
    gyro: np.ndarray = field(default_factory=lambda: np.zeros(3))


@dataclass(frozen=True)
class FtSample:
    timestamp: float
    force: np.ndarray
    torque: np.ndarray


@dataclass(frozen=True)
class LandmarkObservation:
    landmark_id: int
    u: float
    v: float
    disparity: float
    valid: bool


@dataclass(frozen=True)
class CircleObservation:
    """Projected circular target; u, v are absolute pixel coordinates."""
    u: float
    v: float
    radius: float
    area: float
    valid: bool

    @classmethod
    def invalid(cls) -> "CircleObservation":
        return cls(0.0, 0.0, 0.0, 0.0, False)


@dataclass(frozen=True)
class CameraObservation:
    timestamp: float
    landmarks: Tuple[LandmarkObservation, ...]
    circle: CircleObservation

    @property
    def valid_landmarks(self) -> Tuple[LandmarkObservation, ...]:
        return tuple(obs for obs in self.landmarks if obs.valid)


class CameraModel:
    """Pinhole camera rigidly mounted on the body."""

    def __init__(self, settings: CameraSettings):
        self.settings = settings
        self.fx = settings.fx
        self.fy = settings.fy
        self.cx = settings.cx
        self.cy = settings.cy
        self.baseline = settings.stereo_baseline
        self.rotation_body_camera = ROTATION_BODY_CAMERA
        self.translation_body_camera = np.asarray(settings.position_body, dtype=float)

    @property
    def extrinsic(self) -> RigidTransform:
        """Camera-to-body transform."""
        return RigidTransform(
            UnitQuaternion.from_matrix(self.rotation_body_camera),
            self.translation_body_camera,
            FrameId.CAMERA,
            FrameId.BODY,
        )

    def camera_pose_world(self, position: np.ndarray, rotation: np.ndarray):
        """Camera rotation and optical center in the world frame."""
        r_wc = rotation @ self.rotation_body_camera
        p_wc = position + rotation @ self.translation_body_camera
        return r_wc, p_wc

    def world_to_camera(self, points: np.ndarray, position: np.ndarray, rotation: np.ndarray) -> np.ndarray:
        r_wc, p_wc = self.camera_pose_world(position, rotation)
        return (np.atleast_2d(points) - p_wc) @ r_wc

    def project(self, points_camera: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(points_camera)
        u = self.fx * pts[:, 0] / pts[:, 2] + self.cx
        v = self.fy * pts[:, 1] / pts[:, 2] + self.cy
        return np.column_stack((u, v))

    def in_image(self, u, v):
        return (u >= 0.0) & (u < self.settings.width) & (v >= 0.0) & (v < self.settings.height)


def sample_imu(state, true_acceleration: np.ndarray, bias: ImuBias, noise: ImuNoise,
               rng: np.random.Generator, period: float) -> Tuple[ImuSample, ImuBias]:
    """
    Draw one IMU sample and advance the bias random walk.

    Args:
        state: Simulator state supplying orientation, angular rate and time
        true_acceleration: World-frame acceleration of the body [m/s^2]
        bias: Bias in effect for this sample
        noise: Noise densities
        rng: Generator owned by the IMU stream
        period: Sample period [s]

    Returns:
        The sample and the bias for the next sample
    """
    draws = rng.standard_normal(12)
    rotation = state.orientation.as_matrix()
    root_rate = 1.0 / np.sqrt(period)
    specific_force = (rotation.T @ (np.asarray(true_acceleration) - GRAVITY_WORLD) + bias.accel
                      + noise.accel_noise_density * root_rate * draws[0:3])
    angular_rate = (np.asarray(state.angular_velocity) + bias.gyro
                    + noise.gyro_noise_density * root_rate * draws[3:6])
    root_period = np.sqrt(period)
    next_bias = ImuBias(
        accel=bias.accel + noise.accel_bias_walk * root_period * draws[6:9],
        gyro=bias.gyro + noise.gyro_bias_walk * root_period * draws[9:12],
    )
    return ImuSample(float(state.time), specific_force, angular_rate), next_bias


def sample_ft(wrench: np.ndarray, noise: FtNoise, rng: np.random.Generator, timestamp: float) -> FtSample:
    """Sensor-frame wrench plus white noise on each axis."""
    draws = rng.standard_normal(6)
    wrench = np.asarray(wrench, dtype=float)
    return FtSample(
        timestamp=float(timestamp),
        force=wrench[:3] + noise.force_sigma * draws[:3],
        torque=wrench[3:] + noise.torque_sigma * draws[3:],
    )


def _circle_observation(state, wall: WallModel, camera: CameraModel, noise: CameraNoise,
                        draws: np.ndarray) -> CircleObservation:
    settings = camera.settings
    rotation = state.orientation.as_matrix()
    center_c = camera.world_to_camera(np.asarray(wall.hole_center), state.position, rotation)[0]
    depth = center_c[2]
    if depth <= settings.min_depth:
        return CircleObservation.invalid()

    r_wc, _ = camera.camera_pose_world(state.position, rotation)
    cos_incidence = float(r_wc[:, 2] @ -wall.normal_vector)
    if cos_incidence < np.cos(np.deg2rad(settings.max_incidence_deg)):
        return CircleObservation.invalid()

    uv = camera.project(center_c)[0]
    area = wall.target_area * camera.fx * camera.fy / depth ** 2
    radius = np.sqrt(area / np.pi)
    if (uv[0] - radius < 0.0 or uv[0] + radius > settings.width
            or uv[1] - radius < 0.0 or uv[1] + radius > settings.height):
        return CircleObservation.invalid()

    u = uv[0] + noise.circle_center_sigma * draws[0]
    v = uv[1] + noise.circle_center_sigma * draws[1]
    radius = radius + noise.circle_radius_sigma * draws[2]
    if radius <= 0.0:
        return CircleObservation.invalid()
    return CircleObservation(float(u), float(v), float(radius), float(np.pi * radius ** 2), True)


def sample_camera(state, wall: WallModel, landmarks: np.ndarray, camera: CameraModel,
                  noise: CameraNoise, rng: np.random.Generator,
                  max_features: Optional[int] = None) -> CameraObservation:
    """
    Project the landmark field and the circular target into the left image.

    Landmarks are invalid when behind the camera, outside the image, hidden
    behind the wall plane, or leaving the right stereo image. At most
    `max_features` valid landmarks are kept, lowest ids first.

    Args:
        state: Simulator state
        wall: Wall and target geometry
        landmarks: World-frame landmark positions, shape (N, 3); row index is the id
        camera: Camera model
        noise: Pixel noise settings
        rng: Generator owned by the camera stream
        max_features: Optional cap on valid landmark observations

    Returns:
        The camera observation at `state.time`
    """
    landmarks = np.asarray(landmarks, dtype=float).reshape(-1, 3)
    count = landmarks.shape[0]
    draws = rng.standard_normal(3 * count + 3)
    pixel_draws = draws[:3 * count].reshape(count, 3)
    circle = _circle_observation(state, wall, camera, noise, draws[3 * count:])

    observations = []
    if count:
        rotation = state.orientation.as_matrix()
        points_c = camera.world_to_camera(landmarks, state.position, rotation)
        depth = points_c[:, 2]
        in_front = depth > camera.settings.min_depth
        safe = np.where(in_front, depth, 1.0)
        uv = camera.project(np.column_stack((points_c[:, :2], safe)))
        disparity = camera.fx * camera.baseline / safe
        visible = in_front & camera.in_image(uv[:, 0], uv[:, 1]) & (uv[:, 0] - disparity >= 0.0)

        _, p_wc = camera.camera_pose_world(state.position, rotation)
        n = wall.normal_vector
        wall_point = np.asarray(wall.point)
        if float(n @ (p_wc - wall_point)) > 0.0:
            visible &= (landmarks - wall_point) @ n >= -1e-9

        kept = 0
        for idx in range(count):
            valid = bool(visible[idx]) and (max_features is None or kept < max_features)
            if valid:
                kept += 1
                observations.append(LandmarkObservation(
                    landmark_id=idx,
                    u=float(uv[idx, 0] + noise.landmark_pixel_sigma * pixel_draws[idx, 0]),
                    v=float(uv[idx, 1] + noise.landmark_pixel_sigma * pixel_draws[idx, 1]),
                    disparity=float(disparity[idx] + noise.disparity_sigma * pixel_draws[idx, 2]),
                    valid=True,
                ))
            else:
                observations.append(LandmarkObservation(idx, 0.0, 0.0, 0.0, False))

    return CameraObservation(timestamp=float(state.time), landmarks=tuple(observations), circle=circle)
