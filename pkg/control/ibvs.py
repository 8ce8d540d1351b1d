"""Image-based visual servoing on a circular target: features, interaction matrix and twist law.

Features are the target center (u, v) relative to the principal point and the
image radius r. Depth is recovered from the image area of the known target.
"""
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from exceptions import LostTargetError, ServoError
from logging_utils import get_logger
from models.schemas import DesiredFeatures, Scenario
from simulation.sensors import ROTATION_BODY_CAMERA, CircleObservation

logger = get_logger()


@dataclass(frozen=True)
class ServoConfig:
    desired: DesiredFeatures
    gain: float
    fx: float
    fy: float
    cx: float
    cy: float
    target_area: float
    damping: float = 1e-3
    max_linear_speed: float = 0.3

    @classmethod
    def from_scenario(cls, scenario: Scenario) -> "ServoConfig":
        servo, cam = scenario.servo, scenario.camera
        return cls(
            desired=servo.desired or desired_features(scenario),
            gain=servo.gain,
            fx=cam.fx, fy=cam.fy, cx=cam.cx, cy=cam.cy,
            target_area=scenario.wall.target_area,
            damping=servo.damping,
            max_linear_speed=servo.max_linear_speed,
        )

    @property
    def desired_vector(self) -> np.ndarray:
        return np.array([self.desired.u, self.desired.v, self.desired.r])


def depth_from_radius(radius: float, config: ServoConfig) -> float:
    """d = sqrt(fx * fy * A_r / A) with A = pi * r^2."""
    area = np.pi * radius ** 2
    return float(np.sqrt(config.fx * config.fy * config.target_area / area))


@dataclass(frozen=True)
class FeatureVector:
    u: float
    v: float
    r: float
    area: float
    depth: float

    @classmethod
    def from_radius(cls, u: float, v: float, r: float, config: ServoConfig) -> "FeatureVector":
        if not r > 0.0:
            raise ServoError(f"Feature radius must be positive, got {r}")
        return cls(float(u), float(v), float(r), float(np.pi * r ** 2), depth_from_radius(r, config))

    @classmethod
    def from_observation(cls, observation: CircleObservation, config: ServoConfig) -> "FeatureVector":
        """Center the raw pixel observation on the principal point."""
        if not observation.valid:
            raise ServoError("Cannot build features from an invalid circle observation")
        return cls.from_radius(observation.u - config.cx, observation.v - config.cy,
                               observation.radius, config)

    def as_array(self) -> np.ndarray:
        return np.array([self.u, self.v, self.r])


@dataclass(frozen=True)
class ServoCommand:
    camera_twist: np.ndarray
    body_twist: np.ndarray
    clamped: Tuple[bool, ...]


def feature_error(s: FeatureVector, desired: DesiredFeatures) -> np.ndarray:
    return np.array([s.u - desired.u, s.v - desired.v, s.r - desired.r])


def interaction_matrix(s: FeatureVector, config: ServoConfig) -> np.ndarray:
    """Interaction matrix of the (u, v, r) circle features for a camera twist [v; omega]."""
    u, v, r, d = s.u, s.v, s.r, s.depth
    fx, fy = config.fx, config.fy
    if not d > 0.0:
        raise ServoError(f"Interaction matrix needs a positive depth, got {d}")
    return np.array([
        [-fx / d, 0.0, u / d, u * v / fx, -(fx ** 2 + u ** 2) / fx, v],
        [0.0, -fy / d, v / d, (fx ** 2 + v ** 2) / fy, -u * v / fy, -u],
        [0.0, 0.0, r / d, -r * v / fy, r * u / fx, 0.0],
    ])


def damped_pseudo_inverse(matrix: np.ndarray, damping: float) -> np.ndarray:
    rows = matrix.shape[0]
    return matrix.T @ np.linalg.inv(matrix @ matrix.T + damping ** 2 * np.eye(rows))


def servo_twist(error: np.ndarray, interaction: np.ndarray, config: ServoConfig,
                apply_limits: bool = True) -> ServoCommand:
    """
    Translational camera twist that drives the feature error down at rate `gain`.

    Only the translation columns of the interaction matrix are inverted since
    the motion controller holds the attitude level. The speed limit scales the
    whole translation so the error keeps shrinking along a straight line in
    the image.
    """
    translation = -config.gain * damped_pseudo_inverse(interaction[:, :3], config.damping) \
        @ np.asarray(error, dtype=float)
    scaled = False
    if apply_limits:
        peak = float(np.max(np.abs(translation)))
        if peak > config.max_linear_speed:
            translation = translation * (config.max_linear_speed / peak)
            scaled = True
    twist = np.concatenate((translation, np.zeros(3)))
    body = np.concatenate((ROTATION_BODY_CAMERA @ translation, np.zeros(3)))
    return ServoCommand(twist, body, (scaled,) * 3 + (False,) * 3)


def kinematic_servo_rollout(s0: FeatureVector, config: ServoConfig, duration: float,
                            dt: float = 1e-3) -> Tuple[np.ndarray, np.ndarray]:
    """
    Integrate the closed kinematic loop s_dot = L(s) v_c(s) with RK4.

    The camera is driven directly by the unscaled twist and the depth is
    re-derived from the radius at every stage.

    Returns:
        Sample times and feature errors, shapes (N,) and (N, 3)
    """
    desired = config.desired

    def rate(state: np.ndarray) -> np.ndarray:
        s = FeatureVector.from_radius(state[0], state[1], state[2], config)
        interaction = interaction_matrix(s, config)
        command = servo_twist(feature_error(s, desired), interaction, config, apply_limits=False)
        return interaction @ command.camera_twist

    steps = int(round(duration / dt))
    state = s0.as_array()
    times = [0.0]
    errors = [state - config.desired_vector]
    for k in range(steps):
        k1 = rate(state)
        k2 = rate(state + 0.5 * dt * k1)
        k3 = rate(state + 0.5 * dt * k2)
        k4 = rate(state + dt * k3)
        state = state + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        times.append((k + 1) * dt)
        errors.append(state - config.desired_vector)
    return np.array(times), np.array(errors)


def alignment_error_m(error: np.ndarray, depth: float, config: ServoConfig) -> float:
    """Lateral center error converted from pixels to metres at the given depth."""
    return float(np.hypot(error[0] / config.fx, error[1] / config.fy) * depth)


def desired_features(scenario: Scenario) -> DesiredFeatures:
    """
    Features seen when the end-effector tip touches the hole center with the vehicle level.

    The contact pose places the tip on the hole center, yaw at the motion
    controller's reference.
    """
    yaw = np.deg2rad(scenario.motion.yaw_reference_deg)
    c, s = np.cos(yaw), np.sin(yaw)
    rotation = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    hole = np.asarray(scenario.wall.hole_center, dtype=float)
    body = hole - rotation @ np.asarray(scenario.vehicle.end_effector_offset)
    camera_center = body + rotation @ np.asarray(scenario.camera.position_body)
    point = (rotation @ ROTATION_BODY_CAMERA).T @ (hole - camera_center)
    if point[2] <= 0.0:
        raise ServoError("Target is behind the camera at the contact pose")
    cam = scenario.camera
    radius = np.sqrt(scenario.wall.target_area * cam.fx * cam.fy / point[2] ** 2 / np.pi)
    return DesiredFeatures(u=float(cam.fx * point[0] / point[2]),
                           v=float(cam.fy * point[1] / point[2]),
                           r=float(radius))


class ServoMonitor:
    """Tracks how long the target has been invalid; past the timeout the servo stops."""

    def __init__(self, timeout: float):
        self.timeout = timeout
        self.last_valid: Optional[float] = None
        self.lost = False

    def update(self, timestamp: float, valid: bool) -> bool:
        """Returns True while the target counts as lost."""
        if valid:
            self.last_valid = timestamp
            if self.lost:
                logger.info(f"Target reacquired at t={timestamp:.3f}s")
            self.lost = False
            return False
        reference = self.last_valid if self.last_valid is not None else 0.0
        if timestamp - reference > self.timeout and not self.lost:
            self.lost = True
            logger.warning(f"Target lost for more than {self.timeout:.2f}s at t={timestamp:.3f}s")
        return self.lost

    def check(self, timestamp: float, holding_force: bool) -> None:
        """Raise when the target is lost outside force holding."""
        if self.lost and not holding_force:
            raise LostTargetError(f"Target invalid for more than {self.timeout:.2f}s at t={timestamp:.3f}s")
