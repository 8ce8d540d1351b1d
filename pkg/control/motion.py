"""Body-velocity PID with gravity feedforward and attitude PD: the motion half of the hybrid controller."""
from typing import Optional

import numpy as np

from geometry.rotations import rot_z
from models.schemas import MotionConfig, VehicleParams
from simulation.vehicle import GRAVITY


def attitude_error(rotation: np.ndarray, desired: np.ndarray) -> np.ndarray:
    """e_R = 0.5 * vee(R_d^T R - R^T R_d), in body axes."""
    m = desired.T @ rotation - rotation.T @ desired
    return 0.5 * np.array([m[2, 1], m[0, 2], m[1, 0]])


class MotionController:
    """
    Tracks a commanded body twist.

    The translational part is a PID on the body-velocity error plus the
    weight expressed in body axes. The rotational part holds the vehicle level
    at the reference yaw with a PD on the attitude error; the commanded body
    angular rate is ignored.
    """

    def __init__(self, config: MotionConfig, params: VehicleParams):
        self.config = config
        self.params = params
        self.kp = np.asarray(config.velocity_kp, dtype=float)
        self.ki = np.asarray(config.velocity_ki, dtype=float)
        self.kd = np.asarray(config.velocity_kd, dtype=float)
        self.attitude_kp = np.asarray(config.attitude_kp, dtype=float)
        self.attitude_kd = np.asarray(config.attitude_kd, dtype=float)
        self.desired_rotation = rot_z(np.deg2rad(config.yaw_reference_deg))
        self.integral = np.zeros(3)
        self._previous_error: Optional[np.ndarray] = None

    def reset(self) -> None:
        self.integral = np.zeros(3)
        self._previous_error = None

    def gravity_feedforward(self, rotation: np.ndarray) -> np.ndarray:
        return rotation.T @ np.array([0.0, 0.0, self.params.mass * GRAVITY])

    def update(self, desired_twist: np.ndarray, velocity_body: np.ndarray, rotation: np.ndarray,
               angular_velocity: np.ndarray, dt: float) -> np.ndarray:
        """
        Compute the motion wrench.

        Args:
            desired_twist: Commanded body twist [v; omega] (6,)
            velocity_body: Estimated linear velocity in body axes
            rotation: Estimated attitude R_WB
            angular_velocity: Body angular rate
            dt: Time since the previous update

        Returns:
            Body wrench [force; torque] (6,)
        """
        error = np.asarray(desired_twist[:3], dtype=float) - np.asarray(velocity_body, dtype=float)
        if dt > 0.0:
            self.integral = self.integral + error * dt
            # Anti-windup: clamp the integral term, not the raw integral
            term_limit = self.config.integral_limit
            with np.errstate(divide="ignore", invalid="ignore"):
                bound = np.where(self.ki > 0.0, term_limit / self.ki, 0.0)
            self.integral = np.clip(self.integral, -bound, bound)
            derivative = np.zeros(3) if self._previous_error is None else (error - self._previous_error) / dt
        else:
            derivative = np.zeros(3)
        self._previous_error = error

        force = (self.kp * error + self.ki * self.integral + self.kd * derivative
                 + self.gravity_feedforward(rotation))
        torque = (-self.attitude_kp * attitude_error(rotation, self.desired_rotation)
                  - self.attitude_kd * np.asarray(angular_velocity, dtype=float))
        return np.concatenate((force, torque))
