"""Compliant wall contact: spring-damper normal force with tension clamp and viscous tangential friction."""
from dataclasses import dataclass

import numpy as np

from models.schemas import VehicleParams, WallModel


@dataclass(frozen=True)
class ContactWrench:
    force_world: np.ndarray
    force_sensor: np.ndarray
    torque_sensor: np.ndarray
    torque_body: np.ndarray
    penetration: float

    @property
    def in_contact(self) -> bool:
        return self.penetration > 0.0

    @classmethod
    def zero(cls) -> "ContactWrench":
        return cls(np.zeros(3), np.zeros(3), np.zeros(3), np.zeros(3), 0.0)


def end_effector_kinematics(position, velocity, rotation, angular_velocity, params: VehicleParams):
    """World position and velocity of the end-effector tip."""
    r_ee = np.asarray(params.end_effector_offset)
    p_ee = position + rotation @ r_ee
    v_ee = velocity + rotation @ np.cross(angular_velocity, r_ee)
    return p_ee, v_ee


def contact_wrench(state, wall: WallModel, params: VehicleParams) -> ContactWrench:
    """
    Wall reaction on the end-effector.

    Args:
        state: Current simulator state
        wall: Wall geometry and contact parameters
        params: Vehicle parameters (end-effector and sensor mounting)

    Returns:
        Contact wrench in world, sensor and body frames
    """
    rotation = state.orientation.as_matrix()
    p_ee, v_ee = end_effector_kinematics(state.position, state.velocity, rotation,
                                         state.angular_velocity, params)
    n = wall.normal_vector
    penetration = max(0.0, -float(n @ (p_ee - np.asarray(wall.point))))
    if penetration <= 0.0:
        return ContactWrench.zero()

    approach_speed = max(0.0, -float(n @ v_ee))
    # Tension clamp: the wall only ever pushes along +n
    normal_force = max(0.0, wall.stiffness * penetration + wall.damping * approach_speed) * n
    v_tangential = v_ee - float(n @ v_ee) * n
    force_world = normal_force - wall.tangential_friction * v_tangential

    force_body = rotation.T @ force_world
    r_ee = np.asarray(params.end_effector_offset)
    r_sensor = np.asarray(params.force_sensor_offset)
    return ContactWrench(
        force_world=force_world,
        force_sensor=force_body,
        torque_sensor=np.cross(r_ee - r_sensor, force_body),
        torque_body=np.cross(r_ee, force_body),
        penetration=penetration,
    )
