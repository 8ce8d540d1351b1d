"""Fully-actuated tilted hexarotor: control allocation and Newton-Euler dynamics."""
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Optional

import numpy as np

from exceptions import ConfigError, SimulationDivergenceError
from geometry.rotations import UnitQuaternion, quat_exp
from logging_utils import get_logger
from models.schemas import VehicleParams, WallModel
from simulation.contact import ContactWrench, contact_wrench

logger = get_logger()

GRAVITY = 9.81
GRAVITY_WORLD = np.array([0.0, 0.0, -GRAVITY])
NUM_ROTORS = 6


@dataclass(frozen=True)
class SimState:
    """Ground-truth vehicle state. Orientation maps body vectors into the world frame."""
    time: float
    position: np.ndarray
    velocity: np.ndarray
    orientation: UnitQuaternion
    angular_velocity: np.ndarray
    rotor_speeds: np.ndarray
    in_contact: bool = False
    contact_wrench: np.ndarray = field(default_factory=lambda: np.zeros(6))
    acceleration: np.ndarray = field(default_factory=lambda: np.zeros(3))

    @classmethod
    def at_rest(cls, position, orientation: Optional[UnitQuaternion] = None,
                rotor_speeds: Optional[np.ndarray] = None) -> "SimState":
        return cls(
            time=0.0,
            position=np.asarray(position, dtype=float),
            velocity=np.zeros(3),
            orientation=orientation or UnitQuaternion.identity(),
            angular_velocity=np.zeros(3),
            rotor_speeds=np.zeros(NUM_ROTORS) if rotor_speeds is None else np.asarray(rotor_speeds, dtype=float),
        )


@dataclass(frozen=True)
class AllocationResult:
    rotor_speeds: np.ndarray
    thrusts: np.ndarray
    saturated: bool


def rotor_geometry(params: VehicleParams):
    """Per-rotor arm positions and unit thrust axes in the body frame."""
    positions = np.zeros((NUM_ROTORS, 3))
    axes = np.zeros((NUM_ROTORS, 3))
    for i in range(NUM_ROTORS):
        psi = np.pi / 6.0 + i * np.pi / 3.0
        tilt = params.rotor_tilt * (1.0 if i % 2 == 0 else -1.0)
        positions[i] = params.arm_length * np.array([np.cos(psi), np.sin(psi), 0.0])
        # Thrust axis: body z rotated about the arm direction by the signed tilt
        axes[i] = np.array([np.sin(tilt) * np.sin(psi), -np.sin(tilt) * np.cos(psi), np.cos(tilt)])
    return positions, axes


def allocation_matrix(params: VehicleParams) -> np.ndarray:
    """
    Map per-rotor thrust magnitudes to the body wrench [force; torque].

    Args:
        params: Vehicle parameters

    Returns:
        6x6 allocation matrix B with wrench = B @ thrusts

    Raises:
        ConfigError: If the rotor geometry cannot produce a full 6-DoF wrench
    """
    positions, axes = rotor_geometry(params)
    torque_ratio = params.drag_coefficient / params.thrust_coefficient
    columns = []
    for i in range(NUM_ROTORS):
        spin = params.spin_directions[i]
        torque = np.cross(positions[i], axes[i]) - spin * torque_ratio * axes[i]
        columns.append(np.concatenate((axes[i], torque)))
    matrix = np.column_stack(columns)
    force_rank = np.linalg.matrix_rank(matrix[:3], tol=1e-9)
    if force_rank < 3 or np.linalg.matrix_rank(matrix, tol=1e-9) < 6:
        raise ConfigError(
            f"Allocation matrix is rank deficient (force rank {force_rank}) "
            f"for rotor tilt {params.rotor_tilt_deg} deg"
        )
    return matrix


@lru_cache(maxsize=16)
def _allocation_inverse(params: VehicleParams) -> np.ndarray:
    return np.linalg.inv(allocation_matrix(params))


def allocate(wrench_cmd: np.ndarray, params: VehicleParams) -> AllocationResult:
    """Distribute a body wrench to rotor speeds, clamping to the feasible thrust range."""
    thrusts = _allocation_inverse(params) @ np.asarray(wrench_cmd, dtype=float)
    clamped = np.clip(thrusts, 0.0, params.max_thrust)
    saturated = bool(np.any(clamped != thrusts))
    speeds = np.sqrt(clamped / params.thrust_coefficient)
    return AllocationResult(rotor_speeds=speeds, thrusts=clamped, saturated=saturated)


def rotor_wrench(rotor_speeds: np.ndarray, params: VehicleParams) -> np.ndarray:
    thrusts = params.thrust_coefficient * np.square(rotor_speeds)
    return allocation_matrix_cached(params) @ thrusts


@lru_cache(maxsize=16)
def allocation_matrix_cached(params: VehicleParams) -> np.ndarray:
    return allocation_matrix(params)


def mechanical_energy(state: SimState, params: VehicleParams) -> float:
    inertia = params.inertia_matrix
    kinetic = 0.5 * params.mass * float(state.velocity @ state.velocity)
    rotational = 0.5 * float(state.angular_velocity @ inertia @ state.angular_velocity)
    return kinetic + rotational + params.mass * GRAVITY * float(state.position[2])


def step_dynamics(state: SimState, rotor_speeds: np.ndarray, wall: Optional[WallModel],
                  params: VehicleParams, dt: float) -> SimState:
    """
    Advance the rigid body by one semi-implicit Euler step.

    Args:
        state: Current state
        rotor_speeds: Commanded rotor speeds [rad/s]
        wall: Wall model, or None for free flight
        params: Vehicle parameters
        dt: Step length in seconds, in (0, 0.01]

    Returns:
        The next state

    Raises:
        SimulationDivergenceError: If the integrated state is not finite
    """
    if not 0.0 < dt <= 0.01:
        raise ValueError(f"dt must be in (0, 0.01], got {dt}")

    commanded = np.clip(np.asarray(rotor_speeds, dtype=float), 0.0, params.max_rotor_speed)
    if params.motor_time_constant > 0.0:
        blend = min(1.0, dt / params.motor_time_constant)
        speeds = state.rotor_speeds + blend * (commanded - state.rotor_speeds)
    else:
        speeds = commanded

    rotation = state.orientation.as_matrix()
    wrench = rotor_wrench(speeds, params)
    contact = contact_wrench(state, wall, params) if wall is not None else ContactWrench.zero()

    force_world = rotation @ wrench[:3] + contact.force_world
    acceleration = force_world / params.mass + GRAVITY_WORLD
    inertia = params.inertia_matrix
    omega = state.angular_velocity
    torque = wrench[3:] + contact.torque_body - np.cross(omega, inertia @ omega)
    angular_acceleration = np.linalg.solve(inertia, torque)

    velocity = state.velocity + acceleration * dt
    position = state.position + velocity * dt
    angular_velocity = omega + angular_acceleration * dt
    orientation = state.orientation * quat_exp(angular_velocity * dt)

    if not (np.all(np.isfinite(position)) and np.all(np.isfinite(velocity))
            and np.all(np.isfinite(angular_velocity)) and np.all(np.isfinite(orientation.coeffs))):
        logger.error(f"Non-finite state at t={state.time + dt:.6f}")
        raise SimulationDivergenceError(
            f"Simulation diverged at t={state.time + dt:.6f}s "
            f"(position={position}, velocity={velocity})"
        )

    return replace(
        state,
        time=state.time + dt,
        position=position,
        velocity=velocity,
        orientation=orientation,
        angular_velocity=angular_velocity,
        rotor_speeds=speeds,
        in_contact=contact.in_contact,
        contact_wrench=np.concatenate((contact.force_sensor, contact.torque_sensor)),
        acceleration=acceleration,
    )
