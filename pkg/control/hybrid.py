"""Hybrid force-motion control: confidence blending, impedance force law, wrench composition and phases."""
from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np

from control.ibvs import (FeatureVector, ServoCommand, ServoConfig, ServoMonitor, feature_error,
                          interaction_matrix, servo_twist)
from control.motion import MotionController
from estimation.contact_detector import ContactDetector, normal_force
from logging_utils import get_logger
from models.schemas import BlendConfig, ImpedanceConfig, Phase, Scenario
from simulation.sensors import CircleObservation, FtSample
from simulation.vehicle import AllocationResult, allocate

logger = get_logger()

SATURATION_WARN_TICKS = 250


def blend_lambda(depth: float, config: BlendConfig) -> float:
    """Cosine confidence weight: 1 at or below d_min, 0 at or beyond d_max."""
    if depth <= config.d_min:
        return 1.0
    if depth >= config.d_max:
        return 0.0
    ratio = (depth - config.d_min) / (config.d_max - config.d_min)
    return 0.5 * (1.0 + np.cos(ratio * np.pi))


@dataclass(frozen=True)
class ImpedanceState:
    integral: float = 0.0
    previous_error: Optional[float] = None


def impedance_force(force: float, scaling_error: float, scaling_error_rate: float,
                    config: ImpedanceConfig, dt: float,
                    state: Optional[ImpedanceState] = None) -> Tuple[float, ImpedanceState]:
    """
    Normal force command from the impedance law.

    F_f = F_r - K_ep * e_x - K_ed * de_x - K_fp * e_f - K_fi * int(e_f),
    with e_f = F - F_r integrated by the trapezoidal rule. The integral term
    is clamped to +/- integral_limit.

    Args:
        force: Measured normal force F [N]
        scaling_error: Radius error e_x [px]
        scaling_error_rate: Filtered derivative of e_x [px/s]
        config: Impedance gains
        dt: Time since the previous update [s]
        state: Integrator state from the previous call

    Returns:
        The force command and the updated integrator state
    """
    state = state or ImpedanceState()
    error = force - config.reference_force
    previous = error if state.previous_error is None else state.previous_error
    integral = state.integral + 0.5 * (previous + error) * dt
    bound = config.integral_limit / config.force_i
    integral = float(np.clip(integral, -bound, bound))
    command = (config.reference_force
               - config.stiffness * scaling_error
               - config.damping * scaling_error_rate
               - config.force_p * error
               - config.force_i * integral)
    return float(command), ImpedanceState(integral=integral, previous_error=error)


@dataclass(frozen=True)
class WrenchCommand:
    total: np.ndarray
    motion: np.ndarray
    force: np.ndarray
    lam: float


def _spatial(rotation: np.ndarray) -> np.ndarray:
    block = np.zeros((6, 6))
    block[:3, :3] = rotation
    block[3:, 3:] = rotation
    return block


def compose_wrench(motion_wrench: np.ndarray, force_command: float, lam: float,
                   rotation_body_contact: np.ndarray) -> WrenchCommand:
    """tau_B = R_BC ((I - Lambda) R_CB tau_vs + Lambda tau_f), Lambda = diag(lam, 0, 0, 0, 0, 0)."""
    motion = np.asarray(motion_wrench, dtype=float)
    force = np.zeros(6)
    force[0] = force_command
    if lam == 0.0:
        return WrenchCommand(motion.copy(), motion, force, lam)
    selection = np.diag([lam, 0.0, 0.0, 0.0, 0.0, 0.0])
    to_body = _spatial(rotation_body_contact)
    total = to_body @ ((np.eye(6) - selection) @ to_body.T @ motion + selection @ force)
    return WrenchCommand(total, motion, force, lam)


def contact_frame_rotation(normal_world: np.ndarray, rotation_world_body: np.ndarray) -> np.ndarray:
    """
    R_BC for a contact frame whose x-axis points into the wall.

    The z-axis is world up made orthogonal to x; y completes the right-handed
    frame.
    """
    x_axis = -np.asarray(normal_world, dtype=float)
    x_axis = x_axis / np.linalg.norm(x_axis)
    up = np.array([0.0, 0.0, 1.0])
    z_axis = up - (up @ x_axis) * x_axis
    if np.linalg.norm(z_axis) < 1e-9:
        fallback = np.array([1.0, 0.0, 0.0])
        z_axis = fallback - (fallback @ x_axis) * x_axis
    z_axis = z_axis / np.linalg.norm(z_axis)
    y_axis = np.cross(z_axis, x_axis)
    rotation_world_contact = np.column_stack((x_axis, y_axis, z_axis))
    return np.asarray(rotation_world_body).T @ rotation_world_contact


@dataclass(frozen=True)
class PhaseState:
    phase: Phase
    entered_at: float
    contact_lost_at: Optional[float] = None


def phase_update(state: PhaseState, depth: Optional[float], contact: bool, config: BlendConfig,
                 timestamp: float = 0.0, dwell: float = 0.0) -> PhaseState:
    """
    Advance the phase machine.

    Approach moves to Transition once the target depth drops below d_max,
    Transition moves to ForceHold on a contact event, and ForceHold falls back
    to Transition after contact has been off for longer than `dwell`.
    """
    if state.phase is Phase.APPROACH:
        if depth is not None and depth < config.d_max:
            return PhaseState(Phase.TRANSITION, timestamp)
        return state
    if state.phase is Phase.TRANSITION:
        if contact:
            return PhaseState(Phase.FORCE_HOLD, timestamp)
        return state
    if contact:
        return replace(state, contact_lost_at=None) if state.contact_lost_at is not None else state
    if state.contact_lost_at is None:
        return replace(state, contact_lost_at=timestamp)
    if timestamp - state.contact_lost_at > dwell:
        return PhaseState(Phase.TRANSITION, timestamp)
    return state


class LowPassDerivative:
    """First-order low-passed finite difference, updated on new samples only."""

    def __init__(self, cutoff_hz: float):
        self.time_constant = 1.0 / (2.0 * np.pi * cutoff_hz)
        self.value = 0.0
        self._last: Optional[Tuple[float, float]] = None

    def update(self, timestamp: float, sample: float) -> float:
        if self._last is not None:
            dt = timestamp - self._last[0]
            if dt > 0.0:
                raw = (sample - self._last[1]) / dt
                self.value += dt / (self.time_constant + dt) * (raw - self.value)
        self._last = (timestamp, sample)
        return self.value


@dataclass(frozen=True)
class ControlInputs:
    """Snapshot handed to the controller each tick; circle and ft are only the newest samples."""
    timestamp: float
    velocity_world: np.ndarray
    rotation: np.ndarray
    angular_velocity: np.ndarray
    circle: Optional[CircleObservation] = None
    ft: Optional[FtSample] = None


@dataclass(frozen=True)
class ControlOutput:
    timestamp: float
    phase: Phase
    lam: float
    depth: Optional[float]
    feature_error: Optional[np.ndarray]
    servo: ServoCommand
    command: WrenchCommand
    force_measured: float
    force_command: float
    contact: bool
    target_lost: bool
    allocation: AllocationResult


class HybridController:
    """
    Control-rate state machine from servo features and force measurements to rotor speeds.

    Blending uses the area-derived depth while the target is visible. In
    ForceHold the depth freezes at its last value and lambda is held at 1.
    """

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.params = scenario.vehicle
        self.servo_config = ServoConfig.from_scenario(scenario)
        self.blend = scenario.blend
        self.impedance = scenario.impedance
        self.motion = MotionController(scenario.motion, scenario.vehicle)
        self.detector = ContactDetector(scenario.contact_detection)
        self.monitor = ServoMonitor(scenario.servo.lost_target_timeout)
        self.derivative = LowPassDerivative(scenario.impedance.derivative_cutoff_hz)
        self.normal = scenario.wall.normal_vector
        self.phase = PhaseState(Phase.APPROACH, 0.0)
        self.impedance_state = ImpedanceState()
        self.features: Optional[FeatureVector] = None
        self.error: Optional[np.ndarray] = None
        self.depth: Optional[float] = None
        self.force = 0.0
        self._last_time: Optional[float] = None
        self._saturated_ticks = 0

    def _observe(self, timestamp: float, circle: Optional[CircleObservation]) -> None:
        if circle is None:
            return
        lost = self.monitor.update(timestamp, circle.valid)
        if circle.valid:
            self.features = FeatureVector.from_observation(circle, self.servo_config)
            self.error = feature_error(self.features, self.servo_config.desired)
            self.derivative.update(timestamp, float(self.error[2]))
            if self.phase.phase is not Phase.FORCE_HOLD:
                self.depth = self.features.depth
        elif lost:
            self.features = None

    def _servo(self) -> ServoCommand:
        if self.features is None or self.error is None or self.monitor.lost:
            return ServoCommand(np.zeros(6), np.zeros(6), (False,) * 6)
        return servo_twist(self.error, interaction_matrix(self.features, self.servo_config),
                           self.servo_config)

    def tick(self, inputs: ControlInputs) -> ControlOutput:
        t = inputs.timestamp
        dt = 0.0 if self._last_time is None else t - self._last_time
        self._last_time = t
        rotation = np.asarray(inputs.rotation, dtype=float)

        self._observe(t, inputs.circle)
        if inputs.ft is not None:
            self.force = normal_force(inputs.ft.force, rotation.T @ self.normal)
            self.detector.update(inputs.ft.timestamp, self.force)
        contact = self.detector.in_contact

        previous = self.phase.phase
        self.phase = phase_update(self.phase, self.depth, contact, self.blend, t,
                                  self.scenario.contact_detection.dwell)
        if self.phase.phase is not previous:
            logger.info(f"Phase {previous.value} -> {self.phase.phase.value} at t={t:.3f}s")
        holding = self.phase.phase is Phase.FORCE_HOLD
        self.monitor.check(t, holding)

        if holding:
            lam = 1.0
        elif self.depth is None:
            lam = 0.0
        else:
            lam = blend_lambda(self.depth, self.blend)

        servo = self._servo()
        velocity_body = rotation.T @ np.asarray(inputs.velocity_world, dtype=float)
        motion = self.motion.update(servo.body_twist, velocity_body, rotation, inputs.angular_velocity, dt)

        measured = self.force if contact else self.impedance.reference_force
        scaling = float(self.error[2]) if self.error is not None else 0.0
        force_command, self.impedance_state = impedance_force(
            measured, scaling, self.derivative.value, self.impedance, dt, self.impedance_state)

        command = compose_wrench(motion, force_command, lam, contact_frame_rotation(self.normal, rotation))
        allocation = allocate(command.total, self.params)
        self._saturated_ticks = self._saturated_ticks + 1 if allocation.saturated else 0
        if self._saturated_ticks == SATURATION_WARN_TICKS:
            logger.warning(f"Rotor thrusts saturated for {SATURATION_WARN_TICKS} control ticks at t={t:.3f}s")

        return ControlOutput(
            timestamp=t,
            phase=self.phase.phase,
            lam=lam,
            depth=self.depth,
            feature_error=None if self.error is None else self.error.copy(),
            servo=servo,
            command=command,
            force_measured=self.force,
            force_command=force_command,
            contact=contact,
            target_lost=self.monitor.lost,
            allocation=allocation,
        )
