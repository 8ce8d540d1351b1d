"""IMU preintegration between keyframes and forward propagation of navigation states.

Deltas are expressed in the body frame of the first keyframe and exclude
gravity, so they do not depend on the world-frame state. Integration uses the
midpoint rule on consecutive samples; bias Jacobians are the exact first-order
derivatives of that discrete scheme.
"""
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from estimation.state import NavState
from exceptions import PreintegrationError
from geometry.rotations import UnitQuaternion, quat_exp, right_jacobian, skew
from models.schemas import ImuNoise
from simulation.sensors import ImuSample

GRAVITY_WORLD = np.array([0.0, 0.0, -9.81])


@dataclass(frozen=True, eq=False)
class Preintegrated:
    """
    Relative motion summary between two keyframes.

    `covariance` is the 9x9 covariance of [dp, dv, dtheta]; the bias random
    walk over `dt` is carried separately by `bias_walk_covariance` (6x6).
    """
    delta_p: np.ndarray
    delta_v: np.ndarray
    delta_q: UnitQuaternion
    dt: float
    covariance: np.ndarray
    bias_walk_covariance: np.ndarray
    jac_p_ba: np.ndarray
    jac_p_bg: np.ndarray
    jac_v_ba: np.ndarray
    jac_v_bg: np.ndarray
    jac_q_bg: np.ndarray
    accel_bias: np.ndarray
    gyro_bias: np.ndarray
    samples: tuple = ()

    def corrected(self, accel_bias: np.ndarray, gyro_bias: np.ndarray):
        """First-order bias-corrected deltas (dp, dv, dq)."""
        dba = np.asarray(accel_bias) - self.accel_bias
        dbg = np.asarray(gyro_bias) - self.gyro_bias
        dp = self.delta_p + self.jac_p_ba @ dba + self.jac_p_bg @ dbg
        dv = self.delta_v + self.jac_v_ba @ dba + self.jac_v_bg @ dbg
        dq = self.delta_q * quat_exp(self.jac_q_bg @ dbg)
        return dp, dv, dq

    def predict(self, state: NavState, gravity: np.ndarray = GRAVITY_WORLD) -> NavState:
        """State at the end of the interval, starting from `state` with its biases."""
        dp, dv, dq = self.corrected(state.accel_bias, state.gyro_bias)
        rot = state.rotation
        t = self.dt
        return replace(
            state,
            timestamp=state.timestamp + t,
            position=state.position + state.velocity * t + 0.5 * gravity * t * t + rot @ dp,
            velocity=state.velocity + gravity * t + rot @ dv,
            orientation=state.orientation * dq,
        )


def _extend(samples: Sequence[ImuSample], start_time: Optional[float],
            end_time: Optional[float]) -> list:
    """Hold the first/last sample to cover [start_time, end_time] exactly."""
    extended = list(samples)
    if start_time is not None:
        extended = [s for s in extended if s.timestamp >= start_time]
        if not extended:
            last = samples[-1]
            extended = [ImuSample(start_time, last.specific_force, last.angular_rate)]
        elif extended[0].timestamp > start_time:
            first = extended[0]
            extended.insert(0, ImuSample(start_time, first.specific_force, first.angular_rate))
    if end_time is not None:
        extended = [s for s in extended if s.timestamp <= end_time]
        if not extended:
            raise PreintegrationError("No IMU samples inside the requested interval")
        if extended[-1].timestamp < end_time:
            last = extended[-1]
            extended.append(ImuSample(end_time, last.specific_force, last.angular_rate))
    return extended


def preintegrate(samples: Sequence[ImuSample], accel_bias=None, gyro_bias=None,
                 noise: Optional[ImuNoise] = None, start_time: Optional[float] = None,
                 end_time: Optional[float] = None) -> Preintegrated:
    """
    Preintegrate IMU samples at a bias linearization point.

    Args:
        samples: Time-ordered IMU samples
        accel_bias: Accelerometer bias linearization point (default zero)
        gyro_bias: Gyroscope bias linearization point (default zero)
        noise: Noise densities for covariance propagation (default: no noise)
        start_time: Optional interval start; the first sample is held back to it
        end_time: Optional interval end; the last sample is held up to it

    Returns:
        The preintegrated measurement

    Raises:
        PreintegrationError: On empty input, non-increasing timestamps or no sample inside the interval
    """
    if not samples:
        raise PreintegrationError("Cannot preintegrate an empty IMU sequence")
    stamps = np.array([s.timestamp for s in samples])
    if np.any(np.diff(stamps) <= 0.0):
        raise PreintegrationError("IMU timestamps must be strictly increasing")

    # a single sample is a zero-length hold: identity deltas over dt = 0
    seq = _extend(samples, start_time, end_time)

    ba = np.zeros(3) if accel_bias is None else np.asarray(accel_bias, dtype=float)
    bg = np.zeros(3) if gyro_bias is None else np.asarray(gyro_bias, dtype=float)
    noise = noise or ImuNoise(accel_noise_density=0.0, gyro_noise_density=0.0,
                              accel_bias_walk=0.0, gyro_bias_walk=0.0)

    p = np.zeros(3)
    v = np.zeros(3)
    q = UnitQuaternion.identity()
    cov = np.zeros((9, 9))
    jp_ba = np.zeros((3, 3))
    jp_bg = np.zeros((3, 3))
    jv_ba = np.zeros((3, 3))
    jv_bg = np.zeros((3, 3))
    jq_bg = np.zeros((3, 3))
    eye = np.eye(3)

    for s0, s1 in zip(seq[:-1], seq[1:]):
        dt = s1.timestamp - s0.timestamp
        omega = 0.5 * (s0.angular_rate + s1.angular_rate) - bg
        dq = quat_exp(omega * dt)
        d_rot = dq.as_matrix()
        rot0 = q.as_matrix()
        q1 = q * dq
        rot1 = q1.as_matrix()
        a0 = s0.specific_force - ba
        a1 = s1.specific_force - ba
        acc = 0.5 * (rot0 @ a0 + rot1 @ a1)

        jr = right_jacobian(omega * dt)
        jq_bg_next = d_rot.T @ jq_bg - jr * dt
        dacc_dba = -0.5 * (rot0 + rot1)
        dacc_dbg = 0.5 * (-rot0 @ skew(a0) @ jq_bg - rot1 @ skew(a1) @ jq_bg_next)

        jp_ba = jp_ba + jv_ba * dt + 0.5 * dacc_dba * dt * dt
        jp_bg = jp_bg + jv_bg * dt + 0.5 * dacc_dbg * dt * dt
        jv_ba = jv_ba + dacc_dba * dt
        jv_bg = jv_bg + dacc_dbg * dt
        jq_bg = jq_bg_next

        # Error-state transition for [dp, dv, dtheta]
        a_body = 0.5 * (a0 + d_rot @ a1)
        f = np.eye(9)
        f[0:3, 3:6] = eye * dt
        f[0:3, 6:9] = -0.5 * rot0 @ skew(a_body) * dt * dt
        f[3:6, 6:9] = -rot0 @ skew(a_body) * dt
        f[6:9, 6:9] = d_rot.T
        g = np.zeros((9, 6))
        g[0:3, 0:3] = 0.5 * rot0 * dt * dt
        g[3:6, 0:3] = rot0 * dt
        g[6:9, 3:6] = jr * dt
        q_noise = np.diag(np.concatenate((
            np.full(3, noise.accel_noise_density ** 2 / dt),
            np.full(3, noise.gyro_noise_density ** 2 / dt),
        )))
        cov = f @ cov @ f.T + g @ q_noise @ g.T

        p = p + v * dt + 0.5 * acc * dt * dt
        v = v + acc * dt
        q = q1

    total = seq[-1].timestamp - seq[0].timestamp
    walk = np.diag(np.concatenate((np.full(3, noise.accel_bias_walk ** 2 * total),
                                   np.full(3, noise.gyro_bias_walk ** 2 * total))))
    return Preintegrated(
        delta_p=p, delta_v=v, delta_q=q, dt=total,
        covariance=0.5 * (cov + cov.T), bias_walk_covariance=walk,
        jac_p_ba=jp_ba, jac_p_bg=jp_bg, jac_v_ba=jv_ba, jac_v_bg=jv_bg, jac_q_bg=jq_bg,
        accel_bias=ba.copy(), gyro_bias=bg.copy(), samples=tuple(samples),
    )


def propagate_step(state: NavState, s0: ImuSample, s1: ImuSample,
                   gravity: np.ndarray = GRAVITY_WORLD) -> NavState:
    """Advance a state from s0.timestamp to s1.timestamp with midpoint integration."""
    dt = s1.timestamp - s0.timestamp
    if dt <= 0.0:
        return state
    rot0 = state.rotation
    omega = 0.5 * (s0.angular_rate + s1.angular_rate) - state.gyro_bias
    orientation = state.orientation * quat_exp(omega * dt)
    rot1 = orientation.as_matrix()
    acc = 0.5 * (rot0 @ (s0.specific_force - state.accel_bias)
                 + rot1 @ (s1.specific_force - state.accel_bias)) + gravity
    return replace(
        state,
        timestamp=s1.timestamp,
        position=state.position + state.velocity * dt + 0.5 * acc * dt * dt,
        velocity=state.velocity + acc * dt,
        orientation=orientation,
    )


def propagate(state: NavState, samples: Sequence[ImuSample],
              gravity: np.ndarray = GRAVITY_WORLD) -> NavState:
    """
    Propagate a navigation state through the IMU samples that follow it.

    The first sample is held back to the state's timestamp; samples at or
    before that timestamp only seed the hold.
    """
    later = [s for s in samples if s.timestamp > state.timestamp]
    if not later:
        return state
    first = later[0]
    current = propagate_step(state, ImuSample(state.timestamp, first.specific_force, first.angular_rate),
                             first, gravity)
    for s0, s1 in zip(later[:-1], later[1:]):
        current = propagate_step(current, s0, s1, gravity)
    return current
