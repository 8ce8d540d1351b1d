"""Contact-aware visual-inertial estimator driven by IMU, camera and force/torque streams."""
from collections import deque
from dataclasses import dataclass, replace
from typing import Deque, List, Optional, Sequence

import numpy as np

from estimation.contact_detector import ContactDetector, normal_force
from estimation.factors import ContactFactor, Intrinsics, MarginalPrior, contact_information
from estimation.preintegration import GRAVITY_WORLD, preintegrate, propagate, propagate_step
from estimation.state import EXTRINSIC_KEY, CameraExtrinsic, Landmark, NavState, state_key
from estimation.window import FactorGraphWindow, SolveResult, solve_window
from exceptions import EstimatorError, PreintegrationError
from geometry.rotations import UnitQuaternion, quat_exp
from logging_utils import get_logger
from models.schemas import EstimatorStatus, ImuNoise, Scenario
from simulation.sensors import CameraObservation, FtSample, ImuSample

logger = get_logger()

MIN_DISPARITY = 0.5
EXTRINSIC_PRIOR_SIGMAS = np.array([0.01, 0.01, 0.01, 0.01, 0.01, 0.01])


def weighting_noise(noise: ImuNoise) -> ImuNoise:
    """IMU noise model used to weight preintegration factors, floored to keep the information finite."""
    return ImuNoise(
        accel_noise_density=max(noise.accel_noise_density, 1e-3),
        gyro_noise_density=max(noise.gyro_noise_density, 1e-4),
        accel_bias_walk=max(noise.accel_bias_walk, 1e-5),
        gyro_bias_walk=max(noise.gyro_bias_walk, 1e-6),
    )


@dataclass(frozen=True)
class EstimatorOutput:
    timestamp: float
    status: EstimatorStatus
    state: Optional[NavState]
    keyframe_added: bool = False
    contact_active: bool = False
    contact_weight: float = 0.0
    solve: Optional[SolveResult] = None

    @property
    def velocity(self) -> Optional[np.ndarray]:
        return None if self.state is None else self.state.velocity


def triangulate_midpoint(origin_a: np.ndarray, ray_a: np.ndarray, origin_b: np.ndarray,
                         ray_b: np.ndarray) -> Optional[float]:
    """Depth along ray_a of the midpoint of the shortest segment between two rays."""
    ray_a = ray_a / np.linalg.norm(ray_a)
    ray_b = ray_b / np.linalg.norm(ray_b)
    cross = np.cross(ray_a, ray_b)
    denom = float(cross @ cross)
    if denom < 1e-12:
        return None
    diff = origin_b - origin_a
    s = float(np.cross(diff, ray_b) @ cross) / denom
    t = float(np.cross(diff, ray_a) @ cross) / denom
    midpoint = 0.5 * ((origin_a + s * ray_a) + (origin_b + t * ray_b))
    return float((midpoint - origin_a) @ ray_a)


class ContactAwareEstimator:
    """
    Sliding-window estimator with contact factors gated by a force-threshold detector.

    IMU and F/T samples are fed as they arrive; each camera frame may become a
    keyframe, which triggers a window solve and, when the window is full,
    marginalization of the oldest keyframe. Between keyframes the newest state
    is propagated with the IMU for control-rate feedback.
    """

    def __init__(self, scenario: Scenario, extrinsic: CameraExtrinsic, rng: np.random.Generator):
        self.config = scenario.estimator
        self.imu_noise = weighting_noise(scenario.noise.imu)
        self.wall_normal = scenario.wall.normal_vector
        self.rng = rng
        self.intrinsics = Intrinsics.from_settings(scenario.camera)
        extrinsic = replace(extrinsic, estimated=self.config.estimate_extrinsic)
        self.window = FactorGraphWindow(self.config, self.intrinsics, extrinsic, scenario.noise.camera)
        self.detector = ContactDetector(scenario.contact_detection)
        self.force_window: Deque[float] = deque(maxlen=self.config.force_window)

        self.status = EstimatorStatus.INITIALIZING
        self.imu_buffer: List[ImuSample] = []
        self.keyframe_contact = {}
        self.next_keyframe_id = 0
        self._initial_guess: Optional[NavState] = None
        self._propagated: Optional[NavState] = None
        self._last_imu: Optional[ImuSample] = None
        self._init_warned = False

    # --------------------------------------------------------------- inputs --

    def initialize(self, reference: NavState) -> None:
        """
        Provide the bootstrap state for the first keyframe.

        By default the reference is perturbed with the configured sigmas. With the
        static initializer enabled, roll, pitch and gyro bias come from the IMU
        samples buffered so far and the velocity is taken as zero.
        """
        cfg = self.config
        if cfg.static_initializer and self.imu_buffer:
            accel = np.mean([s.specific_force for s in self.imu_buffer], axis=0)
            gyro = np.mean([s.angular_rate for s in self.imu_buffer], axis=0)
            roll = np.arctan2(accel[1], accel[2])
            pitch = np.arctan2(-accel[0], np.hypot(accel[1], accel[2]))
            yaw = reference.orientation.as_euler()[2]
            self._initial_guess = replace(reference, velocity=np.zeros(3),
                                          orientation=UnitQuaternion.from_euler(roll, pitch, yaw),
                                          gyro_bias=gyro, accel_bias=np.zeros(3))
            logger.info(f"Static initializer: roll={np.rad2deg(roll):.2f} deg, pitch={np.rad2deg(pitch):.2f} deg")
            return
        draws = self.rng.standard_normal(9)
        self._initial_guess = replace(
            reference,
            position=reference.position + cfg.init_position_sigma * draws[0:3],
            velocity=reference.velocity + cfg.init_velocity_sigma * draws[3:6],
            orientation=reference.orientation * quat_exp(np.deg2rad(cfg.init_attitude_sigma_deg) * draws[6:9]),
            accel_bias=np.zeros(3),
            gyro_bias=np.zeros(3),
        )

    def add_imu(self, sample: ImuSample) -> None:
        if self.status is EstimatorStatus.FAILED:
            return
        self.imu_buffer.append(sample)
        if self._propagated is not None and self.status is EstimatorStatus.RUNNING:
            previous = self._last_imu
            if previous is None or previous.timestamp < self._propagated.timestamp:
                previous = ImuSample(self._propagated.timestamp, sample.specific_force, sample.angular_rate)
            self._propagated = propagate_step(self._propagated, previous, sample, GRAVITY_WORLD)
        self._last_imu = sample

    def add_ft(self, sample: FtSample) -> bool:
        """Feed one F/T sample to the contact detector; returns the contact state."""
        attitude = self.latest()
        rotation = attitude.rotation if attitude is not None else np.eye(3)
        force_n = normal_force(sample.force, rotation.T @ self.wall_normal)
        self.force_window.append(force_n)
        return self.detector.update(sample.timestamp, force_n)

    @property
    def in_contact(self) -> bool:
        return self.detector.in_contact

    def latest(self) -> Optional[NavState]:
        """Newest keyframe propagated to the latest IMU sample."""
        return self._propagated

    # ----------------------------------------------------------------- step --

    def estimator_step(self, camera: CameraObservation, imu_samples: Sequence[ImuSample] = (),
                       ft_samples: Sequence[FtSample] = ()) -> EstimatorOutput:
        """
        Process one camera frame, adding a keyframe when due.

        Args:
            camera: Camera observation with persistent landmark ids
            imu_samples: IMU samples not yet fed through add_imu
            ft_samples: F/T samples not yet fed through add_ft

        Returns:
            Status and the newest (propagated) state estimate
        """
        for sample in imu_samples:
            self.add_imu(sample)
        for sample in ft_samples:
            self.add_ft(sample)

        t = camera.timestamp
        if self.status is EstimatorStatus.FAILED:
            return EstimatorOutput(t, self.status, None)
        if self.status is EstimatorStatus.INITIALIZING:
            return self._try_initialize(camera)

        newest = self.window.newest
        if t - newest.timestamp < self.config.keyframe_min_interval - 1e-9:
            return EstimatorOutput(t, self.status, self.latest(), contact_active=self.in_contact)

        try:
            return self._add_keyframe(camera)
        except (EstimatorError, PreintegrationError, np.linalg.LinAlgError) as e:
            self.status = EstimatorStatus.FAILED
            logger.error(f"Estimator failed at t={t:.3f}s: {str(e)}")
            return EstimatorOutput(t, self.status, None)

    def _try_initialize(self, camera: CameraObservation) -> EstimatorOutput:
        t = camera.timestamp
        if self._initial_guess is None or t < self.config.start_time:
            return EstimatorOutput(t, self.status, None)
        seeds = [o for o in camera.valid_landmarks if o.disparity > MIN_DISPARITY]
        if len(seeds) < self.config.min_init_landmarks:
            if not self._init_warned:
                logger.warning(f"Estimator initialization waiting: {len(seeds)} stereo landmarks, "
                               f"need {self.config.min_init_landmarks}")
                self._init_warned = True
            return EstimatorOutput(t, self.status, None)

        cfg = self.config
        first = replace(self._initial_guess, timestamp=t)
        kf_id = self._new_keyframe_id()
        self.window.add_keyframe(kf_id, first)
        sigmas = np.concatenate((
            np.full(3, cfg.prior_position_sigma),
            np.full(3, cfg.prior_velocity_sigma),
            np.full(3, np.deg2rad(cfg.prior_attitude_sigma_deg)),
            np.full(3, cfg.prior_accel_bias_sigma),
            np.full(3, cfg.prior_gyro_bias_sigma),
        ))
        prior = MarginalPrior.from_sigmas(state_key(kf_id), first, sigmas)
        if self.window.extrinsic.estimated:
            ext_prior = MarginalPrior.from_sigmas(EXTRINSIC_KEY, self.window.extrinsic, EXTRINSIC_PRIOR_SIGMAS)
            prior = MarginalPrior(prior.keys + ext_prior.keys,
                                  {**prior.linearization, **ext_prior.linearization},
                                  np.block([[prior.jacobian, np.zeros((15, 6))],
                                            [np.zeros((6, 15)), ext_prior.jacobian]]),
                                  np.zeros(21))
        self.window.prior = prior
        self.keyframe_contact[kf_id] = self.in_contact
        self._observe(kf_id, camera)
        self.status = EstimatorStatus.RUNNING
        self._reset_propagation()
        logger.info(f"Estimator initialized at t={t:.3f}s with {len(seeds)} stereo landmarks")
        return EstimatorOutput(t, self.status, self.latest(), keyframe_added=True)

    def _add_keyframe(self, camera: CameraObservation) -> EstimatorOutput:
        t = camera.timestamp
        window = self.window
        newest_id = window.newest_id
        newest = window.newest
        samples = [s for s in self.imu_buffer if s.timestamp <= t]
        preint = preintegrate(samples, newest.accel_bias, newest.gyro_bias, self.imu_noise,
                              start_time=newest.timestamp, end_time=t)
        guess = replace(preint.predict(newest), timestamp=t)
        kf_id = self._new_keyframe_id()
        window.add_keyframe(kf_id, guess, preint)

        contact_active = False
        weight = 0.0
        self.keyframe_contact[kf_id] = self.in_contact
        if (self.config.contact_factors and self.keyframe_contact.get(newest_id, False)
                and self.in_contact and len(self.force_window) >= 2):
            information = contact_information(list(self.force_window), self.config.alpha,
                                              self.config.variance_floor)
            factor = ContactFactor(newest_id, kf_id, self.wall_normal, information,
                                   tuple(self.force_window), preint.dt)
            window.add_contact_factor(factor)
            contact_active = True
            weight = factor.weight

        self._observe(kf_id, camera)
        result = solve_window(window)
        if result.aborted or not window.newest.is_finite():
            raise EstimatorError(f"Window solve produced a non-finite state at t={t:.3f}s")
        window.marginalize_oldest()
        self.keyframe_contact = {k: v for k, v in self.keyframe_contact.items() if k in window.keyframes}
        self._reset_propagation()
        return EstimatorOutput(t, self.status, self.latest(), keyframe_added=True,
                               contact_active=contact_active, contact_weight=weight, solve=result)

    # -------------------------------------------------------------- helpers --

    def _new_keyframe_id(self) -> int:
        kf_id = self.next_keyframe_id
        self.next_keyframe_id += 1
        return kf_id

    def _reset_propagation(self) -> None:
        newest = self.window.newest
        earlier = [s for s in self.imu_buffer if s.timestamp <= newest.timestamp]
        later = [s for s in self.imu_buffer if s.timestamp > newest.timestamp]
        self.imu_buffer = earlier[-1:] + later
        self._propagated = propagate(newest, later, GRAVITY_WORLD)
        self._last_imu = self.imu_buffer[-1] if self.imu_buffer else None

    def _observe(self, kf_id: int, camera: CameraObservation) -> None:
        """Attach the frame's landmark observations, seeding new landmarks from stereo depth."""
        window = self.window
        scale = self.intrinsics.fx * self.intrinsics.baseline
        for obs in camera.valid_landmarks:
            disparity = obs.disparity if obs.disparity > MIN_DISPARITY else None
            lm = window.landmarks.get(obs.landmark_id)
            if lm is not None and lm.anchor_id in window.keyframes:
                lm.observations[kf_id] = (obs.u, obs.v, disparity)
                if not lm.is_triangulated():
                    self._triangulate(lm, kf_id)
                continue
            window.landmarks[obs.landmark_id] = Landmark(
                landmark_id=obs.landmark_id,
                anchor_id=kf_id,
                inverse_depth=disparity / scale if disparity is not None else float("nan"),
                observations={kf_id: (obs.u, obs.v, disparity)},
            )

    def _triangulate(self, lm: Landmark, kf_id: int) -> None:
        window = self.window
        ext = window.extrinsic
        anchor = window.keyframes[lm.anchor_id]
        other = window.keyframes[kf_id]
        r_bc = ext.rotation_matrix
        ray_a = anchor.rotation @ r_bc @ self.intrinsics.bearing(*lm.anchor_pixel)
        u, v, _ = lm.observations[kf_id]
        ray_b = other.rotation @ r_bc @ self.intrinsics.bearing(u, v)
        cos_parallax = ray_a @ ray_b / (np.linalg.norm(ray_a) * np.linalg.norm(ray_b))
        if np.degrees(np.arccos(np.clip(cos_parallax, -1.0, 1.0))) < self.config.min_parallax_deg:
            return
        origin_a = anchor.position + anchor.rotation @ ext.translation
        origin_b = other.position + other.rotation @ ext.translation
        depth = triangulate_midpoint(origin_a, ray_a, origin_b, ray_b)
        if depth is None:
            return
        # depth is the range along the anchor ray; convert to camera z
        z = depth / np.linalg.norm(self.intrinsics.bearing(*lm.anchor_pixel))
        if z > self.config.min_depth:
            lm.inverse_depth = 1.0 / z
