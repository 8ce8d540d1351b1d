"""Fixed-step vehicle simulator owning the true state and the seeded sensor streams."""
from dataclasses import dataclass, replace
from typing import Dict, Optional

import numpy as np

from geometry.rotations import UnitQuaternion
from logging_utils import get_logger
from models.schemas import Scenario
from simulation.contact import end_effector_kinematics
from simulation.landmarks import generate_landmark_field
from simulation.sensors import (CameraModel, CameraObservation, FtSample, ImuBias, ImuSample,
                                sample_camera, sample_ft, sample_imu)
from simulation.vehicle import SimState, allocate, step_dynamics

logger = get_logger()

# Spawn order is part of the determinism contract: appending is safe, reordering is not.
STREAM_ORDER = ("landmarks", "imu", "ft", "camera", "velocity_noise", "estimator_init")


def spawn_streams(seed: int) -> Dict[str, np.random.Generator]:
    """Independent generators for every random consumer, derived from one seed."""
    children = np.random.SeedSequence(seed).spawn(len(STREAM_ORDER))
    return {name: np.random.default_rng(child) for name, child in zip(STREAM_ORDER, children)}


@dataclass(frozen=True)
class SensorFrame:
    """Everything produced by one simulator step; absent sensors are None."""
    state: SimState
    imu: Optional[ImuSample] = None
    ft: Optional[FtSample] = None
    camera: Optional[CameraObservation] = None


class VehicleSimulator:
    """
    Deterministic simulation of the hexarotor in front of the wall.

    Sensors fire on integer step multiples of their periods, and timestamps are
    computed as step_index * dt so that rates never drift.
    """

    def __init__(self, scenario: Scenario, streams: Optional[Dict[str, np.random.Generator]] = None):
        self.scenario = scenario
        self.params = scenario.vehicle
        self.wall = scenario.wall
        self.timing = scenario.timing
        self.dt = scenario.timing.dt
        self.streams = streams if streams is not None else spawn_streams(scenario.seed)
        self.camera = CameraModel(scenario.camera)
        self.landmarks = generate_landmark_field(scenario.wall, scenario.landmarks, self.streams["landmarks"])

        self.imu_steps = self.timing.period_steps(self.timing.imu_rate)
        self.ft_steps = self.timing.period_steps(self.timing.ft_rate)
        self.camera_steps = self.timing.period_steps(self.timing.camera_rate)

        imu_noise = scenario.noise.imu
        imu_rng = self.streams["imu"]
        self.imu_bias = ImuBias(
            accel=imu_noise.initial_accel_bias_sigma * imu_rng.standard_normal(3),
            gyro=imu_noise.initial_gyro_bias_sigma * imu_rng.standard_normal(3),
        )

        orientation = UnitQuaternion.from_euler(0.0, 0.0, np.deg2rad(scenario.initial_state.yaw_deg))
        hover = allocate(self.hover_wrench(orientation), self.params)
        self.state = SimState.at_rest(scenario.initial_state.position, orientation, hover.rotor_speeds)
        self.step_index = 0
        logger.debug(f"Simulator ready with {len(self.landmarks)} landmarks, "
                     f"camera every {self.camera_steps} steps")

    def hover_wrench(self, orientation: UnitQuaternion) -> np.ndarray:
        weight_world = np.array([0.0, 0.0, self.params.mass * 9.81])
        return np.concatenate((orientation.as_matrix().T @ weight_world, np.zeros(3)))

    @property
    def time(self) -> float:
        return self.step_index * self.dt

    def step(self, rotor_speeds: np.ndarray) -> SensorFrame:
        """Integrate one step and sample whichever sensors are due at the new time."""
        state = step_dynamics(self.state, rotor_speeds, self.wall, self.params, self.dt)
        self.step_index += 1
        self.state = replace(state, time=self.time)

        imu = ft = camera = None
        if self.step_index % self.imu_steps == 0:
            imu, self.imu_bias = sample_imu(self.state, self.state.acceleration, self.imu_bias,
                                            self.scenario.noise.imu, self.streams["imu"],
                                            self.imu_steps * self.dt)
        if self.step_index % self.ft_steps == 0:
            ft = sample_ft(self.state.contact_wrench, self.scenario.noise.ft, self.streams["ft"], self.time)
        if self.step_index % self.camera_steps == 0:
            camera = sample_camera(self.state, self.wall, self.landmarks, self.camera,
                                   self.scenario.noise.camera, self.streams["camera"],
                                   self.scenario.landmarks.max_features_per_frame)
        return SensorFrame(self.state, imu, ft, camera)

    def end_effector_position(self) -> np.ndarray:
        return self.end_effector_state()[0]

    def end_effector_velocity(self) -> np.ndarray:
        return self.end_effector_state()[1]

    def end_effector_state(self):
        s = self.state
        return end_effector_kinematics(s.position, s.velocity, s.orientation.as_matrix(),
                                       s.angular_velocity, self.params)
