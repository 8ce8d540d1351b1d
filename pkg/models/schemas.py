#models/schemas.py
"""Configuration and result models for the contact bench.

Every config model forbids unknown keys so that a typo in a scenario file is a
configuration error rather than a silently ignored setting.
"""
from enum import Enum
from typing import Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

SCHEMA_VERSION = 1


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class Phase(str, Enum):
    APPROACH = "approach"
    TRANSITION = "transition"
    FORCE_HOLD = "force_hold"


class VelocitySource(str, Enum):
    GROUND_TRUTH = "ground_truth"
    ESTIMATOR = "estimator"


class EstimatorStatus(str, Enum):
    INITIALIZING = "initializing"
    RUNNING = "running"
    FAILED = "failed"


Vector3 = Tuple[float, float, float]


def _unit(v: Vector3, name: str) -> Vector3:
    arr = np.asarray(v, dtype=float)
    norm = np.linalg.norm(arr)
    if norm == 0.0 or not np.isfinite(norm):
        raise ValueError(f"{name} must be a finite non-zero vector")
    return tuple(float(x) for x in arr / norm)


class VehicleParams(StrictModel):
    mass: float = Field(3.0, gt=0)
    inertia: Tuple[Vector3, Vector3, Vector3] = ((0.08, 0.0, 0.0), (0.0, 0.08, 0.0), (0.0, 0.0, 0.14))
    arm_length: float = Field(0.45, gt=0)
    rotor_tilt_deg: float = Field(30.0, gt=0, lt=90)
    thrust_coefficient: float = Field(1.0e-5, gt=0)
    drag_coefficient: float = Field(1.6e-7, gt=0)
    spin_directions: Tuple[int, int, int, int, int, int] = (1, -1, 1, -1, 1, -1)
    end_effector_offset: Vector3 = (0.55, 0.0, 0.0)
    force_sensor_offset: Vector3 = (0.15, 0.0, 0.0)
    max_rotor_speed: float = Field(1400.0, gt=0)
    motor_time_constant: float = Field(0.0, ge=0)

    @field_validator("inertia")
    @classmethod
    def _inertia_spd(cls, value):
        mat = np.asarray(value, dtype=float)
        if not np.allclose(mat, mat.T):
            raise ValueError("inertia must be symmetric")
        if np.min(np.linalg.eigvalsh(mat)) <= 0.0:
            raise ValueError("inertia must be positive definite")
        return value

    @field_validator("spin_directions")
    @classmethod
    def _signs(cls, value):
        if any(s not in (-1, 1) for s in value):
            raise ValueError("spin directions must be +1 or -1")
        return value

    @property
    def rotor_tilt(self) -> float:
        return float(np.deg2rad(self.rotor_tilt_deg))

    @property
    def inertia_matrix(self) -> np.ndarray:
        return np.asarray(self.inertia, dtype=float)

    @property
    def max_thrust(self) -> float:
        return self.thrust_coefficient * self.max_rotor_speed ** 2


class WallModel(StrictModel):
    point: Vector3 = (2.0, 0.0, 0.0)
    normal: Vector3 = (-1.0, 0.0, 0.0)
    stiffness: float = Field(2000.0, ge=0)
    damping: float = Field(120.0, ge=0)
    tangential_friction: float = Field(5.0, ge=0)
    hole_center: Vector3 = (2.0, 0.0, 1.5)
    hole_inner_radius: float = Field(0.025, gt=0)
    target_outer_radius: float = Field(0.07, gt=0)

    @field_validator("normal")
    @classmethod
    def _normalize(cls, value):
        return _unit(value, "wall normal")

    @property
    def normal_vector(self) -> np.ndarray:
        return np.asarray(self.normal, dtype=float)

    @property
    def target_area(self) -> float:
        """Physical area A_r of the circular target [m^2]."""
        return float(np.pi * self.target_outer_radius ** 2)


class CameraSettings(StrictModel):
    fx: float = Field(300.0, gt=0)
    fy: float = Field(300.0, gt=0)
    cx: float = 320.0
    cy: float = 240.0
    width: int = Field(640, gt=0)
    height: int = Field(480, gt=0)
    position_body: Vector3 = (0.30, 0.0, 0.04)
    stereo_baseline: float = Field(0.08, gt=0)
    max_incidence_deg: float = Field(35.0, gt=0, lt=90)
    min_depth: float = Field(0.05, gt=0)


class LandmarkSettings(StrictModel):
    wall_density: float = Field(150.0, ge=0)
    wall_extent_y: Tuple[float, float] = (-1.2, 1.2)
    wall_extent_z: Tuple[float, float] = (0.4, 2.6)
    floor_density: float = Field(8.0, ge=0)
    floor_depth: float = Field(4.0, gt=0)
    floor_extent_y: Tuple[float, float] = (-2.0, 2.0)
    max_features_per_frame: int = Field(40, gt=0)


class ImuNoise(StrictModel):
    accel_noise_density: float = Field(2.0e-3, ge=0)
    gyro_noise_density: float = Field(1.7e-4, ge=0)
    accel_bias_walk: float = Field(3.0e-5, ge=0)
    gyro_bias_walk: float = Field(2.0e-6, ge=0)
    initial_accel_bias_sigma: float = Field(0.02, ge=0)
    initial_gyro_bias_sigma: float = Field(0.002, ge=0)


class FtNoise(StrictModel):
    force_sigma: float = Field(0.1, ge=0)
    torque_sigma: float = Field(0.005, ge=0)


class CameraNoise(StrictModel):
    landmark_pixel_sigma: float = Field(0.5, ge=0)
    disparity_sigma: float = Field(0.3, ge=0)
    circle_center_sigma: float = Field(0.2, ge=0)
    circle_radius_sigma: float = Field(0.02, ge=0)


class NoiseConfig(StrictModel):
    imu: ImuNoise = ImuNoise()
    ft: FtNoise = FtNoise()
    camera: CameraNoise = CameraNoise()


class TimingConfig(StrictModel):
    dt: float = Field(0.001, gt=0, le=0.01)
    imu_rate: float = Field(500.0, gt=0)
    ft_rate: float = Field(200.0, gt=0)
    camera_rate: float = Field(30.0, gt=0)
    control_rate: float = Field(250.0, gt=0)

    def period_steps(self, rate: float) -> int:
        return max(1, int(round(1.0 / (rate * self.dt))))


class ContactDetectionConfig(StrictModel):
    on_threshold: float = Field(2.0, ge=0)
    off_threshold: float = Field(0.5, ge=0)
    dwell: float = Field(0.05, ge=0)

    @model_validator(mode="after")
    def _hysteresis(self):
        if not self.on_threshold > self.off_threshold:
            raise ValueError("contact on-threshold must exceed the off-threshold")
        return self


class EstimatorConfig(StrictModel):
    enabled: bool = False
    contact_factors: bool = True
    alpha: float = Field(1.0, gt=0)
    variance_floor: float = Field(1.0e-4, gt=0)
    force_window: int = Field(20, ge=2)
    window_size: int = Field(10, ge=3)
    keyframe_min_interval: float = Field(0.05, gt=0)
    huber_scale: float = Field(1.0, gt=0)
    max_iterations: int = Field(15, gt=0)
    relative_cost_tol: float = Field(1.0e-6, gt=0)
    step_tol: float = Field(1.0e-8, gt=0)
    min_depth: float = Field(1.0e-3, gt=0)
    min_parallax_deg: float = Field(1.0, gt=0)
    min_init_landmarks: int = Field(8, ge=0)
    init_position_sigma: float = Field(0.01, ge=0)
    init_velocity_sigma: float = Field(0.01, ge=0)
    init_attitude_sigma_deg: float = Field(0.5, ge=0)
    prior_position_sigma: float = Field(0.05, gt=0)
    prior_velocity_sigma: float = Field(0.05, gt=0)
    prior_attitude_sigma_deg: float = Field(2.0, gt=0)
    prior_accel_bias_sigma: float = Field(0.05, gt=0)
    prior_gyro_bias_sigma: float = Field(0.005, gt=0)
    static_initializer: bool = False
    estimate_extrinsic: bool = False
    start_time: float = Field(0.5, ge=0)
    accel_bias_bound: float = Field(1.0, gt=0)
    gyro_bias_bound: float = Field(0.1, gt=0)


class DesiredFeatures(StrictModel):
    u: float
    v: float
    r: float = Field(gt=0)


class ServoSettings(StrictModel):
    gain: float = Field(0.5, gt=0)
    damping: float = Field(1.0e-3, ge=0)
    max_linear_speed: float = Field(0.3, gt=0)
    lost_target_timeout: float = Field(0.5, gt=0)
    desired: Optional[DesiredFeatures] = None


class BlendConfig(StrictModel):
    d_min: float = Field(0.2, gt=0)
    d_max: float = Field(1.0, gt=0)

    @model_validator(mode="after")
    def _ordered(self):
        if not 0.0 < self.d_min < self.d_max:
            raise ValueError("blend requires 0 < d_min < d_max")
        return self


class ImpedanceConfig(StrictModel):
    reference_force: float = 5.0
    stiffness: float = Field(0.02, ge=0)
    damping: float = Field(0.15, ge=0)
    force_p: float = Field(0.3, gt=0)
    force_i: float = Field(1.0, gt=0)
    integral_limit: float = Field(3.0, ge=0)
    derivative_cutoff_hz: float = Field(10.0, gt=0)


class MotionConfig(StrictModel):
    velocity_kp: Vector3 = (9.0, 9.0, 9.0)
    velocity_ki: Vector3 = (1.5, 1.5, 3.0)
    velocity_kd: Vector3 = (0.0, 0.0, 0.0)
    integral_limit: float = Field(3.0, ge=0)
    attitude_kp: Vector3 = (8.0, 8.0, 4.0)
    attitude_kd: Vector3 = (1.2, 1.2, 0.8)
    yaw_reference_deg: float = 0.0


class InitialState(StrictModel):
    position: Vector3 = (0.0, 0.15, 1.4)
    yaw_deg: float = 0.0


class SuccessCriteria(StrictModel):
    force_tolerance: float = Field(1.0, gt=0)
    min_hold_fraction: float = Field(0.95, gt=0, le=1)
    final_window: float = Field(10.0, gt=0)
    final_mean_tolerance: float = Field(0.3, gt=0)


class Scenario(StrictModel):
    schema_version: Literal[1] = SCHEMA_VERSION
    name: str
    seed: int
    duration: float = Field(60.0, gt=0)
    initial_state: InitialState = InitialState()
    vehicle: VehicleParams = VehicleParams()
    wall: WallModel = WallModel()
    camera: CameraSettings = CameraSettings()
    landmarks: LandmarkSettings = LandmarkSettings()
    noise: NoiseConfig = NoiseConfig()
    timing: TimingConfig = TimingConfig()
    velocity_noise_bounds: Vector3 = (0.0, 0.0, 0.0)
    velocity_source: VelocitySource = VelocitySource.GROUND_TRUTH
    estimator: EstimatorConfig = EstimatorConfig()
    servo: ServoSettings = ServoSettings()
    blend: BlendConfig = BlendConfig()
    impedance: ImpedanceConfig = ImpedanceConfig()
    motion: MotionConfig = MotionConfig()
    contact_detection: ContactDetectionConfig = ContactDetectionConfig()
    success: SuccessCriteria = SuccessCriteria()

    @field_validator("velocity_noise_bounds")
    @classmethod
    def _non_negative(cls, value):
        if any(b < 0 for b in value):
            raise ValueError("velocity noise bounds must be non-negative")
        return value

    @model_validator(mode="after")
    def _estimator_feedback(self):
        if self.velocity_source is VelocitySource.ESTIMATOR and not self.estimator.enabled:
            raise ValueError("velocity_source=estimator requires estimator.enabled")
        return self


class ContactStats(BaseModel):
    """Table-style statistics of an error series; None when not applicable."""
    rmse: Optional[float] = None
    mean: Optional[float] = None
    max: Optional[float] = None
    std: Optional[float] = None
    samples: int = 0

    @property
    def applicable(self) -> bool:
        return self.samples > 0


class RunMetrics(BaseModel):
    scenario: str
    seed: int
    velocity_error_x: List[float] = Field(default_factory=list)
    velocity_error_y: List[float] = Field(default_factory=list)
    velocity_error_z: List[float] = Field(default_factory=list)
    contact_velocity_error: ContactStats = ContactStats()
    force_error: ContactStats = ContactStats()
    force_hold_fraction: Optional[float] = None
    final_force_mean: Optional[float] = None
    alignment_error: List[float] = Field(default_factory=list)
    scaling_error: List[float] = Field(default_factory=list)
    phase_timeline: List[Tuple[float, Phase]] = Field(default_factory=list)
    first_contact_time: Optional[float] = None
    insertion_offset: Optional[float] = None
    max_tilt_in_contact_deg: Optional[float] = None
    contact_achieved: bool = False
    success: bool = False
    failure_reason: Optional[str] = None

    def summary_row(self) -> Dict[str, object]:
        """Flat scalar view used for the machine-readable metrics table."""
        return {
            "scenario": self.scenario,
            "seed": self.seed,
            "vel_rmse": self.contact_velocity_error.rmse,
            "vel_mean": self.contact_velocity_error.mean,
            "vel_max": self.contact_velocity_error.max,
            "vel_std": self.contact_velocity_error.std,
            "force_rmse": self.force_error.rmse,
            "force_hold_fraction": self.force_hold_fraction,
            "final_force_mean": self.final_force_mean,
            "first_contact_time": self.first_contact_time,
            "insertion_offset": self.insertion_offset,
            "max_tilt_deg": self.max_tilt_in_contact_deg,
            "success": self.success,
            "failure_reason": self.failure_reason,
        }
