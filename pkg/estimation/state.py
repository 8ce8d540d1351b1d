"""Estimator variables: navigation states, camera extrinsic and inverse-depth landmarks.

Error-state layout of a navigation state is [dp, dv, dtheta, dba, dbg]; the
rotation perturbation is applied on the right, R <- R * Exp(dtheta).
"""
from dataclasses import dataclass, field, replace
from typing import Dict, Optional, Tuple

import numpy as np

from geometry.rotations import UnitQuaternion, quat_exp, quat_log
from geometry.transforms import FrameId, RigidTransform

STATE_DIM = 15
EXTRINSIC_DIM = 6
LANDMARK_DIM = 1

P = slice(0, 3)
V = slice(3, 6)
R = slice(6, 9)
BA = slice(9, 12)
BG = slice(12, 15)

VariableKey = Tuple


def state_key(keyframe_id: int) -> VariableKey:
    return ("x", keyframe_id)


def landmark_key(landmark_id: int) -> VariableKey:
    return ("l", landmark_id)


EXTRINSIC_KEY: VariableKey = ("c",)


def key_dim(key: VariableKey) -> int:
    return {"x": STATE_DIM, "l": LANDMARK_DIM, "c": EXTRINSIC_DIM}[key[0]]


def _vec(value) -> np.ndarray:
    arr = np.asarray(value, dtype=float).reshape(3)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class NavState:
    timestamp: float
    position: np.ndarray
    velocity: np.ndarray
    orientation: UnitQuaternion
    accel_bias: np.ndarray = field(default_factory=lambda: np.zeros(3))
    gyro_bias: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        for name in ("position", "velocity", "accel_bias", "gyro_bias"):
            object.__setattr__(self, name, _vec(getattr(self, name)))

    @property
    def rotation(self) -> np.ndarray:
        return self.orientation.as_matrix()

    def boxplus(self, delta: np.ndarray) -> "NavState":
        delta = np.asarray(delta, dtype=float)
        return replace(
            self,
            position=self.position + delta[P],
            velocity=self.velocity + delta[V],
            orientation=self.orientation * quat_exp(delta[R]),
            accel_bias=self.accel_bias + delta[BA],
            gyro_bias=self.gyro_bias + delta[BG],
        )

    def boxminus(self, other: "NavState") -> np.ndarray:
        """Local coordinates of self around `other`, so other.boxplus(result) == self."""
        return np.concatenate((
            self.position - other.position,
            self.velocity - other.velocity,
            quat_log(other.orientation.inverse() * self.orientation),
            self.accel_bias - other.accel_bias,
            self.gyro_bias - other.gyro_bias,
        ))

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(np.concatenate((
            self.position, self.velocity, self.orientation.coeffs, self.accel_bias, self.gyro_bias)))))

    def with_clamped_biases(self, accel_bound: float, gyro_bound: float) -> "NavState":
        return replace(
            self,
            accel_bias=np.clip(self.accel_bias, -accel_bound, accel_bound),
            gyro_bias=np.clip(self.gyro_bias, -gyro_bound, gyro_bound),
        )


@dataclass(frozen=True, eq=False)
class CameraExtrinsic:
    """Camera-to-body transform, P_b = R_bc P_c + t_bc. Local coordinates are [dt, dtheta]."""
    rotation: UnitQuaternion
    translation: np.ndarray
    estimated: bool = False

    def __post_init__(self):
        object.__setattr__(self, "translation", _vec(self.translation))

    @classmethod
    def from_transform(cls, transform: RigidTransform, estimated: bool = False) -> "CameraExtrinsic":
        if transform.source is not FrameId.CAMERA or transform.target is not FrameId.BODY:
            raise ValueError("camera extrinsic must map the camera frame into the body frame")
        return cls(transform.rotation, transform.translation, estimated)

    def as_transform(self) -> RigidTransform:
        return RigidTransform(self.rotation, self.translation, FrameId.CAMERA, FrameId.BODY)

    @property
    def rotation_matrix(self) -> np.ndarray:
        return self.rotation.as_matrix()

    def boxplus(self, delta: np.ndarray) -> "CameraExtrinsic":
        delta = np.asarray(delta, dtype=float)
        return replace(self, translation=self.translation + delta[:3],
                       rotation=self.rotation * quat_exp(delta[3:]))

    def boxminus(self, other: "CameraExtrinsic") -> np.ndarray:
        return np.concatenate((self.translation - other.translation,
                               quat_log(other.rotation.inverse() * self.rotation)))


@dataclass
class Landmark:
    """
    Inverse-depth landmark anchored at the keyframe where it was first seen.

    `observations` maps keyframe id to the measured pixel (u, v) and, when the
    stereo match exists, the disparity. The anchor observation defines the
    bearing along which the inverse depth is measured.
    """
    landmark_id: int
    anchor_id: int
    inverse_depth: float
    observations: Dict[int, Tuple[float, float, Optional[float]]] = field(default_factory=dict)

    @property
    def anchor_pixel(self) -> Tuple[float, float]:
        u, v, _ = self.observations[self.anchor_id]
        return u, v

    def is_triangulated(self) -> bool:
        return bool(np.isfinite(self.inverse_depth) and self.inverse_depth > 0.0)

    def ready(self) -> bool:
        return self.is_triangulated() and len(self.observations) >= 2 and self.anchor_id in self.observations
