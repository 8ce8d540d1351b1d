"""Rotation math: Hamilton unit quaternions (scalar first) and SO(3) helpers.

All rotation vectors are in radians. Orientation states store the rotation that
maps body-frame vectors into the reference frame (q_WB), and perturbations are
applied on the right: R <- R * Exp(delta).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_SMALL_ANGLE = 1e-10


def skew(v: np.ndarray) -> np.ndarray:
    """Return the 3x3 cross-product matrix of v."""
    x, y, z = v
    return np.array([[0.0, -z, y],
                     [z, 0.0, -x],
                     [-y, x, 0.0]])


@dataclass(frozen=True, eq=False)
class UnitQuaternion:
    """Hamilton unit quaternion stored as [w, x, y, z]."""

    coeffs: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.coeffs, dtype=float).reshape(4)
        norm = np.linalg.norm(q)
        if not np.isfinite(norm) or norm == 0.0:
            raise ValueError(f"Cannot build a unit quaternion from {q}")
        q = q / norm
        q.setflags(write=False)
        object.__setattr__(self, "coeffs", q)

    @classmethod
    def identity(cls) -> "UnitQuaternion":
        return cls(np.array([1.0, 0.0, 0.0, 0.0]))

    @classmethod
    def from_matrix(cls, rot: np.ndarray) -> "UnitQuaternion":
        """Convert a rotation matrix (Shepperd's method)."""
        m = np.asarray(rot, dtype=float)
        trace = np.trace(m)
        if trace > 0.0:
            s = 2.0 * np.sqrt(trace + 1.0)
            w = 0.25 * s
            x = (m[2, 1] - m[1, 2]) / s
            y = (m[0, 2] - m[2, 0]) / s
            z = (m[1, 0] - m[0, 1]) / s
        elif m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
            s = 2.0 * np.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2])
            w = (m[2, 1] - m[1, 2]) / s
            x = 0.25 * s
            y = (m[0, 1] + m[1, 0]) / s
            z = (m[0, 2] + m[2, 0]) / s
        elif m[1, 1] > m[2, 2]:
            s = 2.0 * np.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2])
            w = (m[0, 2] - m[2, 0]) / s
            x = (m[0, 1] + m[1, 0]) / s
            y = 0.25 * s
            z = (m[1, 2] + m[2, 1]) / s
        else:
            s = 2.0 * np.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1])
            w = (m[1, 0] - m[0, 1]) / s
            x = (m[0, 2] + m[2, 0]) / s
            y = (m[1, 2] + m[2, 1]) / s
            z = 0.25 * s
        return cls(np.array([w, x, y, z])).canonical()

    @classmethod
    def from_euler(cls, roll: float, pitch: float, yaw: float) -> "UnitQuaternion":
        """Build from Z-Y-X (yaw, pitch, roll) angles in radians."""
        return (quat_exp(np.array([0.0, 0.0, yaw]))
                * quat_exp(np.array([0.0, pitch, 0.0]))
                * quat_exp(np.array([roll, 0.0, 0.0])))

    @property
    def w(self) -> float:
        return float(self.coeffs[0])

    @property
    def vec(self) -> np.ndarray:
        return self.coeffs[1:]

    def __mul__(self, other: "UnitQuaternion") -> "UnitQuaternion":
        w1, x1, y1, z1 = self.coeffs
        w2, x2, y2, z2 = other.coeffs
        return UnitQuaternion(np.array([
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        ]))

    def conjugate(self) -> "UnitQuaternion":
        return UnitQuaternion(self.coeffs * np.array([1.0, -1.0, -1.0, -1.0]))

    inverse = conjugate

    def canonical(self) -> "UnitQuaternion":
        """Representative of the double cover with non-negative scalar part.

        At a half turn (w == 0) the first nonzero vector component is made positive.
        """
        w = self.coeffs[0]
        if w == 0.0:
            leading = self.coeffs[1:][np.flatnonzero(self.coeffs[1:])]
            if leading.size and leading[0] < 0.0:
                return UnitQuaternion(-self.coeffs)
            return self
        if w < 0.0:
            return UnitQuaternion(-self.coeffs)
        return self

    def as_matrix(self) -> np.ndarray:
        w, x, y, z = self.coeffs
        return np.array([
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ])

    def rotate(self, v: np.ndarray) -> np.ndarray:
        return self.as_matrix() @ np.asarray(v, dtype=float)

    def as_euler(self) -> np.ndarray:
        """Return (roll, pitch, yaw) in radians, Z-Y-X convention."""
        w, x, y, z = self.coeffs
        roll = np.arctan2(2 * (w * x + y * z), 1 - 2 * (x * x + y * y))
        pitch = np.arcsin(np.clip(2 * (w * y - z * x), -1.0, 1.0))
        yaw = np.arctan2(2 * (w * z + x * y), 1 - 2 * (y * y + z * z))
        return np.array([roll, pitch, yaw])

    def is_close(self, other: "UnitQuaternion", tol: float = 1e-9) -> bool:
        return bool(np.allclose(self.canonical().coeffs, other.canonical().coeffs, atol=tol))

    def __repr__(self) -> str:
        return f"UnitQuaternion({np.array2string(self.coeffs, precision=6)})"


def quat_exp(omega_dt: np.ndarray) -> UnitQuaternion:
    """Rotation of angle |omega_dt| about omega_dt / |omega_dt|."""
    phi = np.asarray(omega_dt, dtype=float).reshape(3)
    theta = np.linalg.norm(phi)
    if theta < _SMALL_ANGLE:
        return UnitQuaternion(np.concatenate(([1.0], 0.5 * phi)))
    half = 0.5 * theta
    return UnitQuaternion(np.concatenate(([np.cos(half)], np.sin(half) * phi / theta)))


def quat_log(q: UnitQuaternion) -> np.ndarray:
    """Principal-branch rotation vector of q; the norm never exceeds pi."""
    qc = q.canonical()
    w = qc.coeffs[0]
    v = qc.coeffs[1:]
    s = np.linalg.norm(v)
    if s < _SMALL_ANGLE:
        return 2.0 * v / w
    theta = 2.0 * np.arctan2(s, w)
    return theta * v / s


def so3_exp(phi: np.ndarray) -> np.ndarray:
    """Rodrigues formula."""
    phi = np.asarray(phi, dtype=float)
    theta = np.linalg.norm(phi)
    k = skew(phi)
    if theta < _SMALL_ANGLE:
        return np.eye(3) + k + 0.5 * k @ k
    return (np.eye(3) + np.sin(theta) / theta * k
            + (1.0 - np.cos(theta)) / theta ** 2 * k @ k)


def so3_log(rot: np.ndarray) -> np.ndarray:
    return quat_log(UnitQuaternion.from_matrix(rot))


def right_jacobian(phi: np.ndarray) -> np.ndarray:
    """SO(3) right Jacobian: Exp(phi + d) ~ Exp(phi) Exp(Jr(phi) d)."""
    theta = np.linalg.norm(phi)
    k = skew(phi)
    if theta < 1e-6:
        return np.eye(3) - 0.5 * k + k @ k / 6.0
    return (np.eye(3) - (1.0 - np.cos(theta)) / theta ** 2 * k
            + (theta - np.sin(theta)) / theta ** 3 * k @ k)


def right_jacobian_inv(phi: np.ndarray) -> np.ndarray:
    theta = np.linalg.norm(phi)
    k = skew(phi)
    if theta < 1e-6:
        return np.eye(3) + 0.5 * k + k @ k / 12.0
    coeff = 1.0 / theta ** 2 - (1.0 + np.cos(theta)) / (2.0 * theta * np.sin(theta))
    return np.eye(3) + 0.5 * k + coeff * k @ k


def rot_z(yaw: float) -> np.ndarray:
    c, s = np.cos(yaw), np.sin(yaw)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
