"""Reference frames, frame-tagged vectors and rigid transforms.

World frame convention: z up (forward-left-up style), gravity along -z. The
wall normal, landmark coordinates and all simulator quantities use it.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from exceptions import FrameMismatchError
from geometry.rotations import UnitQuaternion


class FrameId(Enum):
    WORLD = "W"
    BODY = "B"
    CAMERA = "O"
    FORCE_SENSOR = "S"
    CONTACT = "C"


@dataclass(frozen=True, eq=False)
class FramedVector:
    """A 3-vector that knows which frame it is expressed in."""

    value: np.ndarray
    frame: FrameId

    def __post_init__(self):
        v = np.asarray(self.value, dtype=float).reshape(3)
        v.setflags(write=False)
        object.__setattr__(self, "value", v)

    def _check(self, other: "FramedVector") -> None:
        if other.frame is not self.frame:
            raise FrameMismatchError(self.frame, other.frame)

    def __add__(self, other: "FramedVector") -> "FramedVector":
        self._check(other)
        return FramedVector(self.value + other.value, self.frame)

    def __sub__(self, other: "FramedVector") -> "FramedVector":
        self._check(other)
        return FramedVector(self.value - other.value, self.frame)

    def dot(self, other: "FramedVector") -> float:
        self._check(other)
        return float(self.value @ other.value)

    def scale(self, factor: float) -> "FramedVector":
        return FramedVector(factor * self.value, self.frame)


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """Transform mapping points expressed in `source` into `target`: p_t = R p_s + t."""

    rotation: UnitQuaternion
    translation: np.ndarray
    source: FrameId
    target: FrameId

    def __post_init__(self):
        t = np.asarray(self.translation, dtype=float).reshape(3)
        t.setflags(write=False)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls, source: FrameId, target: FrameId) -> "RigidTransform":
        return cls(UnitQuaternion.identity(), np.zeros(3), source, target)

    @property
    def matrix(self) -> np.ndarray:
        return self.rotation.as_matrix()

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """self o other: apply `other` first, then `self`."""
        if other.target is not self.source:
            raise FrameMismatchError(self.source, other.target)
        return RigidTransform(
            self.rotation * other.rotation,
            self.rotation.rotate(other.translation) + self.translation,
            other.source,
            self.target,
        )

    __matmul__ = compose

    def inverse(self) -> "RigidTransform":
        inv_rot = self.rotation.inverse()
        return RigidTransform(inv_rot, -inv_rot.rotate(self.translation), self.target, self.source)

    def apply(self, point: FramedVector) -> FramedVector:
        if point.frame is not self.source:
            raise FrameMismatchError(self.source, point.frame)
        return FramedVector(self.rotation.rotate(point.value) + self.translation, self.target)

    def rotate(self, vector: FramedVector) -> FramedVector:
        """Rotate a free vector (no translation)."""
        if vector.frame is not self.source:
            raise FrameMismatchError(self.source, vector.frame)
        return FramedVector(self.rotation.rotate(vector.value), self.target)

    def is_close(self, other: "RigidTransform", tol: float = 1e-9) -> bool:
        return (self.source is other.source and self.target is other.target
                and self.rotation.is_close(other.rotation, tol)
                and bool(np.allclose(self.translation, other.translation, atol=tol)))


def transform_point(transform: RigidTransform, point: np.ndarray,
                    from_frame: FrameId, to_frame: FrameId) -> np.ndarray:
    """Map a point from `from_frame` to `to_frame` with a transform declared for that pair.

    Raises:
        FrameMismatchError: If the transform is declared for other frames
    """
    if transform.source is not from_frame:
        raise FrameMismatchError(transform.source, from_frame)
    if transform.target is not to_frame:
        raise FrameMismatchError(transform.target, to_frame)
    return transform.rotation.rotate(point) + transform.translation
