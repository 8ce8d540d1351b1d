"""Force-threshold contact event detection with hysteresis and dwell."""
from typing import List, Optional, Sequence

import numpy as np

from logging_utils import get_logger
from models.schemas import ContactDetectionConfig

logger = get_logger()


class ContactDetector:
    """
    Contact switches ON once the normal force has stayed at or above the
    on-threshold for the dwell time, and OFF once it has stayed at or below the
    off-threshold for the dwell time. Forces between the thresholds keep the
    current state and reset both timers.
    """

    def __init__(self, config: ContactDetectionConfig):
        self.config = config
        self.in_contact = False
        self._candidate_since: Optional[float] = None

    def reset(self) -> None:
        self.in_contact = False
        self._candidate_since = None

    def update(self, timestamp: float, normal_force: float) -> bool:
        if self.in_contact:
            crossing = normal_force <= self.config.off_threshold
        else:
            crossing = normal_force >= self.config.on_threshold

        if not crossing:
            self._candidate_since = None
            return self.in_contact

        if self._candidate_since is None:
            self._candidate_since = timestamp
        # Tolerance absorbs float error in sample timestamps
        if timestamp - self._candidate_since >= self.config.dwell - 1e-9:
            self.in_contact = not self.in_contact
            self._candidate_since = None
            logger.debug(f"Contact {'ON' if self.in_contact else 'OFF'} at t={timestamp:.3f}s "
                         f"(F_n={normal_force:.2f} N)")
        return self.in_contact


def normal_force(force_sensor: np.ndarray, normal_sensor: np.ndarray) -> float:
    """Magnitude of the wall reaction along the wall normal, both in sensor axes."""
    return float(np.asarray(force_sensor) @ np.asarray(normal_sensor))


def detect_contact(samples: Sequence, normal_sensor: np.ndarray,
                   config: ContactDetectionConfig) -> List[bool]:
    """
    Run the detector over an F/T sample stream.

    Args:
        samples: FtSample stream in time order
        normal_sensor: Wall normal expressed in the sensor frame
        config: Thresholds and dwell

    Returns:
        The contact state after each sample
    """
    detector = ContactDetector(config)
    return [detector.update(s.timestamp, normal_force(s.force, normal_sensor)) for s in samples]
