"""Tests for force-threshold contact detection."""
import unittest

import numpy as np

from estimation.contact_detector import ContactDetector, detect_contact, normal_force
from models.schemas import ContactDetectionConfig
from simulation.sensors import FtSample


class TestContactDetector(unittest.TestCase):
    """Tests for hysteresis and dwell."""

    def setUp(self):
        self.config = ContactDetectionConfig(on_threshold=2.0, off_threshold=0.5, dwell=0.05)
        self.detector = ContactDetector(self.config)

    def _feed(self, start: float, force: float, count: int, period: float = 0.005) -> bool:
        state = self.detector.in_contact
        for k in range(count):
            state = self.detector.update(start + k * period, force)
        return state

    def test_dwell_required_to_switch_on(self):
        self.assertFalse(self._feed(0.0, 3.0, 10))
        self.assertTrue(self.detector.update(0.05, 3.0))

    def test_brief_spike_is_ignored(self):
        self._feed(0.0, 3.0, 5)
        self._feed(0.025, 1.0, 1)
        self.assertFalse(self._feed(0.03, 3.0, 10))

    def test_hysteresis_band_holds_state(self):
        self._feed(0.0, 3.0, 11)
        self.assertTrue(self.detector.in_contact)
        self.assertTrue(self._feed(0.1, 1.0, 50))

    def test_switch_off_after_dwell(self):
        self._feed(0.0, 3.0, 11)
        self.assertTrue(self._feed(0.1, 0.2, 10))
        self.assertFalse(self.detector.update(0.15, 0.2))

    def test_reset(self):
        self._feed(0.0, 3.0, 11)
        self.detector.reset()
        self.assertFalse(self.detector.in_contact)

    def test_thresholds_are_validated(self):
        with self.assertRaises(ValueError):
            ContactDetectionConfig(on_threshold=0.5, off_threshold=0.5)

    def test_normal_force_projection(self):
        self.assertAlmostEqual(normal_force(np.array([-3.0, 1.0, 0.0]), np.array([-1.0, 0.0, 0.0])), 3.0)

    def test_detect_contact_stream(self):
        normal = np.array([-1.0, 0.0, 0.0])
        samples = [FtSample(k * 0.005, np.array([-5.0, 0.0, 0.0]), np.zeros(3)) for k in range(20)]
        states = detect_contact(samples, normal, self.config)
        self.assertEqual(states.index(True), 10)
        self.assertTrue(all(states[10:]))


if __name__ == "__main__":
    unittest.main()
