"""Custom exceptions for the contact bench."""

class BenchError(Exception):
    """Base exception class for all contact-bench errors."""
    pass


class ConfigError(BenchError):
    """Exception for configuration errors."""
    pass


class GeometryError(BenchError):
    """Exception for invalid geometric quantities."""
    pass


class FrameMismatchError(GeometryError):
    """Exception for arithmetic between quantities expressed in different frames."""

    def __init__(self, expected, actual):
        self.expected = expected
        self.actual = actual
        super().__init__(f"Frame mismatch: expected {expected.name}, got {actual.name}")


class SimulationDivergenceError(BenchError):
    """Exception for a simulation state that became non-finite."""
    pass


class PreintegrationError(BenchError):
    """Exception for invalid IMU sample sequences."""
    pass


class EstimatorError(BenchError):
    """Exception for estimator failures."""
    pass


class ServoError(BenchError):
    """Exception for invalid visual servoing inputs."""
    pass


class LostTargetError(ServoError):
    """Exception raised when the servo target stays invalid past its timeout."""
    pass


class EstimatorFailure(EstimatorError):
    """Exception raised by the run loop when the estimator has entered its failed state."""
    pass
