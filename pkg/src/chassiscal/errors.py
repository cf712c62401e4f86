"""Exception hierarchy.

Every failure caused by bad input or unmet preconditions derives from
:class:`CalibrationError`; the CLI maps those to exit code 2.
"""


class CalibrationError(Exception):
    """Base class for input and precondition failures."""


class GimbalLockError(CalibrationError):
    pass


class SingularIntrinsicsError(CalibrationError):
    pass


class InsufficientDataError(CalibrationError):
    pass


class NonUniformSamplingError(CalibrationError):
    pass


class NoWhiteNoiseRegionError(CalibrationError):
    pass


class BehindCameraError(CalibrationError):
    pass


class InvalidRayError(CalibrationError):
    pass


class NoConvergenceError(CalibrationError):
    pass


class NonMonotoneTimeError(CalibrationError):
    pass


class InsufficientRotationError(CalibrationError):
    pass


class DegenerateCovarianceError(CalibrationError):
    pass


class AmbiguousSignError(CalibrationError):
    pass


class AntiparallelAxisError(CalibrationError):
    pass


class TimeMisalignmentError(CalibrationError):
    pass


class EmptyOverlapError(CalibrationError):
    pass


class UnobservableError(CalibrationError):
    pass


class RankDeficientError(CalibrationError):
    pass


class MaxIterationsError(CalibrationError):
    """Solver hit its iteration cap; the partial report is attached."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class InvalidScriptError(CalibrationError):
    pass


class ConfigError(CalibrationError):
    pass


class ParseError(CalibrationError):
    """Malformed input file. ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
