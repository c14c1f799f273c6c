"""Exception types shared across the package."""


class GpIntentError(Exception):
    """Base class for package-specific errors."""


class NumericalError(GpIntentError):
    """Linear algebra failed even at the largest permitted jitter.

    Carries the final jitter value that was attempted.
    """

    def __init__(self, message: str, jitter: float = 0.0):
        super().__init__(message)
        self.jitter = jitter


class OutOfOrderError(GpIntentError, ValueError):
    """A sample's timestamp does not strictly increase past the previous one."""


class NotReadyError(GpIntentError, RuntimeError):
    """An operation requires a full window before it can run."""


class BehindUserError(GpIntentError, ValueError):
    """A gaze score was requested for a point behind the gaze origin."""


class NoCandidateError(GpIntentError, ValueError):
    """Gaze selection found no interaction point in front of the user."""


class SceneFormatError(GpIntentError, ValueError):
    """A scene description violates the scene invariants."""


class TrajectoryFormatError(GpIntentError, ValueError):
    """A trajectory file could not be parsed.

    ``line`` is the 1-based line number of the offending row when known.
    """

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line
