"""Exception types shared across the package."""


class GdnlsError(Exception):
    """Base class for all package errors."""


class NonFiniteField(GdnlsError):
    """A field contains NaN or Inf samples where finite data is required."""


class InvalidParameter(GdnlsError):
    """A physical or numerical parameter is outside its admissible range."""


class InvalidStep(GdnlsError):
    """Time step must be strictly positive."""


class BlowupDetected(GdnlsError):
    """Non-finite values appeared while stepping.

    For direct simulations of collapsing data this is expected telemetry,
    not a failure: the run stops and reports the last valid state.
    """

    def __init__(self, stage: str, mode_index: int, frame_time: float):
        self.stage = stage
        self.mode_index = mode_index
        self.frame_time = frame_time
        super().__init__(
            f"non-finite value at stage {stage!r}, mode {mode_index}, "
            f"frame time {frame_time:g}"
        )


class StepTooLarge(GdnlsError):
    """The requested step violates the advective CFL bound."""

    def __init__(self, requested: float, admissible: float):
        self.requested = requested
        self.admissible = admissible
        super().__init__(
            f"step {requested:g} exceeds admissible CFL step {admissible:g}"
        )


class DegenerateField(GdnlsError):
    """A functional's denominator vanishes (e.g. identically zero field)."""


class InsufficientData(GdnlsError):
    """Not enough samples in the requested fit window."""


class FitUnstable(GdnlsError):
    """A fitted quantity is non-monotone or otherwise unusable."""


class ContinuationStepTooLarge(GdnlsError):
    """Newton failed to converge at a continuation target."""

    def __init__(self, sigma: float, detail: str = ""):
        self.sigma = sigma
        msg = f"Newton iteration did not converge at sigma={sigma:g}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class MeshExhausted(GdnlsError):
    """Mesh refinement hit the point cap before meeting the residual target."""


class ConfigError(GdnlsError):
    """Invalid run configuration; carries the offending key path."""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")
