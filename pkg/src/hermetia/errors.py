"""Exception hierarchy shared by every module of the package."""

from __future__ import annotations


class HermetiaError(Exception):
    """Base class for all package errors."""


class DomainError(HermetiaError, ValueError):
    """An argument lies outside the validity range of a formula."""


class DegenerateStateError(HermetiaError, ValueError):
    """A state makes the model singular (e.g. a non-positive heat capacity)."""


class SetupError(HermetiaError, ValueError):
    """Wrong setup kind, wrong vector dimension or illegal input for a setup."""


class ConfigError(HermetiaError, ValueError):
    """Invalid run configuration."""


class DataError(HermetiaError, ValueError):
    """Malformed measurement data."""


class IntegrationError(HermetiaError, RuntimeError):
    """Integration produced a non-finite state.

    Attributes:
        time: Simulation time [s] at which the failure was detected.
        state: Last finite state before the failure (or the offending state).
        detail: Name of the offending state or flux, if known.
    """

    def __init__(self, message, time=None, state=None, detail=None):
        super().__init__(message)
        self.time = time
        self.state = state
        self.detail = detail


class StepSizeUnderflow(IntegrationError):
    """Adaptive step control shrank the step below its floor."""


class EstimationError(HermetiaError, RuntimeError):
    """Every start of a parameter fit failed.

    Attributes:
        records: Per-start diagnostics.
    """

    def __init__(self, message, records=()):
        super().__init__(message)
        self.records = list(records)


class TranscriptionError(HermetiaError, ValueError):
    """The optimal control problem cannot be transcribed (e.g. empty bounds)."""
