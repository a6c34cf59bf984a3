"""Hermetia illucens larvae reactor toolkit.

Submodules are imported lazily by the CLI; the most common entry points are
re-exported here.
"""

from .errors import (
    ConfigError,
    DataError,
    DegenerateStateError,
    DomainError,
    EstimationError,
    HermetiaError,
    IntegrationError,
    SetupError,
    TranscriptionError,
)
from .integrate import ControlSchedule, DisturbanceTrace, Event, EventSchedule, Trajectory, simulate
from .kernels import BACKEND
from .params import DEFAULT_PARAMETERS, ModelOptions, ParameterSet
from .reactor import Disturbance, FluxReport, SetupConfig, evaluate

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ConfigError",
    "ControlSchedule",
    "DEFAULT_PARAMETERS",
    "DataError",
    "DegenerateStateError",
    "Disturbance",
    "DisturbanceTrace",
    "DomainError",
    "EstimationError",
    "Event",
    "EventSchedule",
    "FluxReport",
    "HermetiaError",
    "IntegrationError",
    "ModelOptions",
    "ParameterSet",
    "SetupConfig",
    "SetupError",
    "Trajectory",
    "TranscriptionError",
    "evaluate",
    "simulate",
]
