"""Resource-optimal control: multiple-shooting transcription, SQP and scenario accounting."""

from .problem import (
    DISPLAY_INPUT_SCALES,
    DISPLAY_STATE_SCALES,
    FunctionDynamics,
    KernelDynamics,
    MultipleShootingNLP,
    OcpSpec,
    transcribe,
)
from .baseline import (
    BaselineResult,
    ResourceAccount,
    Setpoints,
    compare_resources,
    resimulate,
    resource_account,
    setpoint_baseline,
    setpoint_inputs,
)
from .scenarios import SCENARIOS, Scenario, ScenarioResult, run_scenario, scenario
from .sqp import OcpSolution, SqpOptions, solve

__all__ = [
    "OcpSpec",
    "KernelDynamics",
    "FunctionDynamics",
    "MultipleShootingNLP",
    "transcribe",
    "DISPLAY_STATE_SCALES",
    "DISPLAY_INPUT_SCALES",
    "SqpOptions",
    "OcpSolution",
    "solve",
    "Setpoints",
    "ResourceAccount",
    "BaselineResult",
    "setpoint_inputs",
    "setpoint_baseline",
    "resource_account",
    "compare_resources",
    "resimulate",
    "Scenario",
    "ScenarioResult",
    "scenario",
    "run_scenario",
    "SCENARIOS",
]
