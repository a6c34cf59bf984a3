"""Fixed set-point operation and resource accounting for the partial setup."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from ..errors import SetupError
from ..integrate import ControlSchedule, DisturbanceTrace, Trajectory, integrate_rk4
from ..reactor import SetupConfig
from ..thermo import h_sat

__all__ = [
    "Setpoints",
    "ResourceAccount",
    "BaselineResult",
    "setpoint_inputs",
    "setpoint_baseline",
    "resource_account",
    "compare_resources",
    "resimulate",
]


@dataclass(frozen=True)
class Setpoints:
    """Set-point operation of the partial setup.

    ``rh_set=None`` leaves the air humidity at the outside value
    (``u_dH = 0``).  ``u_W_med`` is a water mass flow [kg/s].
    """

    T_set: float = 33.0
    rh_set: float | None = 0.6
    u_W_med: float = 14e-9
    u_N: float = 0.0


@dataclass(frozen=True)
class ResourceAccount:
    """Resources spent over one batch (all non-negative).

    Heating energy is ``c_air * rho_air * V_supply * |u_dT|`` integrated over
    time, humidification water ``V_supply * max(u_dH, 0)`` integrated over
    time and substrate water the integral of ``u_W_med``.
    """

    heating_energy: float  # J
    humidification_water: float  # kg
    substrate_water: float  # kg
    B_dry: float  # g per larva at harvest
    W_med: float  # kg at harvest
    N_med: float  # kg at harvest

    def as_dict(self) -> dict[str, float]:
        return asdict(self)


@dataclass
class BaselineResult:
    trajectory: Trajectory
    account: ResourceAccount
    inputs: np.ndarray  # (N, nu), model units
    times: np.ndarray  # control interval starts


def _check_partial(model: SetupConfig):
    if model.kind != "partial":
        raise SetupError("set-point baseline and resource accounting are defined for the partial setup")


def setpoint_inputs(model: SetupConfig, sp: Setpoints, times: np.ndarray, disturbance: DisturbanceTrace,
                    u_bounds=None) -> np.ndarray:
    """Per-interval inputs ``u_dT = T_set - T_out``, ``u_dH = H_set - H_out`` at each interval start."""
    _check_partial(model)
    d = disturbance.sample(np.asarray(times, dtype=float))
    U = np.zeros((len(times), model.nu))
    U[:, 0] = sp.T_set - d[:, 0]
    if sp.rh_set is not None:
        U[:, 1] = sp.rh_set * h_sat(sp.T_set) - d[:, 1]
    U[:, 2] = sp.u_W_med
    U[:, 3] = sp.u_N
    for name, (lo, hi) in dict(u_bounds or {}).items():
        j = model.input_names.index(name)
        U[:, j] = np.clip(U[:, j], lo, hi)
    return U


def resource_account(model: SetupConfig, U: np.ndarray, dt: float, x_final: np.ndarray) -> ResourceAccount:
    """Account for piecewise-constant partial-setup inputs held for ``dt`` seconds each."""
    _check_partial(model)
    p = model.params
    U = np.asarray(U, dtype=float)
    heat = float(p.k_c_air * p.k_rho_air * p.k_Vdot_supply * np.sum(np.abs(U[:, 0])) * dt)
    hum = float(p.k_Vdot_supply * np.sum(np.maximum(U[:, 1], 0.0)) * dt)
    water = float(np.sum(np.maximum(U[:, 2], 0.0)) * dt)
    names = model.state_names
    xf = np.asarray(x_final, dtype=float)
    return ResourceAccount(
        heating_energy=heat,
        humidification_water=hum,
        substrate_water=water,
        B_dry=float(xf[names.index("B_dry")]),
        W_med=float(xf[names.index("W_med")]),
        N_med=float(xf[names.index("N_feed")] + xf[names.index("N_exc")]),
    )


def _hard(model: SetupConfig) -> SetupConfig:
    return model.replace(options=model.options.replace(maturity_steepness=0.0, evap_smoothing=0.0))


def simulate_schedule(model: SetupConfig, x0, U, t0: float, dt: float, disturbance, substep: float = 3.6) -> Trajectory:
    times = t0 + dt * np.arange(len(U))
    sched = ControlSchedule(np.append(times, times[-1] + dt), np.asarray(U, dtype=float), model.input_names)
    return integrate_rk4(model, x0, sched, disturbance, t0, times[-1] + dt, substep)


def setpoint_baseline(
    model: SetupConfig,
    setpoints: Setpoints,
    horizon: tuple[float, float, float],
    disturbance: DisturbanceTrace,
    x0,
    u_bounds=None,
    hard_switch: bool = True,
) -> BaselineResult:
    """Simulate set-point operation.

    Args:
        horizon: ``(t0, t_h, dt)`` in seconds; inputs are recomputed every ``dt``.
        hard_switch: Simulate with the hard maturity switch.
    """
    t0, t_h, dt = horizon
    n = int(round((t_h - t0) / dt))
    times = t0 + dt * np.arange(n)
    U = setpoint_inputs(model, setpoints, times, disturbance, u_bounds)
    sim_model = _hard(model) if hard_switch else model
    traj = simulate_schedule(sim_model, x0, U, t0, dt, disturbance)
    return BaselineResult(traj, resource_account(model, U, dt, traj.final), U, times)


def resimulate(solution, hard_switch: bool = True) -> Trajectory:
    """Forward simulation of an optimal input schedule with 3.6 s RK4 steps."""
    spec = solution.nlp.spec
    model = spec.model
    if not hard_switch:
        model = model.replace(options=model.options.replace(maturity_steepness=spec.maturity_steepness,
                                                            evap_smoothing=spec.evap_smoothing))
    else:
        model = _hard(model)
    # the disturbance exactly as the transcription saw it: linear between nodes
    dist = DisturbanceTrace(solution.nlp.times, solution.nlp.D)
    return simulate_schedule(model, spec.x0, solution.u, spec.t0, spec.dt, dist, spec.dt / spec.substeps)


def compare_resources(optimal: ResourceAccount, baseline: ResourceAccount) -> dict[str, float | None]:
    """Optimal/baseline ratio per resource plus the terminal biomass change.

    A zero baseline resource gives ``None`` (undefined) rather than infinity.
    """
    out: dict[str, float | None] = {}
    for key in ("heating_energy", "humidification_water", "substrate_water"):
        b = getattr(baseline, key)
        o = getattr(optimal, key)
        out[key] = None if b == 0 else o / b
    out["B_dry_delta"] = optimal.B_dry - baseline.B_dry
    out["B_dry_ratio"] = None if baseline.B_dry == 0 else optimal.B_dry / baseline.B_dry
    if out["B_dry_ratio"] is not None and not math.isfinite(out["B_dry_ratio"]):
        out["B_dry_ratio"] = None
    return out
