"""Ready-made experiment setups: TG2-like growth runs and synthetic climate.

The TG2-like run places 2000 larvae of 4.28 mg dry mass on 0.48 kg feed and
1.5 kg water in the closed unit, holds the air near 29 degC with a sampled
PI thermostat on the TEC and cycles the ventilation 10 min on, 20 min off.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._layout import CLOSED_INPUTS
from .integrate import DisturbanceTrace, EventSchedule, Trajectory, simulate
from .params import DEFAULT_PARAMETERS, ModelOptions, ParameterSet
from .reactor import SetupConfig
from .thermo import h_sat

__all__ = [
    "TG2_L_NUM",
    "TG2_INITIAL",
    "outside_trace",
    "Thermostat",
    "tg2_model",
    "tg2_initial_state",
    "tg2_run",
]

TG2_L_NUM = 2000.0
TG2_HOURS = 192.0

# per-larva and medium initial values of the TG2-like batch
TG2_INITIAL = {
    "B_dry": 4.28e-3,  # g
    "B_wet": 4.28e-3 / 0.3,  # g, about 70 % body water
    "T_sigma": 125.0,  # h, maturity begins near 140 h at 29 degC air
    "W_med": 1.5,  # kg
    "N_feed": 0.48,  # kg
    "N_exc": 0.0,
    "T_med": 29.0,
}

C_OUT_DEFAULT = 7.2e-4  # kg/m^3, about 400 ppm
O_OUT_DEFAULT = 0.273  # kg/m^3


def outside_trace(
    hours: float = TG2_HOURS,
    T_mean: float = 24.0,
    T_amp: float = 1.5,
    rh: float = 0.5,
    C_out: float = C_OUT_DEFAULT,
    O_out: float = O_OUT_DEFAULT,
    dt: float = 600.0,
    noise: float = 0.0,
    seed: int | None = 0,
) -> DisturbanceTrace:
    """Synthetic outside air with a daily temperature cycle.

    The minimum falls at 04:00 and the maximum at 16:00.  ``noise`` adds
    Gaussian temperature noise [K] drawn from a seeded generator.
    """
    t = np.arange(0.0, hours * 3600.0 + dt / 2, dt)
    T = T_mean - T_amp * np.cos(2 * np.pi * (t / 3600.0 - 4.0) / 24.0)
    if noise > 0:
        T = T + np.random.default_rng(seed).normal(0.0, noise, t.size)
    H = np.array([rh * h_sat(v) for v in T])
    vals = np.column_stack([T, H, np.full(t.size, C_out), np.full(t.size, O_out)])
    return DisturbanceTrace(t, vals)


@dataclass
class Thermostat:
    """Sampled PI air-temperature controller on the TEC with a ventilation cycle.

    Called as ``u(t, x)`` at every control boundary of a closed-setup run.
    The integrator state is reset by the integration driver.
    """

    T_set: float = 29.0
    Kp: float = 0.25
    Ki: float = 0.25 / 600.0
    sample_dt: float = 60.0
    vent_on: float = 600.0
    vent_period: float = 1800.0
    u_vent: float = 1.0
    base: dict = field(default_factory=dict)
    _integral: float = 0.0
    _last_t: float | None = None

    def reset(self) -> None:
        self._integral = 0.0
        self._last_t = None

    def __call__(self, t: float, x: np.ndarray) -> np.ndarray:
        u = np.zeros(len(CLOSED_INPUTS))
        for k, v in self.base.items():
            u[CLOSED_INPUTS.index(k)] = v
        err = self.T_set - x[8]
        dt = 0.0 if self._last_t is None else t - self._last_t
        self._last_t = t
        trial = self._integral + self.Ki * err * dt
        cmd = self.Kp * err + trial
        if -1.0 < cmd < 1.0:
            self._integral = trial  # anti-windup: freeze while saturated
        u[CLOSED_INPUTS.index("u_T")] = float(np.clip(self.Kp * err + self._integral, -1.0, 1.0))
        if self.vent_period > 0 and (t % self.vent_period) < self.vent_on - 1e-9:
            u[CLOSED_INPUTS.index("u_v")] = self.u_vent
        return u


def tg2_model(
    params: ParameterSet | None = None,
    options: ModelOptions | None = None,
    kind: str = "closed",
    L_num: float = TG2_L_NUM,
) -> SetupConfig:
    return SetupConfig(kind=kind, params=params or DEFAULT_PARAMETERS, L_num=L_num,
                       options=options or ModelOptions())


def tg2_initial_state(model: SetupConfig, d0=None, T_air: float = 29.0, rh_air: float = 0.6,
                      **overrides: float) -> np.ndarray:
    """Initial state of a TG2-like batch for any setup kind."""
    d0 = np.array([24.0, 0.5 * h_sat(24.0), C_OUT_DEFAULT, O_OUT_DEFAULT]) if d0 is None else np.asarray(d0)
    vals = dict(TG2_INITIAL)
    vals.update(overrides)
    vals["B_med"] = vals["W_med"] + vals["N_feed"] + vals["N_exc"] + 1e-3 * model.L_num * vals["B_wet"]
    if model.kind == "closed":
        vals.setdefault("T_air", T_air)
        vals.setdefault("H_air", rh_air * h_sat(T_air))
        vals.setdefault("C_air", float(d0[2]))
        vals.setdefault("O_air", float(d0[3]))
        vals.setdefault("T_chm", T_air - 1.0)
        vals.setdefault("T_hx", T_air)
        vals.setdefault("W_chm", 0.0)
        vals.setdefault("W_hx", 0.0)
    return model.state(**{k: v for k, v in vals.items() if k in model.state_names})


def tg2_run(
    model: SetupConfig | None = None,
    hours: float = TG2_HOURS,
    *,
    disturbance: DisturbanceTrace | None = None,
    thermostat: Thermostat | None = None,
    x0: np.ndarray | None = None,
    events: EventSchedule | None = None,
    method: str = "rk4",
    dt: float = 3.6,
    tol: float = 1e-7,
    **kwargs,
) -> Trajectory:
    """Simulate a TG2-like batch.

    Closed setups run the thermostat policy every ``thermostat.sample_dt``
    seconds.  Partial setups hold ``T_air = T_set`` and 60 % relative
    humidity through ``u_dT`` and ``u_dH`` in hourly intervals.
    """
    model = model or tg2_model()
    disturbance = disturbance or outside_trace(hours)
    x0 = tg2_initial_state(model, disturbance.at(0.0)) if x0 is None else x0
    tf = hours * 3600.0
    if model.kind == "closed":
        thermostat = thermostat or Thermostat()
        return simulate(model, x0, thermostat, disturbance, 0.0, tf, method=method, dt=dt, tol=tol,
                        control_dt=thermostat.sample_dt, events=events, **kwargs)
    T_set = thermostat.T_set if thermostat is not None else 29.0

    def hold(t, x):
        d = disturbance.at(t)
        if model.kind == "open":
            return np.zeros(1)
        return np.array([T_set - d[0], 0.6 * h_sat(T_set) - d[1], 0.0, 0.0])

    return simulate(model, x0, hold, disturbance, 0.0, tf, method=method, dt=dt, tol=tol,
                    control_dt=3600.0, events=events, **kwargs)
