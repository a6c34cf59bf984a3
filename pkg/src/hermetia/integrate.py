"""Time integration with held inputs, disturbance traces and discrete events.

Integration runs over *segments*: the union of control-interval boundaries,
disturbance sample times and event times.  Inputs are constant on a
segment and disturbances vary linearly, so every segment is a smooth
problem.  Fixed-step RK4 uses ``ceil(length / dt)`` equal sub-steps per
segment; the adaptive Dormand-Prince pair restarts at every segment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from . import kernels
from ._layout import CLOSED_INPUTS, DISTURBANCES
from .errors import DataError, IntegrationError, SetupError, StepSizeUnderflow
from .reactor import FluxReport, SetupConfig, evaluate

__all__ = [
    "ControlSchedule",
    "DisturbanceTrace",
    "Event",
    "EventSchedule",
    "Trajectory",
    "integrate_rk4",
    "integrate_adaptive",
    "simulate",
    "preprocess_measurements",
    "STATE_SCALES",
]

# typical magnitudes, used as absolute tolerances and finite-difference scales
STATE_SCALES = {
    "B_dry": 1e-2, "B_wet": 1e-2, "T_sigma": 100.0, "W_med": 1.0, "N_feed": 0.1,
    "N_exc": 0.1, "B_med": 1.0, "T_med": 10.0, "T_air": 10.0, "H_air": 1e-2,
    "C_air": 1e-3, "O_air": 0.1, "T_chm": 10.0, "T_hx": 10.0, "W_chm": 1e-3, "W_hx": 1e-3,
}

_TIME_EPS = 1e-9


# -- input and disturbance containers ---------------------------------------


@dataclass(frozen=True)
class ControlSchedule:
    """Piecewise-constant inputs.

    ``values[k]`` applies on ``[times[k], times[k+1])``.  ``rate_bounds``
    optionally records per-input bounds on first differences, and ``u_init``
    the input applied before ``times[0]``.
    """

    times: np.ndarray
    values: np.ndarray
    input_names: tuple[str, ...] = ()
    rate_bounds: np.ndarray | None = None
    u_init: np.ndarray | None = None

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.atleast_2d(np.asarray(self.values, dtype=float))
        if t.ndim != 1 or t.size < 2:
            raise SetupError("a schedule needs at least two boundary times")
        if np.any(np.diff(t) <= 0):
            raise SetupError("schedule times must be strictly increasing")
        if v.shape[0] != t.size - 1:
            raise SetupError(f"schedule has {t.size - 1} intervals but {v.shape[0]} value rows")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    @classmethod
    def constant(cls, value: Sequence[float], t0: float, tf: float, dt: float | None = None,
                 input_names: tuple[str, ...] = ()) -> "ControlSchedule":
        n = 1 if dt is None else max(1, int(round((tf - t0) / dt)))
        times = np.linspace(t0, tf, n + 1)
        return cls(times, np.tile(np.asarray(value, dtype=float), (n, 1)), input_names)

    @property
    def n_intervals(self) -> int:
        return self.values.shape[0]

    @property
    def nu(self) -> int:
        return self.values.shape[1]

    def index_at(self, t: float) -> int:
        k = int(np.searchsorted(self.times, t + _TIME_EPS * max(1.0, abs(t)), side="right")) - 1
        return min(max(k, 0), self.n_intervals - 1)

    def value_at(self, t: float) -> np.ndarray:
        return self.values[self.index_at(t)].copy()

    def differences(self) -> np.ndarray:
        """First differences, the first measured against ``u_init`` (or 0)."""
        u0 = np.zeros(self.nu) if self.u_init is None else np.asarray(self.u_init, dtype=float)
        return np.diff(np.vstack([u0, self.values]), axis=0)


@dataclass(frozen=True)
class DisturbanceTrace:
    """Outside-air samples interpolated linearly; held constant beyond the ends."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.atleast_1d(np.asarray(self.times, dtype=float))
        v = np.atleast_2d(np.asarray(self.values, dtype=float))
        if v.shape != (t.size, 4):
            raise SetupError(f"disturbance trace needs shape ({t.size}, 4), got {v.shape}")
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise SetupError("disturbance times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    @classmethod
    def constant(cls, d: Sequence[float]) -> "DisturbanceTrace":
        return cls(np.array([0.0]), np.asarray(d, dtype=float).reshape(1, 4))

    def at(self, t: float) -> np.ndarray:
        if self.times.size == 1:
            return self.values[0].copy()
        return np.array([np.interp(t, self.times, self.values[:, j]) for j in range(4)])

    def sample(self, times: np.ndarray) -> np.ndarray:
        times = np.asarray(times, dtype=float)
        if self.times.size == 1:
            return np.tile(self.values[0], (times.size, 1))
        return np.column_stack([np.interp(times, self.times, self.values[:, j]) for j in range(4)])

    def shifted(self, dT: float = 0.0) -> "DisturbanceTrace":
        v = self.values.copy()
        v[:, 0] += dT
        return DisturbanceTrace(self.times, v)


@dataclass(frozen=True)
class Event:
    """A discrete event.

    Kinds and payload keys:

    * ``"door"``: ``duration`` [s], optional ``level`` (default 1) for ``u_d``;
    * ``"sample"``: ``n`` larvae removed together with their wet mass;
    * ``"feed"``: ``mass`` [kg] of dry feed added;
    * ``"water"``: ``mass`` [kg] of water added.
    """

    time: float
    kind: str
    payload: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("door", "sample", "feed", "water"):
            raise SetupError(f"unknown event kind {self.kind!r}")
        if self.kind == "door" and not self.payload.get("duration", 0) > 0:
            raise SetupError("door events need a positive duration")
        if self.kind == "sample" and not (int(self.payload.get("n", -1)) >= 0):
            raise SetupError("sampling events need a non-negative count n")
        if self.kind in ("feed", "water") and self.payload.get("mass", -1) < 0:
            raise SetupError(f"{self.kind} events need a non-negative mass")


@dataclass(frozen=True)
class EventSchedule:
    events: tuple[Event, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(sorted(self.events, key=lambda e: e.time)))

    def __iter__(self):
        return iter(self.events)

    def __len__(self):
        return len(self.events)

    @classmethod
    def daily_sampling(cls, n: int, t0: float, tf: float, first: float = 86400.0,
                       door_duration: float | None = 300.0) -> "EventSchedule":
        """Sample ``n`` larvae once a day, optionally with the door open meanwhile."""
        evs = []
        t = t0 + first
        while t < tf - _TIME_EPS:
            evs.append(Event(t, "sample", {"n": n}))
            if door_duration:
                evs.append(Event(t, "door", {"duration": door_duration}))
            t += 86400.0
        return cls(tuple(evs))

    def validate(self, t0: float, tf: float) -> None:
        for e in self.events:
            if e.time < t0 - _TIME_EPS or e.time > tf + _TIME_EPS:
                raise SetupError(f"event at t={e.time} outside [{t0}, {tf}]")

    def breakpoints(self) -> list[float]:
        pts = []
        for e in self.events:
            pts.append(e.time)
            if e.kind == "door":
                pts.append(e.time + float(e.payload["duration"]))
        return pts

    def door_level(self, t: float) -> float:
        """``u_d`` override on the segment starting at ``t`` (0 when closed)."""
        level = 0.0
        for e in self.events:
            if e.kind == "door" and e.time - _TIME_EPS <= t < e.time + e.payload["duration"] - _TIME_EPS:
                level = max(level, float(e.payload.get("level", 1.0)))
        return level


# -- trajectory --------------------------------------------------------------


@dataclass
class Trajectory:
    """Recorded states, held inputs and disturbances.

    ``u[i]`` is the input applied from ``t[i]`` on (the last row repeats the
    final input).  ``L_num[i]`` is the larvae count at ``t[i]``.
    """

    t: np.ndarray
    x: np.ndarray
    u: np.ndarray
    d: np.ndarray
    state_names: tuple[str, ...]
    input_names: tuple[str, ...]
    L_num: np.ndarray
    fluxes: list[FluxReport] | None = None
    stats: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.t.size

    def column(self, name: str) -> np.ndarray:
        if name in self.state_names:
            return self.x[:, self.state_names.index(name)]
        if name in self.input_names:
            return self.u[:, self.input_names.index(name)]
        if name in DISTURBANCES:
            return self.d[:, DISTURBANCES.index(name)]
        if name == "L_num":
            return self.L_num
        if self.fluxes is not None and self.fluxes and name in self.fluxes[0].as_row():
            return np.array([f.as_row()[name] for f in self.fluxes])
        raise KeyError(name)

    @property
    def final(self) -> np.ndarray:
        return self.x[-1].copy()

    def at(self, times: Sequence[float], name: str) -> np.ndarray:
        """Linear interpolation of one column at the given times."""
        return np.interp(np.asarray(times, dtype=float), self.t, self.column(name))

    def compute_fluxes(self, model: SetupConfig) -> list[FluxReport]:
        out = []
        for i in range(self.t.size):
            m = model if model.L_num == self.L_num[i] else model.replace(L_num=float(self.L_num[i]))
            out.append(evaluate(m, self.x[i], self.u[i], self.d[i])[1])
        self.fluxes = out
        return out


# -- common driver -----------------------------------------------------------


class _Inputs:
    """Resolves the held input for each segment."""

    def __init__(self, u, nu: int, t0: float, tf: float, control_dt: float | None):
        self.schedule = None
        self.policy = None
        self.const = None
        self.control_times: np.ndarray
        if isinstance(u, ControlSchedule):
            if u.nu != nu:
                raise SetupError(f"schedule has {u.nu} inputs, model takes {nu}")
            self.schedule = u
            self.control_times = u.times
        elif callable(u):
            self.policy = u
            cdt = 3600.0 if control_dt is None else float(control_dt)
            if cdt <= 0:
                raise SetupError("control_dt must be positive")
            n = int(math.ceil((tf - t0) / cdt - 1e-9))
            self.control_times = t0 + cdt * np.arange(n + 1)
            if hasattr(u, "reset"):
                u.reset()
        else:
            self.const = np.zeros(nu) if u is None else np.asarray(u, dtype=float).reshape(nu)
            self.control_times = np.array([t0, tf]) if control_dt is None else np.arange(t0, tf, control_dt)
        self.current: np.ndarray | None = None

    def value(self, t: float, x: np.ndarray) -> np.ndarray:
        if self.schedule is not None:
            return self.schedule.value_at(t)
        if self.const is not None:
            return self.const.copy()
        is_boundary = self.current is None or np.any(
            np.abs(self.control_times - t) <= _TIME_EPS * max(1.0, abs(t))
        )
        if is_boundary:
            self.current = np.asarray(self.policy(t, x.copy()), dtype=float).copy()
        return self.current.copy()


def _as_trace(d) -> DisturbanceTrace | Callable[[float], np.ndarray] | None:
    if d is None or isinstance(d, DisturbanceTrace):
        return d
    if callable(d):
        return d
    return DisturbanceTrace.constant(d)


def _d_at(trace, t: float) -> np.ndarray:
    if trace is None:
        return np.zeros(4)
    if isinstance(trace, DisturbanceTrace):
        return trace.at(t)
    return np.asarray(trace(t), dtype=float)


def _segments(t0: float, tf: float, *groups: Iterable[float]) -> np.ndarray:
    pts = [t0, tf]
    for g in groups:
        pts.extend(float(v) for v in g if t0 < v < tf)
    pts = np.unique(np.asarray(pts))
    keep = [pts[0]]
    for v in pts[1:]:
        if v - keep[-1] > _TIME_EPS * max(1.0, abs(v)):
            keep.append(v)
    keep[-1] = tf
    return np.asarray(keep)


def _apply_event(e: Event, model: SetupConfig | None, x: np.ndarray) -> SetupConfig | None:
    if model is None:
        raise SetupError("events need a reactor model")
    names = model.state_names
    if e.kind == "sample":
        n = int(e.payload["n"])
        if n > model.L_num:
            raise SetupError(f"cannot sample {n} larvae, only {model.L_num:g} present at t={e.time}")
        x[names.index("B_med")] -= 1e-3 * n * x[names.index("B_wet")]
        return model.replace(L_num=model.L_num - n)
    if e.kind == "feed":
        x[names.index("N_feed")] += e.payload["mass"]
        x[names.index("B_med")] += e.payload["mass"]
    elif e.kind == "water":
        x[names.index("W_med")] += e.payload["mass"]
        x[names.index("B_med")] += e.payload["mass"]
    return model


def _nonfinite(t: float, x_last: np.ndarray, x_bad: np.ndarray, names) -> IntegrationError:
    bad = [names[i] if names else str(i) for i in np.flatnonzero(~np.isfinite(x_bad))]
    return IntegrationError(f"non-finite state at t={t:.6g} s in {', '.join(bad)}", time=t, state=x_last,
                            detail=bad[0] if bad else None)


def _run(stepper, rhs, x0, u, d, t0, tf, control_dt, events, record_fluxes):
    if not tf > t0:
        raise SetupError("tf must exceed t0")
    model = rhs if isinstance(rhs, SetupConfig) else None
    x = np.array(x0, dtype=float, copy=True)
    if model is not None and x.shape != (model.nx,):
        raise SetupError(f"{model.kind} setup has {model.nx} states, got shape {x.shape}")
    if model is not None:
        nu = model.nu
    elif isinstance(u, ControlSchedule):
        nu = u.nu
    elif callable(u):
        nu = np.size(u(t0, x))
    else:
        nu = 0 if u is None else np.size(u)
    inputs = _Inputs(u, nu, t0, tf, control_dt)
    trace = _as_trace(d)
    events = events or EventSchedule()
    if not isinstance(events, EventSchedule):
        events = EventSchedule(tuple(events))
    events.validate(t0, tf)
    if events.events and model is not None and model.kind != "closed" and any(e.kind == "door" for e in events):
        raise SetupError("door events need the closed setup")

    d_times = trace.times if isinstance(trace, DisturbanceTrace) else []
    seg = _segments(t0, tf, inputs.control_times, d_times, events.breakpoints())
    ev_list = list(events)
    ev_i = 0
    names = model.state_names if model is not None else ()
    door_idx = CLOSED_INPUTS.index("u_d")

    T, X, U, D, Ls = [], [], [], [], []
    stats = {"segments": len(seg) - 1, "rhs_evals": 0, "steps": 0, "rejected": 0}
    for a, b in zip(seg[:-1], seg[1:]):
        while ev_i < len(ev_list) and ev_list[ev_i].time <= a + _TIME_EPS * max(1.0, abs(a)):
            model = _apply_event(ev_list[ev_i], model, x)
            rhs = model
            ev_i += 1
        uk = inputs.value(a, x)
        if model is not None and model.kind == "closed" and len(events):
            lvl = events.door_level(a)
            if lvl > 0:
                uk[door_idx] = max(uk[door_idx], lvl)
        da, db = _d_at(trace, a), _d_at(trace, b)
        rows = stepper(rhs, x, uk, da, db, a, b, stats)
        L = model.L_num if model is not None else 0.0
        for (ti, xi, di) in rows[:-1]:
            T.append(ti); X.append(xi); U.append(uk); D.append(di); Ls.append(L)
        t_end, x_end, _ = rows[-1]
        if not np.all(np.isfinite(x_end)):
            last = X[-1] if X else x
            raise _nonfinite(t_end, np.asarray(last), x_end, names)
        x = np.array(x_end, dtype=float)
    while ev_i < len(ev_list):
        model = _apply_event(ev_list[ev_i], model, x)
        ev_i += 1
    T.append(tf); X.append(x.copy()); U.append(U[-1] if U else np.zeros(nu))
    D.append(_d_at(trace, tf)); Ls.append(model.L_num if model is not None else 0.0)

    traj = Trajectory(
        t=np.asarray(T), x=np.asarray(X), u=np.asarray(U).reshape(len(T), -1), d=np.asarray(D),
        state_names=names, input_names=model.input_names if model is not None else (),
        L_num=np.asarray(Ls, dtype=float), stats=stats,
    )
    if record_fluxes and model is not None:
        traj.compute_fluxes(model)
    return traj


# -- fixed-step RK4 ----------------------------------------------------------


def _rk4_python(f, x, u, da, db, h_total, n):
    h = h_total / n
    out = [x.copy()]
    for k in range(n):
        s0, sm, s1 = k / n, (k + 0.5) / n, (k + 1.0) / n
        dA = da + s0 * (db - da)
        dM = da + sm * (db - da)
        dB = da + s1 * (db - da)
        k1 = f(x, u, dA)
        k2 = f(x + 0.5 * h * k1, u, dM)
        k3 = f(x + 0.5 * h * k2, u, dM)
        k4 = f(x + h * k3, u, dB)
        x = x + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        out.append(x.copy())
        if not np.all(np.isfinite(x)):
            break
    return out


def _callable_rhs(rhs):
    if isinstance(rhs, SetupConfig):
        return rhs.rhs

    def f(x, u, d):
        return np.asarray(rhs(x, u, d), dtype=float)

    return f


def integrate_rk4(
    rhs,
    x0,
    u=None,
    d=None,
    t0: float = 0.0,
    tf: float = 3600.0,
    dt: float = 3.6,
    *,
    control_dt: float | None = None,
    events: EventSchedule | Sequence[Event] | None = None,
    record: str = "interval",
    record_fluxes: bool = False,
) -> Trajectory:
    """Classic fixed-step RK4.

    Args:
        rhs: A :class:`SetupConfig` (fast kernels) or a callable
            ``f(x, u, d) -> dx/dt``.
        x0: Initial state.
        u: :class:`ControlSchedule`, a policy ``u(t, x)`` evaluated at every
            control boundary, a constant vector or ``None``.
        d: :class:`DisturbanceTrace`, a constant 4-vector, a callable of
            time (sampled at segment ends) or ``None``.
        dt: Upper bound on the sub-step; each segment uses
            ``ceil(length / dt)`` equal sub-steps.
        control_dt: Control interval of a policy (default 1 h).
        events: Discrete events.
        record: ``"interval"`` stores segment boundaries, ``"substep"`` every
            RK4 sub-step.
        record_fluxes: Attach a :class:`FluxReport` to every stored row.

    Raises:
        IntegrationError: a non-finite state appears.
    """
    if not dt > 0:
        raise SetupError("dt must be positive")
    if record not in ("interval", "substep"):
        raise SetupError("record must be 'interval' or 'substep'")

    def stepper(model, x, uk, da, db, a, b, stats):
        n = max(1, int(math.ceil((b - a) / dt - 1e-9)))
        stats["steps"] += n
        stats["rhs_evals"] += 4 * n
        fast = isinstance(model, SetupConfig) and model.uses_kernels
        if record == "substep":
            if fast:
                rec = kernels.backend.propagate_record(model.kind_id, x, uk, da, db, b - a, n, model._packed)
            else:
                rec = _rk4_python(_callable_rhs(model), x, uk, da, db, b - a, n)
            ts = a + (b - a) * np.arange(len(rec)) / n
            return [(ts[i], np.asarray(rec[i]), da + (i / n) * (db - da)) for i in range(len(rec))]
        if fast:
            xe = kernels.backend.propagate(model.kind_id, x, uk, da, db, b - a, n, model._packed)
        else:
            xe = _rk4_python(_callable_rhs(model), x, uk, da, db, b - a, n)[-1]
        return [(a, x.copy(), da), (b, np.asarray(xe), db)]

    return _run(stepper, rhs, x0, u, d, t0, tf, control_dt, events, record_fluxes)


# -- adaptive Dormand-Prince 4(5) --------------------------------------------

_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4


def integrate_adaptive(
    rhs,
    x0,
    u=None,
    d=None,
    t0: float = 0.0,
    tf: float = 3600.0,
    tol: float = 1e-6,
    *,
    atol: Sequence[float] | float | None = None,
    control_dt: float | None = None,
    events: EventSchedule | Sequence[Event] | None = None,
    max_step: float | None = None,
    h_min: float | None = None,
    max_steps: int = 5_000_000,
    record: str = "interval",
    record_fluxes: bool = False,
) -> Trajectory:
    """Embedded Dormand-Prince 4(5) pair with standard step-size control.

    The local error of each component is measured against
    ``atol_i + tol * max(|x_i|, |x_new_i|)``.  ``atol`` defaults to ``tol``
    times the typical state magnitudes in :data:`STATE_SCALES` (or ``tol``
    for a plain callable).

    Raises:
        StepSizeUnderflow: the controller needs a step below ``h_min``
            (default ``1e-12`` times the horizon) or exceeds ``max_steps``.
    """
    if not tol > 0:
        raise SetupError("tol must be positive")
    if record not in ("interval", "step"):
        raise SetupError("record must be 'interval' or 'step'")
    span = tf - t0
    hmin = 1e-12 * span if h_min is None else float(h_min)
    hmax = span if max_step is None else float(max_step)

    if atol is None:
        if isinstance(rhs, SetupConfig):
            atol_v = tol * np.array([STATE_SCALES[n] for n in rhs.state_names])
        else:
            atol_v = tol
    else:
        atol_v = np.asarray(atol, dtype=float)

    h_state = {"h": None}

    def stepper(model, x, uk, da, db, a, b, stats):
        f = _callable_rhs(model)
        L = b - a

        def dist(t):
            return da + ((t - a) / L) * (db - da)

        rows = [(a, x.copy(), da)]
        t = a
        y = x.copy()
        k0 = f(y, uk, dist(t))
        stats["rhs_evals"] += 1
        h = h_state["h"]
        if h is None:
            sc = atol_v + tol * np.abs(y)
            d0n = np.sqrt(np.mean((y / sc) ** 2))
            d1n = np.sqrt(np.mean((k0 / sc) ** 2))
            h = 1e-6 if d0n < 1e-5 or d1n < 1e-5 else 0.01 * d0n / d1n
        h = min(h, hmax, L)
        while t < b - _TIME_EPS * max(1.0, abs(b)):
            if stats["steps"] + stats["rejected"] > max_steps:
                raise StepSizeUnderflow(f"more than {max_steps} steps at t={t:.6g}", time=t, state=y)
            last = False
            if t + h >= b - _TIME_EPS * max(1.0, abs(b)):
                h = b - t
                last = True
            ks = [k0]
            for s in range(1, 7):
                ys = y + h * sum(_A[s][j] * ks[j] for j in range(s))
                ks.append(f(ys, uk, dist(t + _C[s] * h)))
            stats["rhs_evals"] += 6
            y_new = y + h * sum(_B5[j] * ks[j] for j in range(6))
            err_vec = h * sum(_E[j] * ks[j] for j in range(7))
            sc = atol_v + tol * np.maximum(np.abs(y), np.abs(y_new))
            err = float(np.sqrt(np.mean((err_vec / sc) ** 2)))
            if not math.isfinite(err):
                err = 1e10
            if err <= 1.0:
                t = b if last else t + h
                y = y_new
                k0 = ks[6]
                stats["steps"] += 1
                if record == "step" or t >= b - _TIME_EPS * max(1.0, abs(b)):
                    rows.append((t, y.copy(), dist(t)))
                fac = 5.0 if err == 0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
                h_next = min(h * fac, hmax)
                if not last:
                    h = h_next
                h_state["h"] = h_next
            else:
                stats["rejected"] += 1
                h *= max(0.2, 0.9 * err ** -0.2)
                if h < hmin:
                    raise StepSizeUnderflow(
                        f"step size {h:.3g} s below minimum {hmin:.3g} s at t={t:.6g}", time=t, state=y
                    )
        if rows[-1][0] != b:
            rows.append((b, y.copy(), db))
        return rows

    return _run(stepper, rhs, x0, u, d, t0, tf, control_dt, events, record_fluxes)


def simulate(model: SetupConfig, x0, u=None, d=None, t0: float = 0.0, tf: float = 3600.0, *,
             method: str = "rk4", dt: float = 3.6, tol: float = 1e-7, **kwargs) -> Trajectory:
    """Dispatch to :func:`integrate_rk4` or :func:`integrate_adaptive`."""
    if method == "rk4":
        return integrate_rk4(model, x0, u, d, t0, tf, dt, **kwargs)
    if method in ("adaptive", "dopri5"):
        return integrate_adaptive(model, x0, u, d, t0, tf, tol, **kwargs)
    raise SetupError(f"unknown integration method {method!r}")


# -- measurement preprocessing -----------------------------------------------


def _moving_average(v: np.ndarray, window: int) -> np.ndarray:
    n = v.size
    lo = (window - 1) // 2
    hi = window // 2
    c = np.concatenate([[0.0], np.cumsum(v)])
    idx = np.arange(n)
    a = np.clip(idx - lo, 0, n)
    b = np.clip(idx + hi + 1, 0, n)
    return (c[b] - c[a]) / (b - a)


def preprocess_measurements(
    t: Sequence[float], values, window: int = 50, resample_dt: float | None = 600.0
) -> tuple[np.ndarray, np.ndarray]:
    """Centred moving average followed by linear resampling.

    The window covers ``(window - 1) // 2`` samples before and ``window // 2``
    after each point and shrinks at the ends.

    Args:
        t: Sample times [s], strictly increasing.
        values: Samples, shape ``(n,)`` or ``(n, channels)``.
        window: Moving-average width in samples (>= 1).
        resample_dt: Spacing of the uniform output grid, or ``None`` to keep
            the original times.

    Returns:
        ``(times, smoothed)``.

    Raises:
        DataError: fewer samples than the window, or bad time stamps.
    """
    t = np.asarray(t, dtype=float)
    v = np.asarray(values, dtype=float)
    if window < 1:
        raise DataError("window must be at least 1")
    if t.ndim != 1 or v.shape[0] != t.size:
        raise DataError("times and values must have the same length")
    if t.size < window:
        raise DataError(f"series of {t.size} samples is shorter than the window {window}")
    if t.size > 1 and np.any(np.diff(t) <= 0):
        raise DataError("sample times must be strictly increasing")
    flat = v.ndim == 1
    v2 = v.reshape(t.size, -1)
    sm = np.column_stack([_moving_average(v2[:, j], window) for j in range(v2.shape[1])])
    if resample_dt is None:
        out_t = t
    else:
        if not resample_dt > 0:
            raise DataError("resample_dt must be positive")
        n = int(math.floor((t[-1] - t[0]) / resample_dt + 1e-9))
        out_t = t[0] + resample_dt * np.arange(n + 1)
        sm = np.column_stack([np.interp(out_t, t, sm[:, j]) for j in range(sm.shape[1])])
    return out_t, (sm[:, 0] if flat else sm)
