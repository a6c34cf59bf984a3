"""Bounded nonlinear least-squares fits with Latin-hypercube multistart.

Residuals are evaluated by single shooting: every candidate parameter vector
is simulated from the initial state and compared with the measurements.
The local solver is L-BFGS-B on bound-normalised coordinates with central
finite-difference gradients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.stats import qmc

from .errors import DataError, EstimationError, HermetiaError, SetupError
from .integrate import DisturbanceTrace, Trajectory
from .params import ParameterSet, parameter_info
from .reactor import SetupConfig

__all__ = [
    "Dataset",
    "EstimationProblem",
    "StartRecord",
    "FitResult",
    "residuals",
    "objective",
    "fit",
    "r_squared",
    "state_outputs",
    "tg2_problem",
    "synthetic_tg2_data",
]


@dataclass
class Dataset:
    """Measured outputs on a common time grid.

    Missing samples are NaN; ``mask`` (same shape as ``values``) can switch
    off further samples.  A channel whose mask is all False is ignored.
    """

    times: np.ndarray
    channels: tuple[str, ...]
    values: np.ndarray
    mask: np.ndarray | None = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim == 1:
            self.values = self.values[:, None]
        self.channels = tuple(self.channels)
        if self.values.shape != (self.times.size, len(self.channels)):
            raise DataError(
                f"values shape {self.values.shape} does not match {self.times.size} times x {len(self.channels)} channels"
            )
        if np.any(np.diff(self.times) <= 0):
            raise DataError("measurement times must be strictly increasing")
        finite = np.isfinite(self.values)
        if self.mask is None:
            self.mask = finite
        else:
            self.mask = np.asarray(self.mask, dtype=bool) & finite
            if self.mask.shape != self.values.shape:
                raise DataError("mask shape must equal values shape")

    def select(self, channels: Sequence[str]) -> "Dataset":
        """Keep only ``channels`` (the mask of every other channel is cleared)."""
        mask = self.mask.copy()
        for j, name in enumerate(self.channels):
            if name not in channels:
                mask[:, j] = False
        return Dataset(self.times, self.channels, self.values, mask)

    @property
    def active_channels(self) -> tuple[str, ...]:
        return tuple(c for j, c in enumerate(self.channels) if self.mask[:, j].any())


def state_outputs(traj: Trajectory, times: np.ndarray, channels: Sequence[str]) -> np.ndarray:
    """Default output map: interpolate named trajectory columns."""
    return np.column_stack([traj.at(times, c) for c in channels])


Predictor = Callable[[object], object]


@dataclass
class EstimationProblem:
    """A bounded fit of some parameters to a dataset.

    Attributes:
        free: Free parameter names with ``(lower, upper)`` bounds; ``None``
            bounds take the registry bounds.
        params: Values of the fixed parameters (a :class:`ParameterSet` or
            a plain mapping for toy problems).
        data: Measurements.
        simulate: ``simulate(params) -> Trajectory`` (or an array of
            outputs, shape ``(n_times, n_channels)``).
        output_map: Maps a trajectory to outputs at the measurement times.
        scaling: ``"std"`` divides each channel by its measured standard
            deviation, ``None`` leaves residuals unscaled, an array gives
            explicit per-channel divisors.
    """

    free: Mapping[str, tuple[float, float] | None]
    params: ParameterSet | Mapping[str, float]
    data: Dataset
    simulate: Predictor
    output_map: Callable[[Trajectory, np.ndarray, Sequence[str]], np.ndarray] = state_outputs
    scaling: str | Sequence[float] | None = "std"
    horizon: tuple[float, float] | None = None

    def __post_init__(self):
        free = {}
        for name, b in dict(self.free).items():
            if not self._has(name):
                raise SetupError(f"free parameter {name!r} is not a model parameter")
            if b is None:
                info = parameter_info(name)
                b = (info["lower"], info["upper"])
            lo, hi = float(b[0]), float(b[1])
            if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                raise SetupError(f"bounds of {name!r} must be finite with lower < upper, got {b}")
            free[name] = (lo, hi)
        if not free:
            raise SetupError("at least one free parameter is required")
        self.free = free
        if self.horizon is not None:
            t0, tf = self.horizon
            if self.data.times[0] < t0 - 1e-9 or self.data.times[-1] > tf + 1e-9:
                raise DataError("measurement times lie outside the simulation horizon")
        self._divisor = self._channel_divisors()

    def _has(self, name: str) -> bool:
        if isinstance(self.params, ParameterSet):
            return hasattr(self.params, name)
        return name in self.params

    def _channel_divisors(self) -> np.ndarray:
        nc = len(self.data.channels)
        if self.scaling is None or self.scaling == "none":
            return np.ones(nc)
        if isinstance(self.scaling, str):
            if self.scaling != "std":
                raise SetupError(f"unknown residual scaling {self.scaling!r}")
            div = np.ones(nc)
            for j in range(nc):
                col = self.data.values[self.data.mask[:, j], j]
                if col.size >= 2 and np.std(col) > 0:
                    div[j] = np.std(col)
            return div
        div = np.asarray(self.scaling, dtype=float)
        if div.shape != (nc,) or np.any(div <= 0):
            raise SetupError("explicit scaling needs one positive divisor per channel")
        return div

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(self.free)

    @property
    def lower(self) -> np.ndarray:
        return np.array([b[0] for b in self.free.values()])

    @property
    def upper(self) -> np.ndarray:
        return np.array([b[1] for b in self.free.values()])

    def with_values(self, p_free: Sequence[float]):
        """Fixed parameters with the free ones substituted."""
        changes = dict(zip(self.names, map(float, p_free)))
        if isinstance(self.params, ParameterSet):
            return self.params.replace(**changes)
        merged = dict(self.params)
        merged.update(changes)
        return merged

    def predict(self, p_free: Sequence[float]) -> np.ndarray:
        out = self.simulate(self.with_values(p_free))
        if isinstance(out, Trajectory):
            out = self.output_map(out, self.data.times, self.data.channels)
        out = np.asarray(out, dtype=float)
        if out.ndim == 1:
            out = out[:, None]
        if out.shape != self.data.values.shape:
            raise SetupError(f"model outputs have shape {out.shape}, data {self.data.values.shape}")
        return out


def residuals(problem: EstimationProblem, p_free: Sequence[float]) -> np.ndarray:
    """Stacked scaled residuals ``(measured - modelled) / divisor``, channel by channel.

    Raises:
        HermetiaError: the simulation failed; the message names the parameters.
    """
    p_free = np.asarray(p_free, dtype=float)
    if np.any(p_free < problem.lower - 1e-12) or np.any(p_free > problem.upper + 1e-12):
        raise SetupError("free parameters outside their bounds")
    try:
        y = problem.predict(p_free)
    except HermetiaError as exc:
        ctx = ", ".join(f"{n}={v:.6g}" for n, v in zip(problem.names, p_free))
        raise type(exc)(f"{exc} [parameters: {ctx}]") from exc
    parts = []
    data = problem.data
    for j in range(len(data.channels)):
        m = data.mask[:, j]
        if m.any():
            parts.append((data.values[m, j] - y[m, j]) / problem._divisor[j])
    return np.concatenate(parts)


def objective(problem: EstimationProblem, p_free: Sequence[float]) -> float:
    """Residual sum of squares."""
    r = residuals(problem, p_free)
    return float(r @ r)


@dataclass
class StartRecord:
    index: int
    start: np.ndarray
    x: np.ndarray | None
    rss: float
    nfev: int
    success: bool
    message: str


@dataclass
class FitResult:
    names: tuple[str, ...]
    x: np.ndarray
    params: object
    rss: float
    r2: dict[str, float]
    starts: list[StartRecord]
    best_index: int
    fitted: np.ndarray = field(repr=False, default=None)

    @property
    def values(self) -> dict[str, float]:
        return dict(zip(self.names, map(float, self.x)))


def _local_fit(problem: EstimationProblem, z0: np.ndarray, fd_step: float, maxiter: int, tol: float):
    lo, hi = problem.lower, problem.upper
    width = hi - lo
    nfev = 0

    def f(z):
        nonlocal nfev
        nfev += 1
        return objective(problem, lo + np.clip(z, 0.0, 1.0) * width)

    def fg(z):
        z = np.clip(z, 0.0, 1.0)
        f0 = f(z)
        g = np.empty_like(z)
        for i in range(z.size):
            zp, zm = z.copy(), z.copy()
            if z[i] + fd_step <= 1.0 and z[i] - fd_step >= 0.0:
                zp[i] += fd_step
                zm[i] -= fd_step
                g[i] = (f(zp) - f(zm)) / (2 * fd_step)
            elif z[i] + fd_step <= 1.0:
                zp[i] += fd_step
                g[i] = (f(zp) - f0) / fd_step
            else:
                zm[i] -= fd_step
                g[i] = (f0 - f(zm)) / fd_step
        return f0, g

    res = minimize(fg, z0, jac=True, method="L-BFGS-B", bounds=[(0.0, 1.0)] * z0.size,
                   options={"maxiter": maxiter, "ftol": tol, "gtol": 1e-10})
    z = np.clip(res.x, 0.0, 1.0)
    return lo + z * width, float(res.fun), nfev, bool(res.success), str(res.message)


def fit(
    problem: EstimationProblem,
    n_starts: int = 8,
    seed: int | None = 0,
    *,
    fd_step: float = 1e-6,
    maxiter: int = 200,
    tol: float = 1e-12,
    starts: np.ndarray | None = None,
) -> FitResult:
    """Multistart bounded least squares.

    Start points are a Latin hypercube in the bound box (seeded, hence
    deterministic).  ``starts`` overrides them with explicit points.

    Raises:
        EstimationError: every start failed; ``records`` holds the diagnostics.
    """
    if n_starts < 1:
        raise SetupError("n_starts must be at least 1")
    lo, hi = problem.lower, problem.upper
    if starts is None:
        Z = qmc.LatinHypercube(d=lo.size, seed=seed).random(n_starts)
    else:
        Z = (np.atleast_2d(np.asarray(starts, dtype=float)) - lo) / (hi - lo)
    records: list[StartRecord] = []
    for i, z0 in enumerate(Z):
        try:
            x, rss, nfev, ok, msg = _local_fit(problem, z0, fd_step, maxiter, tol)
            records.append(StartRecord(i, lo + z0 * (hi - lo), x, rss, nfev, ok, msg))
        except HermetiaError as exc:
            records.append(StartRecord(i, lo + z0 * (hi - lo), None, math.inf, 0, False, str(exc)))
    done = [r for r in records if r.x is not None and math.isfinite(r.rss)]
    if not done:
        raise EstimationError("all starts of the fit failed", records)
    best = min(done, key=lambda r: (r.rss, r.index))
    fitted = problem.predict(best.x)
    data = problem.data
    r2 = {}
    for j, c in enumerate(data.channels):
        m = data.mask[:, j]
        if m.sum() >= 2 and np.var(data.values[m, j]) > 0:
            r2[c] = float(r_squared(data.values[m, j], fitted[m, j]))
    return FitResult(problem.names, best.x.copy(), problem.with_values(best.x), best.rss, r2,
                     records, best.index, fitted)


def r_squared(measured, modeled) -> np.ndarray | float:
    """Coefficient of determination ``1 - SS_res/SS_tot`` per channel (column).

    NaN samples of ``measured`` are skipped.

    Raises:
        DataError: fewer than two samples or zero variance in a channel.
    """
    y = np.asarray(measured, dtype=float)
    f = np.asarray(modeled, dtype=float)
    if y.shape != f.shape:
        raise DataError("measured and modeled must have the same shape")
    scalar = y.ndim == 1
    y2, f2 = (y[:, None], f[:, None]) if scalar else (y, f)
    out = np.empty(y2.shape[1])
    for j in range(y2.shape[1]):
        m = np.isfinite(y2[:, j])
        yy, ff = y2[m, j], f2[m, j]
        if yy.size < 2:
            raise DataError(f"channel {j}: at least two samples are needed for R^2")
        ss_tot = float(np.sum((yy - yy.mean()) ** 2))
        if ss_tot == 0.0:
            raise DataError(f"channel {j}: zero variance, R^2 is undefined")
        out[j] = 1.0 - float(np.sum((yy - ff) ** 2)) / ss_tot
    return float(out[0]) if scalar else out


# -- TG2-like problems ---------------------------------------------------------

TG2_CHANNELS = ("B_dry", "B_wet", "T_med")


def _tg2_simulator(model: SetupConfig, hours: float, disturbance: DisturbanceTrace | None,
                   x0: np.ndarray | None, dt: float):
    from .scenarios import outside_trace, tg2_initial_state, tg2_run

    dist = disturbance or outside_trace(hours)
    start = tg2_initial_state(model, dist.at(0.0)) if x0 is None else np.asarray(x0, dtype=float)

    def run(params: ParameterSet) -> Trajectory:
        return tg2_run(model.replace(params=params), hours, disturbance=dist, x0=start, dt=dt)

    return run


def synthetic_tg2_data(
    params: ParameterSet | None = None,
    *,
    kind: str = "partial",
    hours: float = 192.0,
    sample_dt: float = 3600.0,
    channels: Sequence[str] = TG2_CHANNELS,
    noise: float = 0.01,
    seed: int | None = 0,
    disturbance: DisturbanceTrace | None = None,
    dt: float = 3.6,
) -> Dataset:
    """TG2-like measurements with multiplicative Gaussian noise of relative size ``noise``."""
    from .scenarios import tg2_model

    model = tg2_model(params, kind=kind)
    traj = _tg2_simulator(model, hours, disturbance, None, dt)(model.params)
    times = np.arange(0.0, hours * 3600.0 + 1e-6, sample_dt)
    y = state_outputs(traj, times, channels)
    if noise > 0:
        y = y * (1.0 + noise * np.random.default_rng(seed).standard_normal(y.shape))
    return Dataset(times, tuple(channels), y)


def tg2_problem(
    data: Dataset,
    free: Mapping[str, tuple[float, float] | None] | Sequence[str] = ("k_mat", "k_maint", "k_alpha_assim"),
    params: ParameterSet | None = None,
    *,
    kind: str = "partial",
    hours: float | None = None,
    disturbance: DisturbanceTrace | None = None,
    x0: np.ndarray | None = None,
    dt: float = 60.0,
    scaling: str | Sequence[float] | None = "std",
) -> EstimationProblem:
    """Fit problem on a TG2-like batch.

    Bounds default to half and twice the starting value of each free
    parameter.  A coarser RK4 step than for simulation is adequate since
    the partial setup has no fast air dynamics.
    """
    from .scenarios import tg2_model

    model = tg2_model(params, kind=kind)
    if not isinstance(free, Mapping):
        free = {n: None for n in free}
    bounds = {}
    for name, b in free.items():
        if b is None:
            v = getattr(model.params, name)
            b = (0.5 * v, 2.0 * v) if v > 0 else None
        bounds[name] = b
    hours = hours if hours is not None else data.times[-1] / 3600.0
    sim = _tg2_simulator(model, hours, disturbance, x0, dt)
    return EstimationProblem(bounds, model.params, data, sim, scaling=scaling,
                             horizon=(0.0, hours * 3600.0))
