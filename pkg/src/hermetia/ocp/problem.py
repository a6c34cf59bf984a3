"""Optimal-control problem definition and its multiple-shooting transcription.

Decision variables are the states at the N+1 shooting nodes and N piecewise
constant inputs, stored as ``w = [x_0, u_0, x_1, u_1, ..., u_{N-1}, x_N]``
in *display units* (states and inputs divided by their unit scales).  The
objective is quadratic in ``w``; all nonlinearity sits in the continuity
(defect) constraints and in the optional relative-humidity cap.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .. import kernels
from ..errors import SetupError, TranscriptionError
from ..integrate import DisturbanceTrace
from ..reactor import SetupConfig
from ..thermo import h_sat_unchecked

__all__ = [
    "OcpSpec",
    "KernelDynamics",
    "FunctionDynamics",
    "MultipleShootingNLP",
    "transcribe",
    "DISPLAY_STATE_SCALES",
    "DISPLAY_INPUT_SCALES",
]

# one display unit expressed in model units
DISPLAY_STATE_SCALES = {"B_dry": 1e-3, "B_wet": 1e-3}  # mg; all others unchanged
DISPLAY_INPUT_SCALES = {"u_dH": 1e-3, "u_W_med": 1e-9}  # g/m^3 and ug/s


# -- dynamics back ends ----------------------------------------------------------


class KernelDynamics:
    """Interval maps of a reactor setup through the compiled (or fallback) RK4."""

    def __init__(self, model: SetupConfig, substeps: int = 1000):
        if not model.uses_kernels:
            raise SetupError("custom rate functions need FunctionDynamics")
        self.model = model
        self.substeps = int(substeps)
        self.nx, self.nu = model.nx, model.nu
        self.state_names, self.input_names = model.state_names, model.input_names

    def propagate(self, x, u, da, db, h):
        return np.asarray(kernels.backend.propagate(self.model.kind_id, np.asarray(x, float), np.asarray(u, float),
                                                    np.asarray(da, float), np.asarray(db, float), h,
                                                    self.substeps, self.model._packed))

    def propagate_jac(self, X, U, D, h, sx, su):
        return kernels.backend.propagate_jac_many(self.model.kind_id, np.ascontiguousarray(X, float),
                                                  np.ascontiguousarray(U, float), np.ascontiguousarray(D, float),
                                                  h, self.substeps, self.model._packed,
                                                  np.asarray(sx, float), np.asarray(su, float))


class FunctionDynamics:
    """Interval maps of an arbitrary ``f(x, u, d) -> dx/dt`` by RK4 in numpy."""

    def __init__(self, f: Callable, nx: int, nu: int, substeps: int = 1000,
                 state_names: Sequence[str] | None = None, input_names: Sequence[str] | None = None):
        self.f = f
        self.nx, self.nu = int(nx), int(nu)
        self.substeps = int(substeps)
        self.state_names = tuple(state_names or (f"x{i}" for i in range(nx)))
        self.input_names = tuple(input_names or (f"u{i}" for i in range(nu)))

    def propagate(self, x, u, da, db, h):
        x = np.array(x, dtype=float)
        u = np.asarray(u, dtype=float)
        da = np.asarray(da, dtype=float)
        db = np.asarray(db, dtype=float)
        n = self.substeps
        dt = h / n
        for i in range(n):
            d0 = da + (i / n) * (db - da)
            dm = da + ((i + 0.5) / n) * (db - da)
            d1 = da + ((i + 1) / n) * (db - da)
            k1 = self.f(x, u, d0)
            k2 = self.f(x + 0.5 * dt * k1, u, dm)
            k3 = self.f(x + 0.5 * dt * k2, u, dm)
            k4 = self.f(x + dt * k3, u, d1)
            x = x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        return x

    def propagate_jac(self, X, U, D, h, sx, su):
        N = X.shape[0]
        X1 = np.empty((N, self.nx))
        Jx = np.empty((N, self.nx, self.nx))
        Ju = np.empty((N, self.nx, self.nu))
        for k in range(N):
            base = self.propagate(X[k], U[k], D[k], D[k + 1], h)
            X1[k] = base
            for j in range(self.nx):
                xp = X[k].copy()
                xp[j] += sx[j]
                Jx[k, :, j] = (self.propagate(xp, U[k], D[k], D[k + 1], h) - base) / sx[j]
            for j in range(self.nu):
                up = U[k].copy()
                up[j] += su[j]
                Ju[k, :, j] = (self.propagate(X[k], up, D[k], D[k + 1], h) - base) / su[j]
        return X1, Jx, Ju


# -- problem definition ----------------------------------------------------------


Bounds = Mapping[str, tuple[float, float]]


@dataclass
class OcpSpec:
    """Resource-optimal control problem over a fixed horizon.

    Bounds, initial state and disturbances are in model units.  ``R`` and
    ``S`` weight inputs in display units (``input_scale``) and time in
    hours; rates are first differences per hour.  Terminal weights act on
    ``B_dry`` in mg and on ``W_med`` and ``N_feed + N_exc`` in kg.

    Attributes:
        model: Reactor setup or any object with the dynamics interface.
        x0: Initial state (fixed).
        t0, t_h, dt: Horizon [s] and control interval [s].
        alpha: Terminal weights (alpha1, alpha2, alpha3).
        R, S: Diagonals of the input and input-rate cost.
        x_bounds, u_bounds: Box bounds by name; states are bounded at the
            shooting nodes only.
        du_bounds: Largest allowed ``|u_k - u_{k-1}|`` per hour, by name.
        terminal_bounds: Extra bounds on the last node, by name.
        u_init: Input applied before ``t0``; when given the first rate
            term and rate bound refer to it.
        disturbance: Outside-air trace (constant 4-vector or trace).
        substeps: RK4 sub-steps per control interval.
        maturity_steepness: Logistic steepness of the maturity switch used
            inside the optimisation (0 keeps the hard switch).
        evap_smoothing: Width of the logistic blend replacing the switch of
            the medium evaporation coefficient inside the optimisation.
        rh_max: Cap on the air relative humidity of the partial setup.
        terminal_weights: Explicit linear terminal weights by state name
            (display units); replaces ``alpha`` when given.
    """

    model: object
    x0: np.ndarray
    t0: float = 0.0
    t_h: float = 192 * 3600.0
    dt: float = 3600.0
    alpha: tuple[float, float, float] = (10.0, 10.0, 10.0)
    R: Sequence[float] | None = None
    S: Sequence[float] | None = None
    x_bounds: Bounds = field(default_factory=dict)
    u_bounds: Bounds = field(default_factory=dict)
    du_bounds: Mapping[str, float] = field(default_factory=dict)
    terminal_bounds: Bounds = field(default_factory=dict)
    u_init: Sequence[float] | None = None
    disturbance: DisturbanceTrace | Sequence[float] | None = None
    substeps: int = 1000
    maturity_steepness: float = 1.0
    evap_smoothing: float = 0.01
    rh_max: float | None = 0.95
    terminal_weights: Mapping[str, float] | None = None
    state_scale: Sequence[float] | None = None
    input_scale: Sequence[float] | None = None

    def __post_init__(self):
        if not self.t_h > self.t0:
            raise SetupError("horizon end must exceed its start")
        if not self.dt > 0:
            raise SetupError("control interval must be positive")
        n = (self.t_h - self.t0) / self.dt
        if abs(n - round(n)) > 1e-9 * max(1.0, n):
            raise SetupError("control interval must divide the horizon")
        nu = len(self.input_names)
        self.R = np.zeros(nu) if self.R is None else np.asarray(self.R, dtype=float)
        self.S = np.zeros(nu) if self.S is None else np.asarray(self.S, dtype=float)
        for name, v in (("R", self.R), ("S", self.S)):
            if v.shape != (nu,) or np.any(v < 0):
                raise SetupError(f"{name} must hold {nu} non-negative diagonal entries")
        for group, names in ((self.x_bounds, self.state_names), (self.u_bounds, self.input_names),
                             (self.terminal_bounds, self.state_names)):
            for k, (lo, hi) in group.items():
                if k not in names:
                    raise SetupError(f"bound on unknown variable {k!r}")
                if lo > hi:
                    raise SetupError(f"bounds of {k!r} are inconsistent: {lo} > {hi}")
        for k, v in self.du_bounds.items():
            if k not in self.input_names or v < 0:
                raise SetupError(f"bad rate bound {k!r}: {v}")
        self.x0 = np.asarray(self.x0, dtype=float)
        if self.x0.shape != (len(self.state_names),):
            raise SetupError(f"x0 needs {len(self.state_names)} entries")

    @property
    def N(self) -> int:
        return int(round((self.t_h - self.t0) / self.dt))

    @property
    def state_names(self) -> tuple[str, ...]:
        return tuple(self.model.state_names)

    @property
    def input_names(self) -> tuple[str, ...]:
        return tuple(self.model.input_names)

    @property
    def is_reactor(self) -> bool:
        return isinstance(self.model, SetupConfig)

    def with_(self, **changes) -> "OcpSpec":
        return replace(self, **changes)

    def dynamics(self, hard_switch: bool = False):
        """Dynamics used in the transcription (smoothed switches unless ``hard_switch``)."""
        if self.is_reactor:
            model = self.model
            if hard_switch:
                model = model.replace(options=replace(model.options, maturity_steepness=0.0, evap_smoothing=0.0))
            else:
                model = model.replace(options=replace(model.options, maturity_steepness=self.maturity_steepness,
                                                      evap_smoothing=self.evap_smoothing))
            if model.uses_kernels:
                return KernelDynamics(model, self.substeps)
            return FunctionDynamics(model.rhs, model.nx, model.nu, self.substeps, model.state_names,
                                    model.input_names)
        return self.model

    def node_times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.N + 1)

    def disturbance_nodes(self) -> np.ndarray:
        t = self.node_times()
        d = self.disturbance
        if d is None:
            return np.zeros((t.size, 4))
        if isinstance(d, DisturbanceTrace):
            return d.sample(t)
        return np.tile(np.asarray(d, dtype=float), (t.size, 1))

    def scales(self) -> tuple[np.ndarray, np.ndarray]:
        xs = self.state_scale
        us = self.input_scale
        if xs is None:
            xs = [DISPLAY_STATE_SCALES.get(n, 1.0) if self.is_reactor else 1.0 for n in self.state_names]
        if us is None:
            us = [DISPLAY_INPUT_SCALES.get(n, 1.0) if self.is_reactor else 1.0 for n in self.input_names]
        return np.asarray(xs, dtype=float), np.asarray(us, dtype=float)

    def terminal_vector(self) -> np.ndarray:
        """Linear terminal cost per state in display units."""
        c = np.zeros(len(self.state_names))
        if self.terminal_weights is not None:
            for k, v in self.terminal_weights.items():
                c[self.state_names.index(k)] = v
            return c
        a1, a2, a3 = self.alpha
        names = self.state_names
        if "B_dry" in names:
            c[names.index("B_dry")] = -a1
        if "W_med" in names:
            c[names.index("W_med")] = a2
        for n in ("N_feed", "N_exc"):
            if n in names:
                c[names.index(n)] = a3
        return c


# -- transcription ---------------------------------------------------------------


class MultipleShootingNLP:
    """The transcribed nonlinear program.

    ``f(w) = 1/2 w'Qw + q'w + f0``; equality constraints are the interval
    defects; inequality constraints are linear rate rows and the nonlinear
    humidity cap; everything else is a box on ``w``.
    """

    def __init__(self, spec: OcpSpec, hard_switch: bool = False):
        self.spec = spec
        self.dyn = spec.dynamics(hard_switch=hard_switch)
        self.N = N = spec.N
        self.nx, self.nu = len(spec.state_names), len(spec.input_names)
        self.xs, self.us = spec.scales()
        self.h = spec.dt
        self.dt_h = spec.dt / 3600.0
        self.times = spec.node_times()
        self.D = spec.disturbance_nodes()
        nz = self.nx + self.nu
        self.n = N * nz + self.nx
        self._build_bounds()
        self._build_objective()
        self._build_rate_rows()
        self._rh = self._rh_setup()

    # -- layout ----------------------------------------------------------
    def ix(self, k: int) -> slice:
        s = k * (self.nx + self.nu)
        return slice(s, s + self.nx)

    def iu(self, k: int) -> slice:
        s = k * (self.nx + self.nu) + self.nx
        return slice(s, s + self.nu)

    def unpack(self, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Display-unit node states ``(N+1, nx)`` and inputs ``(N, nu)``."""
        nz = self.nx + self.nu
        body = w[: self.N * nz].reshape(self.N, nz)
        X = np.vstack([body[:, : self.nx], w[self.N * nz:][None, :]])
        return X, body[:, self.nx:].copy()

    def pack(self, X: np.ndarray, U: np.ndarray) -> np.ndarray:
        nz = self.nx + self.nu
        body = np.hstack([X[:-1], U]).reshape(-1)
        return np.concatenate([body, X[-1]])[: self.N * nz + self.nx]

    def to_model_units(self, w) -> tuple[np.ndarray, np.ndarray]:
        X, U = self.unpack(w)
        return X * self.xs, U * self.us

    def from_model_units(self, X, U) -> np.ndarray:
        return self.pack(np.asarray(X) / self.xs, np.asarray(U) / self.us)

    # -- bounds ----------------------------------------------------------
    def _build_bounds(self):
        spec = self.spec
        xl = np.full(self.nx, -np.inf)
        xu = np.full(self.nx, np.inf)
        for k, (lo, hi) in spec.x_bounds.items():
            i = spec.state_names.index(k)
            xl[i], xu[i] = lo / self.xs[i], hi / self.xs[i]
        ul = np.full(self.nu, -np.inf)
        uu = np.full(self.nu, np.inf)
        for k, (lo, hi) in spec.u_bounds.items():
            i = spec.input_names.index(k)
            ul[i], uu[i] = lo / self.us[i], hi / self.us[i]
        lb = np.empty(self.n)
        ub = np.empty(self.n)
        for k in range(self.N):
            lb[self.ix(k)], ub[self.ix(k)] = xl, xu
            lb[self.iu(k)], ub[self.iu(k)] = ul, uu
        tl, tu = xl.copy(), xu.copy()
        for k, (lo, hi) in spec.terminal_bounds.items():
            i = spec.state_names.index(k)
            tl[i] = max(tl[i], lo / self.xs[i])
            tu[i] = min(tu[i], hi / self.xs[i])
        if np.any(tl > tu):
            raise TranscriptionError("terminal bounds contradict the state bounds")
        lb[self.ix(self.N)], ub[self.ix(self.N)] = tl, tu
        x0 = spec.x0 / self.xs
        lb[self.ix(0)] = ub[self.ix(0)] = x0
        self.lb, self.ub = lb, ub

    # -- objective -------------------------------------------------------
    def _build_objective(self):
        spec = self.spec
        n, N, nu = self.n, self.N, self.nu
        Q = sp.lil_matrix((n, n))
        q = np.zeros(n)
        f0 = 0.0
        R, S = spec.R, spec.S
        for k in range(N):
            iu = self.iu(k)
            for j in range(nu):
                Q[iu.start + j, iu.start + j] += 2.0 * self.dt_h * R[j]
        # sum_k (u_k - u_{k-1})' S (u_k - u_{k-1}) / dt_h
        for k in range(1, N):
            a, b = self.iu(k - 1).start, self.iu(k).start
            for j in range(nu):
                c = 2.0 * S[j] / self.dt_h
                Q[a + j, a + j] += c
                Q[b + j, b + j] += c
                Q[a + j, b + j] -= c
                Q[b + j, a + j] -= c
        if spec.u_init is not None:
            u_init = np.asarray(spec.u_init, dtype=float) / self.us
            b = self.iu(0).start
            for j in range(nu):
                c = 2.0 * S[j] / self.dt_h
                Q[b + j, b + j] += c
                q[b + j] -= c * u_init[j]
                f0 += 0.5 * c * u_init[j] ** 2
        q[self.ix(N)] += spec.terminal_vector()
        self.Q = Q.tocsc()
        self.q = q
        self.f0 = f0

    def objective(self, w) -> float:
        return float(0.5 * w @ (self.Q @ w) + self.q @ w + self.f0)

    def gradient(self, w) -> np.ndarray:
        return self.Q @ w + self.q

    def objective_terms(self, w) -> dict[str, float]:
        """Objective split into terminal, input and rate contributions."""
        spec = self.spec
        X, U = self.unpack(w)
        c = spec.terminal_vector()
        names = spec.state_names
        terms = {}
        for key, group in (("terminal_B_dry", ("B_dry",)), ("terminal_W_med", ("W_med",)),
                           ("terminal_N_med", ("N_feed", "N_exc"))):
            terms[key] = float(sum(c[names.index(g)] * X[-1, names.index(g)] for g in group if g in names))
        other = [i for i, nm in enumerate(names) if nm not in ("B_dry", "W_med", "N_feed", "N_exc")]
        terms["terminal_other"] = float(sum(c[i] * X[-1, i] for i in other))
        terms["input_cost"] = float(self.dt_h * np.sum(U ** 2 * spec.R))
        dU = np.diff(U, axis=0)
        if spec.u_init is not None:
            dU = np.vstack([U[:1] - np.asarray(spec.u_init) / self.us, dU])
        terms["rate_cost"] = float(np.sum(dU ** 2 * spec.S) / self.dt_h)
        terms["total"] = sum(terms.values())
        return terms

    # -- linear rate rows -----------------------------------------------------
    def _build_rate_rows(self):
        spec = self.spec
        rows, cols, vals, lo, hi = [], [], [], [], []
        r = 0
        for name, vmax in spec.du_bounds.items():
            j = spec.input_names.index(name)
            lim = vmax * self.dt_h / self.us[j]
            for k in range(1, self.N):
                rows += [r, r]
                cols += [self.iu(k).start + j, self.iu(k - 1).start + j]
                vals += [1.0, -1.0]
                lo.append(-lim)
                hi.append(lim)
                r += 1
            if spec.u_init is not None:
                u0 = spec.u_init[j] / self.us[j]
                rows.append(r)
                cols.append(self.iu(0).start + j)
                vals.append(1.0)
                lo.append(u0 - lim)
                hi.append(u0 + lim)
                r += 1
        self.A_lin = sp.csr_matrix((vals, (rows, cols)), shape=(r, self.n))
        self.lin_lo = np.array(lo)
        self.lin_hi = np.array(hi)

    # -- humidity cap ---------------------------------------------------------
    def _rh_setup(self):
        spec = self.spec
        names = spec.input_names
        if not (spec.is_reactor and spec.rh_max is not None and "u_dT" in names and "u_dH" in names):
            return None
        return names.index("u_dT"), names.index("u_dH"), spec.model.params, float(spec.rh_max)

    @property
    def n_ineq(self) -> int:
        return 0 if self._rh is None else 2 * self.N

    def ineq(self, w, jac: bool = True):
        """Humidity cap ``H_out + u_dH - rh_max * h_sat(T_out + u_dT) <= 0`` at both interval ends.

        Values are in g/m^3.  Returns ``(g, G)`` with ``G`` sparse.
        """
        if self._rh is None:
            return np.zeros(0), sp.csr_matrix((0, self.n))
        jT, jH, p, rh = self._rh
        _, U = self.unpack(w)
        g = np.empty(2 * self.N)
        rows, cols, vals = [], [], []
        for k in range(self.N):
            uT = U[k, jT] * self.us[jT]
            uH = U[k, jH] * self.us[jH]
            for e, d in enumerate((self.D[k], self.D[k + 1])):
                r = 2 * k + e
                T = d[0] + uT
                hs = h_sat_unchecked(T, p)
                g[r] = 1e3 * (d[1] + uH - rh * hs)
                if jac:
                    dh = (h_sat_unchecked(T + 1e-4, p) - h_sat_unchecked(T - 1e-4, p)) / 2e-4
                    rows += [r, r]
                    cols += [self.iu(k).start + jT, self.iu(k).start + jH]
                    vals += [-1e3 * rh * dh * self.us[jT], 1e3 * self.us[jH]]
        G = sp.csr_matrix((vals, (rows, cols)), shape=(2 * self.N, self.n))
        return g, G

    # -- defects ----------------------------------------------------------------
    def fd_steps(self, w) -> tuple[np.ndarray, np.ndarray]:
        X, U = self.unpack(w)
        sx = 1e-7 * np.maximum(1.0, np.max(np.abs(X), axis=0)) * self.xs
        su = 1e-7 * np.maximum(1.0, np.max(np.abs(U), axis=0)) * self.us
        return sx, su

    def defects(self, w) -> np.ndarray:
        X, U = self.to_model_units(w)
        c = np.empty((self.N, self.nx))
        for k in range(self.N):
            x1 = self.dyn.propagate(X[k], U[k], self.D[k], self.D[k + 1], self.h)
            c[k] = x1 / self.xs - X[k + 1] / self.xs
        return c.reshape(-1)

    def defects_jac(self, w):
        """Defects, per-interval Jacobian blocks (display units) and the sparse Jacobian."""
        X, U = self.to_model_units(w)
        sx, su = self.fd_steps(w)
        X1, Jx, Ju = self.dyn.propagate_jac(X[:-1], U, self.D, self.h, sx, su)
        X1, Jx, Ju = np.asarray(X1), np.asarray(Jx), np.asarray(Ju)
        c = (X1 - X[1:]) / self.xs
        Jx = Jx * self.xs[None, None, :] / self.xs[None, :, None]
        Ju = Ju * self.us[None, None, :] / self.xs[None, :, None]
        return c.reshape(-1), Jx, Ju, self.assemble_jac(Jx, Ju)

    def assemble_jac(self, Jx, Ju) -> sp.csr_matrix:
        nx, nu, N = self.nx, self.nu, self.N
        rows, cols, vals = [], [], []
        ri = np.repeat(np.arange(nx), nx)
        ci = np.tile(np.arange(nx), nx)
        ru = np.repeat(np.arange(nx), nu)
        cu = np.tile(np.arange(nu), nx)
        for k in range(N):
            r0 = k * nx
            rows.append(r0 + ri)
            cols.append(self.ix(k).start + ci)
            vals.append(Jx[k].reshape(-1))
            rows.append(r0 + ru)
            cols.append(self.iu(k).start + cu)
            vals.append(Ju[k].reshape(-1))
            rows.append(r0 + np.arange(nx))
            cols.append(self.ix(k + 1).start + np.arange(nx))
            vals.append(-np.ones(nx))
        return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                             shape=(N * nx, self.n))

    # -- initial guess -------------------------------------------------------------
    def simulate_nodes(self, U_model: np.ndarray) -> np.ndarray:
        """Forward simulation of an input schedule (model units) to the nodes."""
        X = np.empty((self.N + 1, self.nx))
        X[0] = self.spec.x0
        for k in range(self.N):
            X[k + 1] = self.dyn.propagate(X[k], U_model[k], self.D[k], self.D[k + 1], self.h)
        return X

    def initial_guess(self, U_model: np.ndarray | None = None) -> np.ndarray:
        """Consistent start: inputs clipped into their bounds, states by simulation."""
        if U_model is None:
            U_model = np.zeros((self.N, self.nu))
        U = np.asarray(U_model, dtype=float) / self.us
        U = np.clip(U, self.lb[self.iu(0)], self.ub[self.iu(0)])
        X = self.simulate_nodes(U * self.us)
        return self.from_model_units(X, U * self.us)

    def linear_violation(self, w) -> float:
        v = 0.0
        if self.A_lin.shape[0]:
            a = self.A_lin @ w
            v = max(v, float(np.max(np.maximum(a - self.lin_hi, self.lin_lo - a))))
        v = max(v, float(np.max(np.maximum(w - self.ub, self.lb - w))))
        return max(v, 0.0)


def transcribe(spec: OcpSpec) -> MultipleShootingNLP:
    """Build the multiple-shooting NLP.

    Raises:
        TranscriptionError: terminal bounds contradicting the state
            bounds, or an initial state outside the state bounds.
    """
    nlp = MultipleShootingNLP(spec)
    for name, (lo, hi) in spec.x_bounds.items():
        v = spec.x0[spec.state_names.index(name)]
        if not lo - 1e-12 <= v <= hi + 1e-12:
            raise TranscriptionError(f"initial state {name}={v} violates its bounds [{lo}, {hi}]")
    return nlp
