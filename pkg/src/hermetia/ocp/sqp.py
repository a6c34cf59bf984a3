"""Sequential quadratic programming for the multiple-shooting NLP.

The Hessian of the Lagrangian is the exact quadratic objective term plus a
damped BFGS approximation per shooting interval (the defect of interval k
depends only on ``(x_k, u_k)``).  QP subproblems are solved with Clarabel;
globalisation is an l1 merit function with Armijo backtracking.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import clarabel
import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .problem import MultipleShootingNLP

__all__ = ["SqpOptions", "OcpSolution", "solve"]

log = logging.getLogger(__name__)


@dataclass
class SqpOptions:
    max_iter: int = 150
    feas_tol: float = 1e-6
    step_tol: float = 1e-6
    opt_tol: float = 1e-10
    armijo: float = 1e-4
    max_backtracks: int = 25
    bfgs_init: float = 1e-2
    trust_radius: float | None = 4.0
    min_radius: float = 1e-6
    time_limit: float | None = None
    verbose: bool = False


@dataclass
class OcpSolution:
    """Result of :func:`solve`; arrays are in model units."""

    t: np.ndarray
    x: np.ndarray
    u: np.ndarray
    objective: float
    terms: dict
    status: str
    iterations: int
    violation: float
    history: list = field(default_factory=list, repr=False)
    w: np.ndarray | None = field(default=None, repr=False)
    nlp: MultipleShootingNLP | None = field(default=None, repr=False)

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    def column(self, name: str) -> np.ndarray:
        spec = self.nlp.spec
        if name in spec.state_names:
            return self.x[:, spec.state_names.index(name)]
        return self.u[:, spec.input_names.index(name)]


class _BlockBfgs:
    """Damped BFGS approximations of the per-interval Lagrangian Hessians."""

    def __init__(self, N: int, m: int, init: float):
        self.init = init
        self.B = np.tile(np.eye(m) * init, (N, 1, 1))

    def reset(self):
        self.B[:] = np.eye(self.B.shape[1]) * self.init

    def update(self, S: np.ndarray, Y: np.ndarray):
        for k in range(self.B.shape[0]):
            s, y, B = S[k], Y[k], self.B[k]
            ss = s @ s
            if ss < 1e-24:
                continue
            Bs = B @ s
            sBs = s @ Bs
            if sBs <= 1e-16 * ss:
                continue
            sy = s @ y
            theta = 1.0 if sy >= 0.2 * sBs else 0.8 * sBs / (sBs - sy)
            r = theta * y + (1.0 - theta) * Bs
            self.B[k] = B - np.outer(Bs, Bs) / sBs + np.outer(r, r) / (s @ r)

    def matrix(self, nlp: MultipleShootingNLP) -> sp.csc_matrix:
        # the last node carries no defect of its own
        return sp.block_diag(list(self.B) + [sp.csc_matrix((nlp.nx, nlp.nx))], format="csc")


def _lagrangian_block_grads(Jx, Ju, lam, nx):
    L = lam.reshape(-1, nx)
    gx = np.einsum("kij,ki->kj", Jx, L)
    gu = np.einsum("kij,ki->kj", Ju, L)
    return np.hstack([gx, gu])


def _solve_qp(nlp, H, g, c, J, gin, Gin, w, elastic: float | None = None, radius: float | None = None):
    """QP step, optionally inside the box ``|p| <= radius``. Returns (p, lam_eq, lam_in, ok)."""
    n = nlp.n
    fixed = nlp.lb == nlp.ub
    idx_f = np.flatnonzero(fixed)
    p_hi = nlp.ub - w
    p_lo = nlp.lb - w
    if radius is not None:
        p_hi = np.minimum(p_hi, radius)
        p_lo = np.maximum(p_lo, -radius)
    up = np.flatnonzero(~fixed & np.isfinite(p_hi))
    lo = np.flatnonzero(~fixed & np.isfinite(p_lo))
    I = sp.identity(n, format="csr")
    m_eq = J.shape[0]

    blocks_eq = [J, I[idx_f]]
    b_eq = [-c, nlp.lb[idx_f] - w[idx_f]]
    blocks_in = [I[up], -I[lo]]
    b_in = [p_hi[up], -p_lo[lo]]
    if nlp.A_lin.shape[0]:
        a = nlp.A_lin @ w
        blocks_in += [nlp.A_lin, -nlp.A_lin]
        b_in += [nlp.lin_hi - a, a - nlp.lin_lo]
    m_in_nl = Gin.shape[0]
    if m_in_nl:
        blocks_in.append(Gin)
        b_in.append(-gin)

    P = H
    q = g
    if elastic is not None:
        # slacks t+ and t- on the defects, penalised linearly
        ne = m_eq
        nt = 2 * ne
        blocks_eq = [sp.hstack([J, sp.identity(ne), -sp.identity(ne)])] + [sp.hstack([b, sp.csr_matrix((b.shape[0], nt))]) for b in blocks_eq[1:]]
        blocks_in = [sp.hstack([b, sp.csr_matrix((b.shape[0], nt))]) for b in blocks_in]
        blocks_in.append(sp.hstack([sp.csr_matrix((nt, n)), -sp.identity(nt)]))
        b_in.append(np.zeros(nt))
        P = sp.block_diag([H, sp.csc_matrix((nt, nt))])
        q = np.concatenate([g, np.full(nt, elastic)])
    A = sp.vstack(blocks_eq + blocks_in, format="csc")
    b = np.concatenate(b_eq + b_in)
    n_eq_rows = sum(x.shape[0] for x in blocks_eq)
    cones = [clarabel.ZeroConeT(n_eq_rows), clarabel.NonnegativeConeT(A.shape[0] - n_eq_rows)]
    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.max_iter = 200
    settings.tol_gap_abs = settings.tol_gap_rel = 1e-10
    settings.tol_feas = 1e-10
    solver = clarabel.DefaultSolver(sp.triu(P, format="csc"), q, A, b, cones, settings)
    sol = solver.solve()
    status = str(sol.status)
    ok = status.endswith("Solved") or status.endswith("AlmostSolved")
    x = np.asarray(sol.x)
    z = np.asarray(sol.z)
    p = x[:n]
    lam_eq = z[:m_eq]
    lam_in = z[A.shape[0] - m_in_nl:] if m_in_nl else np.zeros(0)
    if elastic is None and ok and not np.all(np.isfinite(p)):
        ok = False
    return p, lam_eq, lam_in, ok


def _soc_point(nlp, J, wt, ct):
    """``wt`` moved by the least-norm step that removes the linearised defect ``ct``."""
    free = nlp.lb != nlp.ub
    Jf = J[:, free]
    try:
        y = spla.spsolve((Jf @ Jf.T).tocsc(), -ct)
    except RuntimeError:
        return None
    if not np.all(np.isfinite(y)):
        return None
    ws = wt.copy()
    ws[free] += Jf.T @ y
    return np.clip(ws, nlp.lb, nlp.ub)


def _merit(f, c, gin, nu):
    return f + nu * (np.sum(np.abs(c)) + np.sum(np.maximum(gin, 0.0)))


def solve(nlp: MultipleShootingNLP, options: SqpOptions | None = None, w0: np.ndarray | None = None) -> OcpSolution:
    """Solve the NLP from ``w0`` (default: zero inputs, simulated states).

    The returned iterate is the best one found that satisfies all
    constraints to ``feas_tol``; without any such iterate the last one is
    returned with status ``"infeasible"``.
    """
    opt = options or SqpOptions()
    t_start = time.perf_counter()
    # boxes hold at every iterate, so the merit function only sees defects
    w = np.clip(nlp.initial_guess() if w0 is None else np.asarray(w0, dtype=float), nlp.lb, nlp.ub)
    bfgs = _BlockBfgs(nlp.N, nlp.nx + nlp.nu, opt.bfgs_init)
    Hq = nlp.Q
    nu_pen = 1.0
    radius = opt.trust_radius
    history = []
    best = None
    status = "max_iter"

    c, Jx, Ju, J = nlp.defects_jac(w)
    gin, Gin = nlp.ineq(w)
    f = nlp.objective(w)
    it = 0
    for it in range(1, opt.max_iter + 1):
        viol = max(float(np.max(np.abs(c))) if c.size else 0.0, float(np.max(gin, initial=0.0)),
                   nlp.linear_violation(w))
        if viol <= opt.feas_tol and (best is None or f < best[1]):
            best = (w.copy(), f, viol)
        g = nlp.gradient(w)
        H = (Hq + bfgs.matrix(nlp)).tocsc()
        p, lam, lam_in, ok = _solve_qp(nlp, H, g, c, J, gin, Gin, w, radius=radius)
        if not ok:
            p, lam, lam_in, ok = _solve_qp(nlp, H, g, c, J, gin, Gin, w, elastic=10.0 * nu_pen + 1.0,
                                           radius=radius)
            if not ok:
                status = "qp_failed"
                break
        lam_max = max(float(np.max(np.abs(lam), initial=0.0)), float(np.max(np.abs(lam_in), initial=0.0)))
        nu_target = 1.5 * lam_max + 1e-3
        if nu_pen < 1.1 * lam_max:
            nu_pen = nu_target
        elif nu_pen > 10.0 * nu_target:
            # a penalty far above the multipliers only blocks progress
            nu_pen = max(0.5 * nu_pen, nu_target)
        phi0 = _merit(f, c, gin, nu_pen)
        dphi = float(g @ p + 0.5 * p @ (H @ p)) - nu_pen * (np.sum(np.abs(c)) + np.sum(np.maximum(gin, 0.0)))
        dphi = min(dphi, float(g @ p) - nu_pen * (np.sum(np.abs(c)) + np.sum(np.maximum(gin, 0.0))))
        step_inf = float(np.max(np.abs(p))) if p.size else 0.0
        at_radius = radius is not None and step_inf >= 0.99 * radius
        history.append({"iter": it, "f": f, "violation": viol, "step": step_inf, "merit": phi0, "dphi": dphi, "penalty": nu_pen,
                        "radius": radius, "time": time.perf_counter() - t_start})
        if opt.verbose:
            log.info("sqp %3d f=%.8g viol=%.2e step=%.2e nu=%.3g", it, f, viol, step_inf, nu_pen)
        if viol <= opt.feas_tol and not at_radius and (step_inf <= opt.step_tol * (1.0 + np.max(np.abs(w)))
                                                       or abs(dphi) <= opt.opt_tol * (1.0 + abs(f))):
            status = "converged"
            break
        alpha = 1.0
        accepted = False
        for i_ls in range(opt.max_backtracks):
            wt = w + alpha * p
            ct = nlp.defects(wt)
            gt, _ = nlp.ineq(wt, jac=False)
            ft = nlp.objective(wt)
            if np.all(np.isfinite(ct)) and _merit(ft, ct, gt, nu_pen) <= phi0 + opt.armijo * alpha * dphi:
                accepted = True
                break
            if i_ls == 0 and np.all(np.isfinite(ct)):
                # second-order correction against the Maratos effect
                ws = _soc_point(nlp, J, wt, ct)
                if ws is not None:
                    cs = nlp.defects(ws)
                    gs, _ = nlp.ineq(ws, jac=False)
                    fs = nlp.objective(ws)
                    if np.all(np.isfinite(cs)) and _merit(fs, cs, gs, nu_pen) <= phi0 + opt.armijo * dphi:
                        wt, accepted = ws, True
                        break
            alpha *= 0.5
        if not accepted:
            if radius is not None and radius > opt.min_radius:
                radius = max(0.1 * step_inf, opt.min_radius)
                continue
            if np.allclose(bfgs.B, bfgs.init * np.eye(bfgs.B.shape[1])):
                status = "line_search_failed"
                break
            bfgs.reset()
            continue
        history[-1]["alpha"] = alpha
        if radius is not None:
            # grow after full steps that hit the radius, shrink to the accepted length otherwise
            if alpha == 1.0 and at_radius:
                radius *= 2.0
            elif alpha < 1.0:
                # a tiny accepted fraction says little about the model; cap the cut at 10x
                radius = max(alpha * step_inf, 0.1 * step_inf, opt.min_radius)
        w_new = wt
        c_new, Jx_new, Ju_new, J_new = nlp.defects_jac(w_new)
        # curvature pairs of the defect part of the Lagrangian, per interval
        gold = _lagrangian_block_grads(Jx, Ju, lam, nlp.nx)
        gnew = _lagrangian_block_grads(Jx_new, Ju_new, lam, nlp.nx)
        m = nlp.nx + nlp.nu
        S = (w_new - w)[: nlp.N * m].reshape(nlp.N, m)
        bfgs.update(S, gnew - gold)
        w, c, Jx, Ju, J = w_new, c_new, Jx_new, Ju_new, J_new
        gin, Gin = nlp.ineq(w)
        f = nlp.objective(w)
        if opt.time_limit is not None and time.perf_counter() - t_start > opt.time_limit:
            status = "time_limit"
            break

    viol = max(float(np.max(np.abs(c))) if c.size else 0.0, float(np.max(gin, initial=0.0)), nlp.linear_violation(w))
    if viol <= opt.feas_tol and (best is None or f <= best[1]):
        best = (w.copy(), f, viol)
    if best is None:
        w_out, v_out = w, viol
        if status != "converged":
            status = "infeasible" if status == "max_iter" else status
    else:
        w_out, _, v_out = best
    X, U = nlp.to_model_units(w_out)
    return OcpSolution(
        t=nlp.times.copy(), x=X, u=U, objective=nlp.objective(w_out), terms=nlp.objective_terms(w_out),
        status=status, iterations=it, violation=v_out, history=history, w=w_out, nlp=nlp,
    )
