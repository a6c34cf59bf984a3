"""Pure-Python implementation of the hot kernels.

Mirrors ``_ckernels.pyx`` operation for operation so that both backends
produce the same numbers up to floating point reassociation.  Used when the
compiled extension is missing or ``HERMETIA_PURE_PYTHON=1`` is set.
"""

from __future__ import annotations

import math

import numpy as np

from ._layout import KIND_CLOSED, KIND_OPEN, KIND_PARTIAL, PARAM_INDEX as _I

BACKEND = "python"

_NX = {KIND_CLOSED: 16, KIND_PARTIAL: 8, KIND_OPEN: 8}
_NAN = float("nan")


def _hsat(T, R_v):
    return 610.94 * math.exp(17.625 * T / (T + 243.03)) / (R_v * (T + 273.0))


def _logistic(z):
    if z >= 0.0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def _rhs(kind, x, u, d, p):
    """Right-hand side on plain sequences; returns a list."""
    B_dry, B_wet, T_S, W_med, N_feed, N_exc, B_med, T_med = x[0], x[1], x[2], x[3], x[4], x[5], x[6], x[7]
    T_out, H_out, C_out, O_out = d[0], d[1], d[2], d[3]
    L = p[_I["L_num"]]
    R_v = p[_I["k_R_g"]]
    c_w = p[_I["k_c_water"]]
    h_ew = p[_I["k_h_ew"]]

    if kind == KIND_CLOSED:
        T_air, H_air, C_air, O_air = x[8], x[9], x[10], x[11]
        T_chm, T_hx, W_chm, W_hx = x[12], x[13], x[14], x[15]
        phi_W_u = p[_I["k_W_u"]] * u[4]
        phi_N_u = p[_I["k_N_u"]] * u[5]
    elif kind == KIND_PARTIAL:
        T_air = T_out + u[0]
        H_air = H_out + u[1]
        C_air, O_air = C_out, O_out
        T_chm = T_air
        phi_W_u = u[2]
        phi_N_u = p[_I["k_N_u"]] * u[3]
    else:
        T_air, H_air, C_air, O_air = T_out, H_out, C_out, O_out
        T_chm = T_air
        phi_W_u = u[0]
        phi_N_u = 0.0

    # -- larvae ----------------------------------------------------------
    wpos = W_med if W_med > 0.0 else 0.0
    npos = N_feed if N_feed > 0.0 else 0.0
    W_pct = wpos / (wpos + npos) if wpos + npos > 0.0 else 0.0
    c_floor = p[_I["k_C_floor"]]
    A_air = O_air / (C_air if C_air > c_floor else c_floor)

    t_min, t_opt, t_max = p[_I["rf_T_min"]], p[_I["rf_T_opt"]], p[_I["rf_T_max"]]
    if T_med <= t_min or T_med >= t_max:
        r_T = 0.0
    else:
        r_T = (t_max - T_med) / (t_max - t_opt) * ((T_med - t_min) / (t_opt - t_min)) ** (
            (t_opt - t_min) / (t_max - t_opt)
        )
    r_F = npos / (npos + p[_I["rf_K_feed"]])
    apos = A_air if A_air > 0.0 else 0.0
    r_A = apos / (apos + p[_I["rf_K_air"]])
    r_T_n = r_T / p[_I["k_rmaxT"]]
    prod = r_T_n * (r_F / p[_I["k_rmaxgm"]]) * (r_A / p[_I["k_rmaxA"]])

    TS1, TS2, TS3 = p[_I["k_TS1"]], p[_I["k_TS2"]], p[_I["k_TS3"]]
    steep = p[_I["opt_mat_steep"]]
    if steep > 0.0:
        sw = _logistic(steep * (T_S - TS1)) * _logistic(steep * (TS3 - T_S))
    else:
        sw = 1.0 if TS1 < T_S < TS3 else 0.0

    bpos = B_dry if B_dry > 0.0 else 0.0
    b_half = p[_I["rf_B_half"]]
    r_assim = prod * b_half / (b_half + bpos)
    if p[_I["opt_taper"]] != 0.0:
        if T_S >= TS2:
            r_assim = 0.0
        elif T_S > TS1:
            r_assim *= (TS2 - T_S) / (TS2 - TS1)
    r_mat = sw * prod

    ing = r_assim * p[_I["k_inges"]] * bpos
    excr = p[_I["k_alpha_excr"]] * ing
    assim = p[_I["k_alpha_assim"]] * ing
    eff = ing - excr - assim
    maint = prod * p[_I["k_maint"]] * bpos
    mat = r_mat * p[_I["k_mat"]] * bpos
    dB_dry = eff - maint - mat
    k_W = p[_I["k_W_assim"]]
    w_assim = k_W * assim * W_pct
    w_maint = k_W * maint
    dB_wet = dB_dry + w_assim - w_maint
    dT_S = r_T_n / 3600.0

    N_med = N_feed + N_exc
    phi_Q_bio = L * (p[_I["k_Q_assim"]] * assim + p[_I["k_Q_maint"]] * maint + p[_I["k_Q_mat"]] * mat)
    phi_Q_bio += p[_I["k_Q_bio_rate"]] * (N_med if N_med > 0.0 else 0.0)
    phi_C_bio = 1e-3 * L * (p[_I["k_C_assim"]] * assim + p[_I["k_C_maint"]] * maint + p[_I["k_C_mat"]] * mat)
    phi_C_bio += p[_I["k_C_bio_rate"]] * npos * W_pct
    phi_O_bio = p[_I["k_bio_CO"]] * phi_C_bio
    phi_W_bio = 1e-3 * L * (w_assim - w_maint)
    phi_N_ing = 1e-3 * L * ing
    phi_N_exc = 1e-3 * L * excr
    phi_N_biome = p[_I["k_N_biome"]] * npos

    # -- growing medium --------------------------------------------------
    W_per = p[_I["k_W_per"]]
    if p[_I["opt_eps_cont"]] != 0.0:
        eps = W_pct / W_per
    else:
        eps = p[_I["k_G_W"]] * W_pct
    smooth = p[_I["opt_evap_smooth"]]
    if smooth > 0.0:
        eps = eps + (1.0 - eps) * _logistic((W_pct - W_per) / smooth)
    elif W_pct > W_per:
        eps = 1.0
    g_med = p[_I["k_A_m"]] * p[_I["k_h_med"]]
    gap = _hsat(T_med, R_v) - H_air
    if gap > 0.0:
        evap_med = g_med * eps * gap
        cond_med = 0.0
    else:
        evap_med = 0.0
        cond_med = -g_med * gap
    W_L_med = evap_med - cond_med
    if p[_I["opt_lewis"]] != 0.0:
        h_am = p[_I["k_he_a_m"]] + p[_I["k_hm_a_m"]] * evap_med
    else:
        h_am = p[_I["k_h_a_m"]]
    Q_ma = p[_I["k_A_m"]] * h_am * (T_med - T_air)
    Q_mc = p[_I["k_A_m_c"]] * p[_I["k_U_m_c"]] * (T_med - T_chm)
    Q_L_med = (c_w * (100.0 - T_med) + h_ew) * W_L_med
    C_med = p[_I["k_c_tray"]] * p[_I["k_m_tray"]] + p[_I["k_c_feed"]] * N_feed + c_w * W_med
    if not C_med > 0.0:
        return [_NAN] * _NX[kind]
    dT_med = (phi_Q_bio - Q_ma - Q_mc - Q_L_med) / C_med

    dW_med = phi_W_u - W_L_med - phi_W_bio
    dN_feed = phi_N_u - phi_N_ing - phi_N_biome
    dN_exc = phi_N_exc
    dB_med = dW_med + dN_feed + dN_exc + 1e-3 * L * dB_wet

    if kind != KIND_CLOSED:
        return [dB_dry, dB_wet, dT_S, dW_med, dN_feed, dN_exc, dB_med, dT_med]

    # -- chamber air, walls, heat exchanger ------------------------------
    V = p[_I["k_V_chm"]]
    cr = p[_I["k_c_air"]] * p[_I["k_rho_air"]]
    V_u = p[_I["k_Vdot_u"]] * u[0]
    V_leak = p[_I["k_Vdot_leak"]]
    V_door = p[_I["k_Vdot_door"]] * u[1]
    V_tot = V_u + V_leak + V_door

    Q_exch_all = cr * V_tot * (T_out - T_air)
    Q_led = p[_I["k_heat_1"]] * u[8] + p[_I["k_heat_2"]] * u[9] + p[_I["k_heat_3"]] * u[10] + p[_I["k_heat_4"]] * u[11]
    Q_hxa = p[_I["k_A_hx"]] * p[_I["k_h_a_hx"]] * (T_hx - T_air)
    Q_ac = p[_I["k_A_c"]] * p[_I["k_h_a_c"]] * (T_chm - T_air)
    C_air_cap = cr * V + p[_I["k_c_vap"]] * V * H_air
    if not C_air_cap > 0.0:
        return [_NAN] * 16
    dT_air = (Q_led + Q_hxa + Q_exch_all + Q_ma + Q_ac) / C_air_cap

    W_hold = p[_I["k_W_hold"]]
    k_run = p[_I["k_runoff"]]

    g_chm = p[_I["k_A_c"]] * p[_I["k_h_chm"]]
    gap = _hsat(T_chm, R_v) - H_air
    if gap > 0.0:
        eps_f = 0.0 if W_chm <= 0.0 else (1.0 if W_chm >= W_hold else W_chm / W_hold)
        W_L_chm = g_chm * eps_f * gap
    else:
        W_L_chm = g_chm * gap
    g_hx = p[_I["k_A_hx"]] * p[_I["k_h_hx"]]
    gap = _hsat(T_hx, R_v) - H_air
    if gap > 0.0:
        eps_f = 0.0 if W_hx <= 0.0 else (1.0 if W_hx >= W_hold else W_hx / W_hold)
        W_L_hx = g_hx * eps_f * gap
    else:
        W_L_hx = g_hx * gap
    run_chm = k_run * (W_chm - W_hold) if W_chm > W_hold else 0.0
    run_hx = k_run * (W_hx - W_hold) if W_hx > W_hold else 0.0

    H_u = p[_I["k_H_u"]] * u[3]
    dH_air = (H_u + V_tot * (H_out - H_air) + W_L_med + W_L_chm + W_L_hx) / V
    dC_air = (V_tot * (C_out - C_air) + phi_C_bio) / V
    dO_air = (V_tot * (O_out - O_air) - phi_O_bio) / V

    if p[_I["opt_tec_kelvin"]] != 0.0:
        T_s = T_air + 273.15
    else:
        T_s = T_air
    R_q = p[_I["k_R_q"]]
    V_max = p[_I["k_V_max"]]
    u_T = u[2]
    Q_tec = p[_I["k_alpha_q"]] * u_T * V_max / R_q * T_s + u_T * V_max * V_max / (2.0 * R_q)
    Q_tec += p[_I["k_TEC"]] * (T_out - T_air)
    Q_chx = p[_I["k_A_hx_c"]] * p[_I["k_U_hx_c"]] * (T_hx - T_chm)
    Q_L_hx = (c_w * (100.0 - T_hx) + h_ew) * W_L_hx
    dT_hx = (Q_tec - Q_hxa - Q_chx - Q_L_hx) / p[_I["k_C_hx"]]

    Q_co = p[_I["k_A_c"]] * p[_I["k_h_o_c"]] * (T_out - T_chm)
    Q_L_chm = (c_w * (100.0 - T_chm) + h_ew) * W_L_chm
    C_chm = p[_I["k_c_chm"]] * p[_I["k_m_chm"]] + c_w * W_chm
    if not C_chm > 0.0:
        return [_NAN] * 16
    dT_chm = (-Q_ac + Q_co + Q_chx + Q_mc - Q_L_chm) / C_chm

    dW_chm = -W_L_chm - run_chm
    dW_hx = -W_L_hx - run_hx

    return [
        dB_dry, dB_wet, dT_S, dW_med, dN_feed, dN_exc, dB_med, dT_med,
        dT_air, dH_air, dC_air, dO_air, dT_chm, dT_hx, dW_chm, dW_hx,
    ]


def rhs(kind, x, u, d, p):
    """Time derivative of the state as a float array."""
    return np.array(_rhs(int(kind), _seq(x), _seq(u), _seq(d), _seq(p)), dtype=float)


def _seq(a):
    return a.tolist() if isinstance(a, np.ndarray) else list(a)


def _rk4(kind, x, u, d0, d1, h_total, nsteps, p, record=None):
    n = len(x)
    h = h_total / nsteps
    nd = len(d0)
    x = list(x)
    if record is not None:
        record.append(list(x))
    for k in range(nsteps):
        s0 = k / nsteps
        sm = (k + 0.5) / nsteps
        s1 = (k + 1.0) / nsteps
        da = [d0[j] + s0 * (d1[j] - d0[j]) for j in range(nd)]
        dm = [d0[j] + sm * (d1[j] - d0[j]) for j in range(nd)]
        db = [d0[j] + s1 * (d1[j] - d0[j]) for j in range(nd)]
        k1 = _rhs(kind, x, u, da, p)
        x2 = [x[i] + 0.5 * h * k1[i] for i in range(n)]
        k2 = _rhs(kind, x2, u, dm, p)
        x3 = [x[i] + 0.5 * h * k2[i] for i in range(n)]
        k3 = _rhs(kind, x3, u, dm, p)
        x4 = [x[i] + h * k3[i] for i in range(n)]
        k4 = _rhs(kind, x4, u, db, p)
        x = [x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) for i in range(n)]
        if record is not None:
            record.append(list(x))
        if not all(math.isfinite(v) for v in x):
            break
    return x


def propagate(kind, x0, u, d0, d1, h_total, nsteps, p):
    """RK4 over one hold interval; disturbances interpolated linearly from d0 to d1."""
    return np.array(_rk4(int(kind), _seq(x0), _seq(u), _seq(d0), _seq(d1), float(h_total), int(nsteps), _seq(p)))


def propagate_record(kind, x0, u, d0, d1, h_total, nsteps, p):
    """Like :func:`propagate` but returns all ``nsteps + 1`` sub-step states."""
    rec = []
    _rk4(int(kind), _seq(x0), _seq(u), _seq(d0), _seq(d1), float(h_total), int(nsteps), _seq(p), rec)
    out = np.full((int(nsteps) + 1, len(x0)), np.nan)
    out[: len(rec)] = rec
    return out


def propagate_many(kind, X0, U, D, h_total, nsteps, p):
    """Propagate every shooting interval ``k`` from ``X0[k]`` with ``U[k]``, ``D[k]..D[k+1]``."""
    X0 = np.asarray(X0, dtype=float)
    out = np.empty_like(X0)
    pl = _seq(p)
    for k in range(X0.shape[0]):
        out[k] = _rk4(int(kind), X0[k].tolist(), _seq(U[k]), _seq(D[k]), _seq(D[k + 1]), float(h_total), int(nsteps), pl)
    return out


def propagate_jac_many(kind, X0, U, D, h_total, nsteps, p, sx, su):
    """End states and forward-difference Jacobians of every interval map.

    ``sx`` and ``su`` are the perturbation sizes per state and input.

    Returns:
        ``(X1, Jx, Ju)`` with shapes ``(N, nx)``, ``(N, nx, nx)``, ``(N, nx, nu)``.
    """
    X0 = np.asarray(X0, dtype=float)
    U = np.asarray(U, dtype=float)
    N, nx = X0.shape
    nu = U.shape[1]
    X1 = np.empty((N, nx))
    Jx = np.empty((N, nx, nx))
    Ju = np.empty((N, nx, nu))
    pl = _seq(p)
    kind = int(kind)
    for k in range(N):
        x = X0[k].tolist()
        uk = U[k].tolist()
        da, db = _seq(D[k]), _seq(D[k + 1])
        base = _rk4(kind, x, uk, da, db, float(h_total), int(nsteps), pl)
        X1[k] = base
        for j in range(nx):
            xp = list(x)
            xp[j] += sx[j]
            col = _rk4(kind, xp, uk, da, db, float(h_total), int(nsteps), pl)
            Jx[k, :, j] = [(c - b) / sx[j] for c, b in zip(col, base)]
        for j in range(nu):
            up = list(uk)
            up[j] += su[j]
            col = _rk4(kind, x, up, da, db, float(h_total), int(nsteps), pl)
            Ju[k, :, j] = [(c - b) / su[j] for c, b in zip(col, base)]
    return X1, Jx, Ju
