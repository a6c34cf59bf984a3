# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled right-hand sides and RK4 propagators.

Operation-for-operation twin of ``_fallback.py``.  The parameter struct and
``PARAM_NAMES`` below follow ``_layout.PARAM_NAMES``.
"""

import numpy as np
from libc.math cimport exp, pow, isfinite, NAN

BACKEND = "cython"


cdef enum:
    KIND_CLOSED = 0
    KIND_PARTIAL = 1
    KIND_OPEN = 2

cdef struct Par:
    double k_inges
    double k_mat
    double k_maint
    double k_alpha_excr
    double k_alpha_assim
    double k_TS1
    double k_TS2
    double k_TS3
    double k_Q_assim
    double k_Q_mat
    double k_Q_maint
    double k_Q_bio_rate
    double k_W_assim
    double k_C_assim
    double k_C_mat
    double k_C_maint
    double k_C_bio_rate
    double k_bio_CO
    double k_N_biome
    double k_V_chm
    double k_A_c
    double k_A_m
    double k_A_hx
    double k_h_a_c
    double k_h_a_m
    double k_h_a_hx
    double k_h_o_c
    double k_he_a_m
    double k_hm_a_m
    double k_A_hx_c
    double k_A_m_c
    double k_U_hx_c
    double k_U_m_c
    double k_c_air
    double k_rho_air
    double k_Vdot_u
    double k_Vdot_leak
    double k_Vdot_door
    double k_alpha_q
    double k_V_max
    double k_R_q
    double k_TEC
    double k_c_water
    double k_h_ew
    double k_c_tray
    double k_m_tray
    double k_c_feed
    double k_c_vap
    double k_c_chm
    double k_R_g
    double k_G_W
    double k_W_per
    double k_W_u
    double k_m_chm
    double k_C_hx
    double k_h_med
    double k_h_chm
    double k_h_hx
    double k_heat_1
    double k_heat_2
    double k_heat_3
    double k_heat_4
    double k_H_u
    double k_N_u
    double k_W_hold
    double k_runoff
    double k_C_floor
    double rf_T_min
    double rf_T_opt
    double rf_T_max
    double rf_K_feed
    double rf_K_air
    double rf_B_half
    double k_rmaxT
    double k_rmaxgm
    double k_rmaxA
    double L_num
    double opt_tec_kelvin
    double opt_taper
    double opt_mat_steep
    double opt_eps_cont
    double opt_lewis
    double opt_evap_smooth


cdef inline void _load(const double* p, Par* P) noexcept nogil:
    P.k_inges = p[0]
    P.k_mat = p[1]
    P.k_maint = p[2]
    P.k_alpha_excr = p[3]
    P.k_alpha_assim = p[4]
    P.k_TS1 = p[5]
    P.k_TS2 = p[6]
    P.k_TS3 = p[7]
    P.k_Q_assim = p[8]
    P.k_Q_mat = p[9]
    P.k_Q_maint = p[10]
    P.k_Q_bio_rate = p[11]
    P.k_W_assim = p[12]
    P.k_C_assim = p[13]
    P.k_C_mat = p[14]
    P.k_C_maint = p[15]
    P.k_C_bio_rate = p[16]
    P.k_bio_CO = p[17]
    P.k_N_biome = p[18]
    P.k_V_chm = p[19]
    P.k_A_c = p[20]
    P.k_A_m = p[21]
    P.k_A_hx = p[22]
    P.k_h_a_c = p[23]
    P.k_h_a_m = p[24]
    P.k_h_a_hx = p[25]
    P.k_h_o_c = p[26]
    P.k_he_a_m = p[27]
    P.k_hm_a_m = p[28]
    P.k_A_hx_c = p[29]
    P.k_A_m_c = p[30]
    P.k_U_hx_c = p[31]
    P.k_U_m_c = p[32]
    P.k_c_air = p[33]
    P.k_rho_air = p[34]
    P.k_Vdot_u = p[35]
    P.k_Vdot_leak = p[36]
    P.k_Vdot_door = p[37]
    P.k_alpha_q = p[38]
    P.k_V_max = p[39]
    P.k_R_q = p[40]
    P.k_TEC = p[41]
    P.k_c_water = p[42]
    P.k_h_ew = p[43]
    P.k_c_tray = p[44]
    P.k_m_tray = p[45]
    P.k_c_feed = p[46]
    P.k_c_vap = p[47]
    P.k_c_chm = p[48]
    P.k_R_g = p[49]
    P.k_G_W = p[50]
    P.k_W_per = p[51]
    P.k_W_u = p[52]
    P.k_m_chm = p[53]
    P.k_C_hx = p[54]
    P.k_h_med = p[55]
    P.k_h_chm = p[56]
    P.k_h_hx = p[57]
    P.k_heat_1 = p[58]
    P.k_heat_2 = p[59]
    P.k_heat_3 = p[60]
    P.k_heat_4 = p[61]
    P.k_H_u = p[62]
    P.k_N_u = p[63]
    P.k_W_hold = p[64]
    P.k_runoff = p[65]
    P.k_C_floor = p[66]
    P.rf_T_min = p[67]
    P.rf_T_opt = p[68]
    P.rf_T_max = p[69]
    P.rf_K_feed = p[70]
    P.rf_K_air = p[71]
    P.rf_B_half = p[72]
    P.k_rmaxT = p[73]
    P.k_rmaxgm = p[74]
    P.k_rmaxA = p[75]
    P.L_num = p[76]
    P.opt_tec_kelvin = p[77]
    P.opt_taper = p[78]
    P.opt_mat_steep = p[79]
    P.opt_eps_cont = p[80]
    P.opt_lewis = p[81]
    P.opt_evap_smooth = p[82]


PARAM_NAMES = (
    "k_inges",
    "k_mat",
    "k_maint",
    "k_alpha_excr",
    "k_alpha_assim",
    "k_TS1",
    "k_TS2",
    "k_TS3",
    "k_Q_assim",
    "k_Q_mat",
    "k_Q_maint",
    "k_Q_bio_rate",
    "k_W_assim",
    "k_C_assim",
    "k_C_mat",
    "k_C_maint",
    "k_C_bio_rate",
    "k_bio_CO",
    "k_N_biome",
    "k_V_chm",
    "k_A_c",
    "k_A_m",
    "k_A_hx",
    "k_h_a_c",
    "k_h_a_m",
    "k_h_a_hx",
    "k_h_o_c",
    "k_he_a_m",
    "k_hm_a_m",
    "k_A_hx_c",
    "k_A_m_c",
    "k_U_hx_c",
    "k_U_m_c",
    "k_c_air",
    "k_rho_air",
    "k_Vdot_u",
    "k_Vdot_leak",
    "k_Vdot_door",
    "k_alpha_q",
    "k_V_max",
    "k_R_q",
    "k_TEC",
    "k_c_water",
    "k_h_ew",
    "k_c_tray",
    "k_m_tray",
    "k_c_feed",
    "k_c_vap",
    "k_c_chm",
    "k_R_g",
    "k_G_W",
    "k_W_per",
    "k_W_u",
    "k_m_chm",
    "k_C_hx",
    "k_h_med",
    "k_h_chm",
    "k_h_hx",
    "k_heat_1",
    "k_heat_2",
    "k_heat_3",
    "k_heat_4",
    "k_H_u",
    "k_N_u",
    "k_W_hold",
    "k_runoff",
    "k_C_floor",
    "rf_T_min",
    "rf_T_opt",
    "rf_T_max",
    "rf_K_feed",
    "rf_K_air",
    "rf_B_half",
    "k_rmaxT",
    "k_rmaxgm",
    "k_rmaxA",
    "L_num",
    "opt_tec_kelvin",
    "opt_taper",
    "opt_mat_steep",
    "opt_eps_cont",
    "opt_lewis",
    "opt_evap_smooth",
)
N_PARAMS = len(PARAM_NAMES)


# -- right-hand side ----------------------------------------------------------

cdef inline double _hsat(double T, double R_v) noexcept nogil:
    return 610.94 * exp(17.625 * T / (T + 243.03)) / (R_v * (T + 273.0))


cdef inline double _logistic(double z) noexcept nogil:
    cdef double e
    if z >= 0.0:
        return 1.0 / (1.0 + exp(-z))
    e = exp(z)
    return e / (1.0 + e)


cdef inline double _pos(double v) noexcept nogil:
    return v if v > 0.0 else 0.0


cdef void _rhs(int kind, const double* x, const double* u, const double* d,
               const Par* P, double* dx) noexcept nogil:
    cdef int i, nx = 16 if kind == KIND_CLOSED else 8
    cdef double B_dry = x[0], T_S = x[2], W_med = x[3], N_feed = x[4], N_exc = x[5], T_med = x[7]
    cdef double T_out = d[0], H_out = d[1], C_out = d[2], O_out = d[3]
    cdef double L = P.L_num, R_v = P.k_R_g, c_w = P.k_c_water, h_ew = P.k_h_ew
    cdef double T_air, H_air, C_air, O_air, T_chm = 0.0, T_hx = 0.0, W_chm = 0.0, W_hx = 0.0
    cdef double phi_W_u, phi_N_u
    cdef double wpos, npos, W_pct, A_air, apos, bpos, r_T, r_F, r_A, r_T_n, prod, sw, r_assim, r_mat
    cdef double ing, excr, assim, eff, maint, mat, dB_dry, w_assim, w_maint, dB_wet, N_med
    cdef double phi_Q_bio, phi_C_bio, phi_O_bio, phi_W_bio, phi_N_ing, phi_N_exc, phi_N_biome
    cdef double eps, g_med, gap, evap_med, cond_med, W_L_med, h_am, Q_ma, Q_mc, Q_L_med, C_med
    cdef double dW_med, dN_feed, dN_exc
    cdef double V, cr, V_tot, Q_led, Q_hxa, Q_ac, C_air_cap, eps_f, g, W_L_chm, W_L_hx
    cdef double run_chm, run_hx, T_s, Q_tec, Q_chx, Q_L_hx, Q_co, Q_L_chm, C_chm
    cdef double nan = NAN

    if kind == KIND_CLOSED:
        T_air = x[8]; H_air = x[9]; C_air = x[10]; O_air = x[11]
        T_chm = x[12]; T_hx = x[13]; W_chm = x[14]; W_hx = x[15]
        phi_W_u = P.k_W_u * u[4]
        phi_N_u = P.k_N_u * u[5]
    elif kind == KIND_PARTIAL:
        T_air = T_out + u[0]; H_air = H_out + u[1]; C_air = C_out; O_air = O_out
        T_chm = T_air
        phi_W_u = u[2]
        phi_N_u = P.k_N_u * u[3]
    else:
        T_air = T_out; H_air = H_out; C_air = C_out; O_air = O_out
        T_chm = T_air
        phi_W_u = u[0]
        phi_N_u = 0.0

    # larvae
    wpos = _pos(W_med)
    npos = _pos(N_feed)
    W_pct = wpos / (wpos + npos) if wpos + npos > 0.0 else 0.0
    A_air = O_air / (C_air if C_air > P.k_C_floor else P.k_C_floor)
    if T_med <= P.rf_T_min or T_med >= P.rf_T_max:
        r_T = 0.0
    else:
        r_T = (P.rf_T_max - T_med) / (P.rf_T_max - P.rf_T_opt) * pow(
            (T_med - P.rf_T_min) / (P.rf_T_opt - P.rf_T_min),
            (P.rf_T_opt - P.rf_T_min) / (P.rf_T_max - P.rf_T_opt))
    r_F = npos / (npos + P.rf_K_feed)
    apos = _pos(A_air)
    r_A = apos / (apos + P.rf_K_air)
    r_T_n = r_T / P.k_rmaxT
    prod = r_T_n * (r_F / P.k_rmaxgm) * (r_A / P.k_rmaxA)
    if P.opt_mat_steep > 0.0:
        sw = _logistic(P.opt_mat_steep * (T_S - P.k_TS1)) * _logistic(P.opt_mat_steep * (P.k_TS3 - T_S))
    else:
        sw = 1.0 if (P.k_TS1 < T_S and T_S < P.k_TS3) else 0.0
    bpos = _pos(B_dry)
    r_assim = prod * P.rf_B_half / (P.rf_B_half + bpos)
    if P.opt_taper != 0.0:
        if T_S >= P.k_TS2:
            r_assim = 0.0
        elif T_S > P.k_TS1:
            r_assim *= (P.k_TS2 - T_S) / (P.k_TS2 - P.k_TS1)
    r_mat = sw * prod

    ing = r_assim * P.k_inges * bpos
    excr = P.k_alpha_excr * ing
    assim = P.k_alpha_assim * ing
    eff = ing - excr - assim
    maint = prod * P.k_maint * bpos
    mat = r_mat * P.k_mat * bpos
    dB_dry = eff - maint - mat
    w_assim = P.k_W_assim * assim * W_pct
    w_maint = P.k_W_assim * maint
    dB_wet = dB_dry + w_assim - w_maint

    N_med = N_feed + N_exc
    phi_Q_bio = L * (P.k_Q_assim * assim + P.k_Q_maint * maint + P.k_Q_mat * mat)
    phi_Q_bio += P.k_Q_bio_rate * _pos(N_med)
    phi_C_bio = 1e-3 * L * (P.k_C_assim * assim + P.k_C_maint * maint + P.k_C_mat * mat)
    phi_C_bio += P.k_C_bio_rate * npos * W_pct
    phi_O_bio = P.k_bio_CO * phi_C_bio
    phi_W_bio = 1e-3 * L * (w_assim - w_maint)
    phi_N_ing = 1e-3 * L * ing
    phi_N_exc = 1e-3 * L * excr
    phi_N_biome = P.k_N_biome * npos

    # growing medium
    if P.opt_eps_cont != 0.0:
        eps = W_pct / P.k_W_per
    else:
        eps = P.k_G_W * W_pct
    if P.opt_evap_smooth > 0.0:
        eps = eps + (1.0 - eps) * _logistic((W_pct - P.k_W_per) / P.opt_evap_smooth)
    elif W_pct > P.k_W_per:
        eps = 1.0
    g_med = P.k_A_m * P.k_h_med
    gap = _hsat(T_med, R_v) - H_air
    if gap > 0.0:
        evap_med = g_med * eps * gap
        cond_med = 0.0
    else:
        evap_med = 0.0
        cond_med = -g_med * gap
    W_L_med = evap_med - cond_med
    if P.opt_lewis != 0.0:
        h_am = P.k_he_a_m + P.k_hm_a_m * evap_med
    else:
        h_am = P.k_h_a_m
    Q_ma = P.k_A_m * h_am * (T_med - T_air)
    Q_mc = P.k_A_m_c * P.k_U_m_c * (T_med - T_chm)
    Q_L_med = (c_w * (100.0 - T_med) + h_ew) * W_L_med
    C_med = P.k_c_tray * P.k_m_tray + P.k_c_feed * N_feed + c_w * W_med
    if not C_med > 0.0:
        for i in range(nx):
            dx[i] = nan
        return

    dW_med = phi_W_u - W_L_med - phi_W_bio
    dN_feed = phi_N_u - phi_N_ing - phi_N_biome
    dN_exc = phi_N_exc
    dx[0] = dB_dry
    dx[1] = dB_wet
    dx[2] = r_T_n / 3600.0
    dx[3] = dW_med
    dx[4] = dN_feed
    dx[5] = dN_exc
    dx[6] = dW_med + dN_feed + dN_exc + 1e-3 * L * dB_wet
    dx[7] = (phi_Q_bio - Q_ma - Q_mc - Q_L_med) / C_med
    if kind != KIND_CLOSED:
        return

    # chamber air, walls, heat exchanger
    V = P.k_V_chm
    cr = P.k_c_air * P.k_rho_air
    V_tot = P.k_Vdot_u * u[0] + P.k_Vdot_leak + P.k_Vdot_door * u[1]
    Q_led = P.k_heat_1 * u[8] + P.k_heat_2 * u[9] + P.k_heat_3 * u[10] + P.k_heat_4 * u[11]
    Q_hxa = P.k_A_hx * P.k_h_a_hx * (T_hx - T_air)
    Q_ac = P.k_A_c * P.k_h_a_c * (T_chm - T_air)
    C_air_cap = cr * V + P.k_c_vap * V * H_air
    C_chm = P.k_c_chm * P.k_m_chm + c_w * W_chm
    if not (C_air_cap > 0.0 and C_chm > 0.0):
        for i in range(nx):
            dx[i] = nan
        return
    dx[8] = (Q_led + Q_hxa + cr * V_tot * (T_out - T_air) + Q_ma + Q_ac) / C_air_cap

    g = P.k_A_c * P.k_h_chm
    gap = _hsat(T_chm, R_v) - H_air
    if gap > 0.0:
        eps_f = 0.0 if W_chm <= 0.0 else (1.0 if W_chm >= P.k_W_hold else W_chm / P.k_W_hold)
        W_L_chm = g * eps_f * gap
    else:
        W_L_chm = g * gap
    g = P.k_A_hx * P.k_h_hx
    gap = _hsat(T_hx, R_v) - H_air
    if gap > 0.0:
        eps_f = 0.0 if W_hx <= 0.0 else (1.0 if W_hx >= P.k_W_hold else W_hx / P.k_W_hold)
        W_L_hx = g * eps_f * gap
    else:
        W_L_hx = g * gap
    run_chm = P.k_runoff * (W_chm - P.k_W_hold) if W_chm > P.k_W_hold else 0.0
    run_hx = P.k_runoff * (W_hx - P.k_W_hold) if W_hx > P.k_W_hold else 0.0

    dx[9] = (P.k_H_u * u[3] + V_tot * (H_out - H_air) + W_L_med + W_L_chm + W_L_hx) / V
    dx[10] = (V_tot * (C_out - C_air) + phi_C_bio) / V
    dx[11] = (V_tot * (O_out - O_air) - phi_O_bio) / V

    T_s = T_air + 273.15 if P.opt_tec_kelvin != 0.0 else T_air
    Q_tec = P.k_alpha_q * u[2] * P.k_V_max / P.k_R_q * T_s + u[2] * P.k_V_max * P.k_V_max / (2.0 * P.k_R_q)
    Q_tec += P.k_TEC * (T_out - T_air)
    Q_chx = P.k_A_hx_c * P.k_U_hx_c * (T_hx - T_chm)
    Q_L_hx = (c_w * (100.0 - T_hx) + h_ew) * W_L_hx
    Q_co = P.k_A_c * P.k_h_o_c * (T_out - T_chm)
    Q_L_chm = (c_w * (100.0 - T_chm) + h_ew) * W_L_chm
    dx[12] = (-Q_ac + Q_co + Q_chx + Q_mc - Q_L_chm) / C_chm
    dx[13] = (Q_tec - Q_hxa - Q_chx - Q_L_hx) / P.k_C_hx
    dx[14] = -W_L_chm - run_chm
    dx[15] = -W_L_hx - run_hx


# -- RK4 ----------------------------------------------------------------------

cdef int _rk4(int kind, int nx, double* x, const double* u, const double* d0, const double* d1,
              double h_total, int nsteps, const Par* P, double* work, double* rec) noexcept nogil:
    """Integrate in place.  ``work`` holds 5*nx + 12 doubles; ``rec`` (optional)
    receives (nsteps+1)*nx states.  Returns 0, or 1 on a non-finite state."""
    cdef double* k1 = work
    cdef double* k2 = work + nx
    cdef double* k3 = work + 2 * nx
    cdef double* k4 = work + 3 * nx
    cdef double* xt = work + 4 * nx
    cdef double* da = work + 5 * nx
    cdef double* dm = da + 4
    cdef double* db = da + 8
    cdef double h = h_total / nsteps, s0, sm, s1
    cdef int k, i, j
    if rec != NULL:
        for i in range(nx):
            rec[i] = x[i]
    for k in range(nsteps):
        s0 = <double>k / nsteps
        sm = (k + 0.5) / nsteps
        s1 = (k + 1.0) / nsteps
        for j in range(4):
            da[j] = d0[j] + s0 * (d1[j] - d0[j])
            dm[j] = d0[j] + sm * (d1[j] - d0[j])
            db[j] = d0[j] + s1 * (d1[j] - d0[j])
        _rhs(kind, x, u, da, P, k1)
        for i in range(nx):
            xt[i] = x[i] + 0.5 * h * k1[i]
        _rhs(kind, xt, u, dm, P, k2)
        for i in range(nx):
            xt[i] = x[i] + 0.5 * h * k2[i]
        _rhs(kind, xt, u, dm, P, k3)
        for i in range(nx):
            xt[i] = x[i] + h * k3[i]
        _rhs(kind, xt, u, db, P, k4)
        for i in range(nx):
            x[i] = x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        if rec != NULL:
            for i in range(nx):
                rec[(k + 1) * nx + i] = x[i]
        for i in range(nx):
            if not isfinite(x[i]):
                return 1
    return 0


# -- Python entry points ------------------------------------------------------

cdef inline int _nx(int kind):
    return 16 if kind == KIND_CLOSED else 8


def _check(int kind, Py_ssize_t nx, Py_ssize_t nu, Py_ssize_t nd, Py_ssize_t np_):
    if kind not in (KIND_CLOSED, KIND_PARTIAL, KIND_OPEN):
        raise ValueError(f"unknown setup kind {kind}")
    if nx != _nx(kind):
        raise ValueError(f"state has length {nx}, expected {_nx(kind)}")
    need = 14 if kind == KIND_CLOSED else (4 if kind == KIND_PARTIAL else 1)
    if nu != need:
        raise ValueError(f"input has length {nu}, expected {need}")
    if nd != 4:
        raise ValueError("disturbance must have 4 entries")
    if np_ != N_PARAMS:
        raise ValueError(f"parameter vector has length {np_}, expected {N_PARAMS}")


def rhs(int kind, x, u, d, p):
    """Time derivative of the state as a float array."""
    cdef double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[::1] uv = np.ascontiguousarray(u, dtype=np.float64)
    cdef double[::1] dv = np.ascontiguousarray(d, dtype=np.float64)
    cdef double[::1] pv = np.ascontiguousarray(p, dtype=np.float64)
    _check(kind, xv.shape[0], uv.shape[0], dv.shape[0], pv.shape[0])
    out = np.empty(xv.shape[0])
    cdef double[::1] ov = out
    cdef Par P
    _load(&pv[0], &P)
    _rhs(kind, &xv[0], &uv[0], &dv[0], &P, &ov[0])
    return out


def propagate(int kind, x0, u, d0, d1, double h_total, int nsteps, p):
    """RK4 over one hold interval; disturbances interpolated linearly from d0 to d1."""
    x = np.array(x0, dtype=np.float64, copy=True)
    cdef double[::1] xv = x
    cdef double[::1] uv = np.ascontiguousarray(u, dtype=np.float64)
    cdef double[::1] d0v = np.ascontiguousarray(d0, dtype=np.float64)
    cdef double[::1] d1v = np.ascontiguousarray(d1, dtype=np.float64)
    cdef double[::1] pv = np.ascontiguousarray(p, dtype=np.float64)
    _check(kind, xv.shape[0], uv.shape[0], d0v.shape[0], pv.shape[0])
    if nsteps < 1:
        raise ValueError("nsteps must be >= 1")
    cdef int nx = xv.shape[0]
    cdef double[::1] work = np.empty(5 * nx + 12)
    cdef Par P
    _load(&pv[0], &P)
    with nogil:
        _rk4(kind, nx, &xv[0], &uv[0], &d0v[0], &d1v[0], h_total, nsteps, &P, &work[0], NULL)
    return x


def propagate_record(int kind, x0, u, d0, d1, double h_total, int nsteps, p):
    """Like :func:`propagate` but returns all ``nsteps + 1`` sub-step states."""
    x = np.array(x0, dtype=np.float64, copy=True)
    cdef double[::1] xv = x
    cdef double[::1] uv = np.ascontiguousarray(u, dtype=np.float64)
    cdef double[::1] d0v = np.ascontiguousarray(d0, dtype=np.float64)
    cdef double[::1] d1v = np.ascontiguousarray(d1, dtype=np.float64)
    cdef double[::1] pv = np.ascontiguousarray(p, dtype=np.float64)
    _check(kind, xv.shape[0], uv.shape[0], d0v.shape[0], pv.shape[0])
    if nsteps < 1:
        raise ValueError("nsteps must be >= 1")
    cdef int nx = xv.shape[0]
    rec = np.full((nsteps + 1, nx), np.nan)
    cdef double[:, ::1] rv = rec
    cdef double[::1] work = np.empty(5 * nx + 12)
    cdef Par P
    _load(&pv[0], &P)
    with nogil:
        _rk4(kind, nx, &xv[0], &uv[0], &d0v[0], &d1v[0], h_total, nsteps, &P, &work[0], &rv[0, 0])
    return rec


def propagate_many(int kind, X0, U, D, double h_total, int nsteps, p):
    """Propagate every shooting interval ``k`` from ``X0[k]`` with ``U[k]``, ``D[k]..D[k+1]``."""
    X = np.array(X0, dtype=np.float64, copy=True, order="C")
    cdef double[:, ::1] Xv = X
    cdef double[:, ::1] Uv = np.ascontiguousarray(U, dtype=np.float64)
    cdef double[:, ::1] Dv = np.ascontiguousarray(D, dtype=np.float64)
    cdef double[::1] pv = np.ascontiguousarray(p, dtype=np.float64)
    cdef Py_ssize_t N = Xv.shape[0]
    _check(kind, Xv.shape[1], Uv.shape[1], Dv.shape[1], pv.shape[0])
    if Uv.shape[0] != N or Dv.shape[0] != N + 1:
        raise ValueError("U needs N rows and D needs N + 1 rows")
    cdef int nx = Xv.shape[1]
    cdef double[::1] work = np.empty(5 * nx + 12)
    cdef Par P
    cdef Py_ssize_t k
    _load(&pv[0], &P)
    with nogil:
        for k in range(N):
            _rk4(kind, nx, &Xv[k, 0], &Uv[k, 0], &Dv[k, 0], &Dv[k + 1, 0], h_total, nsteps, &P, &work[0], NULL)
    return X


def propagate_jac_many(int kind, X0, U, D, double h_total, int nsteps, p, sx, su):
    """End states and forward-difference Jacobians of every interval map.

    ``sx`` and ``su`` are the perturbation sizes per state and input.

    Returns:
        ``(X1, Jx, Ju)`` with shapes ``(N, nx)``, ``(N, nx, nx)``, ``(N, nx, nu)``.
    """
    cdef double[:, ::1] X0v = np.ascontiguousarray(X0, dtype=np.float64)
    cdef double[:, ::1] Uv = np.ascontiguousarray(U, dtype=np.float64)
    cdef double[:, ::1] Dv = np.ascontiguousarray(D, dtype=np.float64)
    cdef double[::1] pv = np.ascontiguousarray(p, dtype=np.float64)
    cdef double[::1] sxv = np.ascontiguousarray(sx, dtype=np.float64)
    cdef double[::1] suv = np.ascontiguousarray(su, dtype=np.float64)
    cdef Py_ssize_t N = X0v.shape[0]
    _check(kind, X0v.shape[1], Uv.shape[1], Dv.shape[1], pv.shape[0])
    if Uv.shape[0] != N or Dv.shape[0] != N + 1:
        raise ValueError("U needs N rows and D needs N + 1 rows")
    cdef int nx = X0v.shape[1], nu = Uv.shape[1]
    if sxv.shape[0] != nx or suv.shape[0] != nu:
        raise ValueError("perturbation sizes do not match state/input dimensions")
    X1 = np.empty((N, nx))
    Jx = np.empty((N, nx, nx))
    Ju = np.empty((N, nx, nu))
    cdef double[:, ::1] X1v = X1
    cdef double[:, :, ::1] Jxv = Jx
    cdef double[:, :, ::1] Juv = Ju
    cdef double[::1] work = np.empty(5 * nx + 12)
    cdef double[::1] xb = np.empty(nx)
    cdef double[::1] ub = np.empty(nu)
    cdef Par P
    cdef Py_ssize_t k, i, j
    _load(&pv[0], &P)
    with nogil:
        for k in range(N):
            for i in range(nx):
                X1v[k, i] = X0v[k, i]
            _rk4(kind, nx, &X1v[k, 0], &Uv[k, 0], &Dv[k, 0], &Dv[k + 1, 0], h_total, nsteps, &P, &work[0], NULL)
            for j in range(nx):
                for i in range(nx):
                    xb[i] = X0v[k, i]
                xb[j] += sxv[j]
                _rk4(kind, nx, &xb[0], &Uv[k, 0], &Dv[k, 0], &Dv[k + 1, 0], h_total, nsteps, &P, &work[0], NULL)
                for i in range(nx):
                    Jxv[k, i, j] = (xb[i] - X1v[k, i]) / sxv[j]
            for j in range(nu):
                for i in range(nx):
                    xb[i] = X0v[k, i]
                for i in range(nu):
                    ub[i] = Uv[k, i]
                ub[j] += suv[j]
                _rk4(kind, nx, &xb[0], &ub[0], &Dv[k, 0], &Dv[k + 1, 0], h_total, nsteps, &P, &work[0], NULL)
                for i in range(nx):
                    Juv[k, i, j] = (xb[i] - X1v[k, i]) / suv[j]
    return X1, Jx, Ju
