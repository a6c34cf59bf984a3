"""Flat vector layouts shared by the compiled kernels and the Python fallback.

The order of ``PARAM_NAMES`` is mirrored by the enum in ``_ckernels.pyx``;
``tests/test_kernels.py`` checks both agree.
"""

from __future__ import annotations

KIND_CLOSED = 0
KIND_PARTIAL = 1
KIND_OPEN = 2

KINDS = {"closed": KIND_CLOSED, "partial": KIND_PARTIAL, "open": KIND_OPEN}

CLOSED_STATES = (
    "B_dry", "B_wet", "T_sigma", "W_med", "N_feed", "N_exc", "B_med", "T_med",
    "T_air", "H_air", "C_air", "O_air", "T_chm", "T_hx", "W_chm", "W_hx",
)
PARTIAL_STATES = CLOSED_STATES[:8]
OPEN_STATES = PARTIAL_STATES

CLOSED_INPUTS = (
    "u_v", "u_d", "u_T", "u_H", "u_W_med", "u_N", "u_fan", "u_h",
    "u_I1", "u_I2", "u_I3", "u_I4", "u_W_sto", "u_W_ovf",
)
PARTIAL_INPUTS = ("u_dT", "u_dH", "u_W_med", "u_N")
OPEN_INPUTS = ("u_W_med",)

DISTURBANCES = ("T_out", "H_out", "C_out", "O_out")

STATE_NAMES = {KIND_CLOSED: CLOSED_STATES, KIND_PARTIAL: PARTIAL_STATES, KIND_OPEN: OPEN_STATES}
INPUT_NAMES = {KIND_CLOSED: CLOSED_INPUTS, KIND_PARTIAL: PARTIAL_INPUTS, KIND_OPEN: OPEN_INPUTS}

PARAM_NAMES = (
    # larvae
    "k_inges", "k_mat", "k_maint", "k_alpha_excr", "k_alpha_assim",
    "k_TS1", "k_TS2", "k_TS3",
    "k_Q_assim", "k_Q_mat", "k_Q_maint", "k_Q_bio_rate",
    "k_W_assim", "k_C_assim", "k_C_mat", "k_C_maint", "k_C_bio_rate",
    "k_bio_CO", "k_N_biome",
    # production unit
    "k_V_chm", "k_A_c", "k_A_m", "k_A_hx",
    "k_h_a_c", "k_h_a_m", "k_h_a_hx", "k_h_o_c", "k_he_a_m", "k_hm_a_m",
    "k_A_hx_c", "k_A_m_c", "k_U_hx_c", "k_U_m_c",
    "k_c_air", "k_rho_air", "k_Vdot_u", "k_Vdot_leak", "k_Vdot_door",
    "k_alpha_q", "k_V_max", "k_R_q", "k_TEC",
    "k_c_water", "k_h_ew", "k_c_tray", "k_m_tray", "k_c_feed", "k_c_vap", "k_c_chm",
    "k_R_g", "k_G_W", "k_W_per", "k_W_u",
    "k_m_chm", "k_C_hx", "k_h_med", "k_h_chm", "k_h_hx",
    "k_heat_1", "k_heat_2", "k_heat_3", "k_heat_4",
    "k_H_u", "k_N_u", "k_W_hold", "k_runoff", "k_C_floor",
    # rate function shapes
    "rf_T_min", "rf_T_opt", "rf_T_max", "rf_K_feed", "rf_K_air", "rf_B_half",
    "k_rmaxT", "k_rmaxgm", "k_rmaxA",
    # setup and switches
    "L_num", "opt_tec_kelvin", "opt_taper", "opt_mat_steep", "opt_eps_cont", "opt_lewis",
    "opt_evap_smooth",
)

PARAM_INDEX = {name: i for i, name in enumerate(PARAM_NAMES)}
N_PARAMS = len(PARAM_NAMES)
