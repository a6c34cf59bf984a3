import numpy as np
import pytest

from hermetia.errors import SetupError
from hermetia.reactor import (
    TABLE_A1_SYMBOLS,
    Disturbance,
    FluxReport,
    SetupConfig,
    evaluate,
    flux_report,
    rhs_closed,
    rhs_open,
    rhs_partial,
)
from hermetia.scenarios import tg2_initial_state

U_CLOSED = np.array([0.5, 0.2, 0.3, 0.2, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.5, 0.0, 0.0, 0.0])


def test_state_and_input_shapes():
    for kind, nx, nu in (("closed", 16, 14), ("partial", 8, 4), ("open", 8, 1)):
        m = SetupConfig(kind=kind)
        assert (m.nx, m.nu) == (nx, nu)


def test_setup_validation(d_nominal, x_closed):
    with pytest.raises(SetupError):
        SetupConfig(kind="half-open")
    with pytest.raises(SetupError):
        SetupConfig(L_num=-1)
    m = SetupConfig()
    with pytest.raises(SetupError):
        m.rhs(x_closed[:8], U_CLOSED, d_nominal)
    with pytest.raises(SetupError):
        m.rhs(x_closed, U_CLOSED[:4], d_nominal)
    with pytest.raises(SetupError):
        m.rhs(x_closed, U_CLOSED, d_nominal[:3])
    with pytest.raises(SetupError):
        m.state(u_v=1.0)
    with pytest.raises(SetupError):
        m.validate_input(np.r_[2.0, U_CLOSED[1:]])
    with pytest.raises(SetupError):
        SetupConfig(kind="open").validate_input([-1e-6])
    with pytest.raises(SetupError):
        rhs_partial(x_closed[:8], np.zeros(4), d_nominal, SetupConfig())


def test_disturbance_container():
    d = Disturbance(24.0, 0.01)
    assert np.array_equal(Disturbance.from_array(d.as_array()).as_array(), d.as_array())
    with pytest.raises(SetupError):
        Disturbance(24.0, -0.01)
    with pytest.raises(SetupError):
        Disturbance.from_array([1.0, 2.0])


def test_flux_report_is_exact_mapping(closed_model, x_closed, d_nominal):
    rep = closed_model.fluxes(x_closed, U_CLOSED, d_nominal)
    assert isinstance(rep, FluxReport)
    assert list(rep) == list(TABLE_A1_SYMBOLS)
    assert len(rep) == len(TABLE_A1_SYMBOLS)
    row = rep.as_row()
    assert row["r_maint"] == rep.rates.r_maint
    with pytest.raises(ValueError):
        FluxReport({"phi_B_ing": 0.0}, rep.rates, {})


def test_reduced_setups_match_closed_medium(d_nominal):
    """With matching air, the first eight derivatives are shared by all setups."""
    closed = SetupConfig()
    u_dT, u_dH = 3.0, 2e-3
    T_air, H_air = d_nominal[0] + u_dT, d_nominal[1] + u_dH
    xc = tg2_initial_state(closed, d_nominal, T_air=T_air, H_air=H_air, T_chm=T_air,
                           C_air=d_nominal[2], O_air=d_nominal[3])
    uc = np.zeros(14)
    dc = rhs_closed(xc, uc, d_nominal)[0]
    dp = rhs_partial(xc[:8], [u_dT, u_dH, 0.0, 0.0], d_nominal)[0]
    assert np.allclose(dp, dc[:8], rtol=1e-12, atol=0)
    d_open = np.r_[T_air, H_air, d_nominal[2:]]
    do = rhs_open(xc[:8], [0.0], d_open)
    assert np.allclose(do, dc[:8], rtol=1e-12, atol=0)


def test_medium_mass_identity(partial_model, x_partial, d_nominal):
    dx = partial_model.rhs(x_partial, [1.0, 1e-3, 2e-7, 1e-7], d_nominal)
    assert dx[6] == pytest.approx(dx[3] + dx[4] + dx[5] + 1e-3 * partial_model.L_num * dx[1], rel=1e-12)


def test_heat_exchange_is_antisymmetric(closed_model, x_closed, d_nominal):
    """Internal exchange terms cancel in the summed enthalpy balance."""
    dx, rep = evaluate(closed_model, x_closed, U_CLOSED, d_nominal)
    e = rep.extra
    stored = e["k_C_air"] * dx[8] + e["k_C_med"] * dx[7] + e["k_C_hx"] * dx[13] + e["k_C_chm"] * dx[12]
    sources = (rep["phi_Q_LED"] + rep["phi_Q_exch"] + rep["phi_Q_leak"] + rep["phi_Q_door"]
               + rep["phi_Q_bio"] + rep["phi_Q_TEC"] + rep["phi_Q_c-o"]
               - rep["phi_Q_L_med"] - rep["phi_Q_L_hx"] - rep["phi_Q_L_chm"])
    assert stored == pytest.approx(sources, rel=1e-10, abs=1e-12)


def test_vapour_balance(closed_model, x_closed, d_nominal):
    dx, rep = evaluate(closed_model, x_closed, U_CLOSED, d_nominal)
    water_in_air = 0.0 + closed_model.params.k_V_chm * dx[9]
    into_air = rep["phi_H_u"] + rep["phi_H_exch"] + rep["phi_H_leak"] + rep["phi_H_door"]
    surfaces = rep["phi_W_L_med"] + rep["phi_W_L_chm"] + rep["phi_W_L_hx"]
    assert water_in_air == pytest.approx(into_air + surfaces, rel=1e-12)


def test_gas_balance_coupling(closed_model, x_closed, d_nominal):
    sealed = closed_model.with_params(k_Vdot_leak=0.0)
    u = np.zeros(14)
    dx = sealed.rhs(x_closed, u, d_nominal)
    p = sealed.params
    assert dx[11] == pytest.approx(-p.k_bio_CO * dx[10], rel=1e-12)


def test_flux_report_warns_on_wet_below_dry(d_nominal):
    m = SetupConfig(kind="open")
    x = tg2_initial_state(m, d_nominal)
    x[1] = 0.5 * x[0]
    with pytest.warns(RuntimeWarning):
        flux_report(x, [0.0], d_nominal, m, kind="open")


def test_population_scaling_of_medium_uptake(d_nominal):
    a = SetupConfig(kind="partial", L_num=1000)
    b = SetupConfig(kind="partial", L_num=2000)
    x = tg2_initial_state(a, d_nominal)
    u = np.zeros(4)
    ra, rb = a.fluxes(x, u, d_nominal), b.fluxes(x, u, d_nominal)
    assert ra["phi_B_ing"] == rb["phi_B_ing"]
    da, db = a.rhs(x, u, d_nominal), b.rhs(x, u, d_nominal)
    biome = a.params.k_N_biome * x[4]
    assert (db[4] + biome) == pytest.approx(2 * (da[4] + biome), rel=1e-12)


def test_with_params_and_packed_copy():
    m = SetupConfig().with_params(k_mat=1e-7)
    assert m.params.k_mat == 1e-7
    v = m.packed
    v[:] = 0.0
    assert np.any(m.packed != 0.0)
