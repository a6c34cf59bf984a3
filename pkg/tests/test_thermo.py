import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hermetia.errors import DegenerateStateError, DomainError, SetupError
from hermetia.params import DEFAULT_PARAMETERS as P
from hermetia.params import ModelOptions
from hermetia.thermo import (
    ActuatorBank,
    AirVolume,
    Surface,
    conductive_flux,
    condensate_runoff,
    convective_flux,
    eps_evap,
    evap_cond_flux,
    exchange_flow,
    film_eps,
    h_sat,
    heat_capacities,
    latent_heat_flux,
    led_heat_flux,
    lewis_coefficient,
    medium_surface,
    relative_humidity_to_h,
    tec_heat_flux,
)
from hermetia.model_core import MediumState


def test_h_sat_known_point():
    # Magnus at 20 degC: 2338 Pa over R_v (T + 273)
    expected = 610.94 * math.exp(17.625 * 20 / 263.03) / (461.5 * 293.0)
    assert h_sat(20.0) == pytest.approx(expected, rel=1e-12)
    assert h_sat(20.0) == pytest.approx(0.01730, rel=5e-3)


def test_h_sat_rejects_below_validity():
    with pytest.raises(DomainError):
        h_sat(-40.0)
    with pytest.raises(DomainError):
        h_sat(float("nan"))


@given(st.floats(-39.0, 60.0), st.floats(0.01, 5.0))
def test_h_sat_strictly_increasing(T, dT):
    assert h_sat(T + dT) > h_sat(T)


def test_relative_humidity_scales_h_sat():
    assert relative_humidity_to_h(0.6, 29.0) == pytest.approx(0.6 * h_sat(29.0))


def test_convective_flux_sign():
    s = Surface(area=2.0, heat_transfer_coeff=5.0, vapor_transport_coeff=1e-3, temperature=30.0)
    assert convective_flux(s, 20.0) == pytest.approx(100.0)
    assert convective_flux(s, 40.0) == pytest.approx(-100.0)


def test_conductive_flux_validation():
    assert conductive_flux(1.0, 2.0, 30.0, 25.0) == pytest.approx(10.0)
    with pytest.raises(DomainError):
        conductive_flux(-1.0, 2.0, 30.0, 25.0)


def test_lewis_coefficient_linear():
    assert lewis_coefficient(0.0, P) == P.k_he_a_m
    assert lewis_coefficient(2e-6, P) - lewis_coefficient(1e-6, P) == pytest.approx(P.k_hm_a_m * 1e-6)


def test_exchange_flow_modes():
    assert exchange_flow("vent", 0.5, P) == pytest.approx(0.5 * P.k_Vdot_u)
    assert exchange_flow("leak", 0.7, P) == P.k_Vdot_leak
    assert exchange_flow("door", 1.0, P) == P.k_Vdot_door
    with pytest.raises(SetupError):
        exchange_flow("window", 1.0, P)


def test_tec_scales():
    c = tec_heat_flux(0.5, 25.0, 20.0, P, "celsius")
    k = tec_heat_flux(0.5, 25.0, 20.0, P, "kelvin")
    seebeck_gap = P.k_alpha_q * 0.5 * P.k_V_max / P.k_R_q * 273.15
    assert k - c == pytest.approx(seebeck_gap)
    with pytest.raises(SetupError):
        tec_heat_flux(0.5, 25.0, 20.0, P, "rankine")


def test_tec_off_only_conducts():
    assert tec_heat_flux(0.0, 25.0, 20.0, P) == pytest.approx(P.k_TEC * -5.0)


def test_led_heat_flux():
    assert led_heat_flux([1, 0, 0, 0], P) == P.k_heat_1
    with pytest.raises(SetupError):
        led_heat_flux([1, 0], P)


def test_latent_heat_flux_sign_follows_evaporation():
    assert latent_heat_flux(30.0, 1e-6, P) > 0
    assert latent_heat_flux(30.0, -1e-6, P) < 0


def test_heat_capacities_positive_and_degenerate():
    med = MediumState(N_feed=0.48, N_exc=0.0, W_med=1.5, T_med=29.0)
    air = AirVolume(P.k_V_chm, 29.0, 0.01, 7e-4, 0.27)
    c_med, c_air, c_chm = heat_capacities(med, air, 0.0, P)
    assert c_med == pytest.approx(P.k_c_tray * P.k_m_tray + P.k_c_feed * 0.48 + P.k_c_water * 1.5)
    assert c_air > 0 and c_chm > 0
    with pytest.raises(DegenerateStateError):
        heat_capacities(med, air, 0.0, P.replace(k_m_tray=0.0, k_c_feed=0.0, k_c_water=0.0))


def test_evap_cond_exclusive():
    s = Surface(0.1, 5.0, 1e-3, 30.0)
    e, c, net = evap_cond_flux(s, 0.5 * h_sat(30.0), 1.0)
    assert e > 0 and c == 0 and net == e
    e, c, net = evap_cond_flux(s, 1.2 * h_sat(30.0), 1.0)
    assert e == 0 and c > 0 and net == -c


def test_eps_evap_branches():
    assert eps_evap(0.7, P) == 1.0
    assert eps_evap(0.3, P) == pytest.approx(P.k_G_W * 0.3)
    assert eps_evap(0.3, P, continuous=True) == pytest.approx(0.3 / P.k_W_per)


@given(st.floats(0.0, 1.0))
def test_eps_evap_smoothed_within_branches(w):
    lo = min(P.k_G_W * w, 1.0)
    val = eps_evap(w, P, smoothing=0.01)
    assert min(lo, 1.0) - 1e-12 <= val <= max(P.k_G_W * w, 1.0) + 1e-12


def test_eps_evap_smoothing_converges_to_switch():
    for w in (0.3, 0.59, 0.61, 0.9):
        assert eps_evap(w, P, smoothing=1e-5) == pytest.approx(eps_evap(w, P), abs=1e-6)


def test_film_eps():
    assert film_eps(0.0, P) == 0.0
    assert film_eps(0.5 * P.k_W_hold, P) == pytest.approx(0.5)
    assert film_eps(3 * P.k_W_hold, P) == 1.0


def test_condensate_runoff_threshold():
    assert condensate_runoff(0.5 * P.k_W_hold, P) == 0.0
    assert condensate_runoff(2 * P.k_W_hold, P) == pytest.approx(P.k_runoff * P.k_W_hold)


def test_medium_surface_lewis_switch():
    on = medium_surface(30.0, P, ModelOptions(lewis_correction=True), 1e-6)
    off = medium_surface(30.0, P, ModelOptions(lewis_correction=False), 1e-6)
    assert on.heat_transfer_coeff == pytest.approx(lewis_coefficient(1e-6, P))
    assert off.heat_transfer_coeff == P.k_h_a_m


def test_actuator_bank_validation():
    ActuatorBank(u_T=-1.0, u_v=1.0)
    with pytest.raises(SetupError):
        ActuatorBank(u_T=1.5)
    with pytest.raises(SetupError):
        ActuatorBank(u_v=-0.1)
    with pytest.raises(SetupError):
        ActuatorBank(u_I=(0.0, 0.0, 2.0, 0.0))


def test_h_sat_vectorised_consistency():
    T = np.linspace(0, 50, 11)
    assert np.allclose([h_sat(t) for t in T], [relative_humidity_to_h(1.0, t) for t in T])
