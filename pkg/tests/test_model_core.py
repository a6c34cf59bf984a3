import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from hermetia.errors import DomainError
from hermetia.model_core import (
    BioFluxes,
    BioRates,
    LarvaState,
    MediumState,
    RateFunctionSet,
    bio_gas_flux,
    bio_heat_flux,
    bio_rates,
    cardinal_temperature,
    dry_mass_rhs,
    feed_fluxes,
    larva_fluxes,
    maturity_switch,
    moisture_fraction,
    wet_mass_rhs,
)
from hermetia.params import DEFAULT_PARAMETERS as P
from hermetia.params import ModelOptions


def _rates(r_assim=1.0, r_maint=1.0, r_mat=0.0, r_B_mat=0.0):
    return BioRates(r_assim, r_maint, r_mat, r_B_mat, 1.0, 1.0, 1.0)


@pytest.mark.parametrize("T_sigma, expected", [(200.0, 0.0), (270.0, 1.0), (300.0, 0.0), (261.0, 0.0), (286.0, 0.0)])
def test_maturity_switch_table_values(T_sigma, expected):
    assert maturity_switch(T_sigma, P) == expected


def test_smoothed_switch_approaches_hard_switch():
    for T in (200.0, 255.0, 270.0, 292.0, 320.0):
        assert maturity_switch(T, P, steepness=50.0) == pytest.approx(maturity_switch(T, P), abs=1e-6)
    assert maturity_switch(261.0, P, steepness=1.0) == pytest.approx(0.5, abs=1e-6)


def _max_response_set():
    one = lambda *a: 1.0  # noqa: E731
    return RateFunctionSet(temperature=one, feed=one, air=one,
                           assimilation=lambda prod, larva, p: prod, development=lambda r, larva, p: r)


def test_bio_rates_normalisation_identity():
    larva = LarvaState(0.01, 0.03, 270.0)
    med = MediumState(0.4, 0.0, 1.0, 30.0, 2000)
    r = bio_rates(larva, med, 1.0, _max_response_set(), P)
    assert r.r_maint == 1.0 and r.r_mat == 1.0 and r.r_B_mat == 1.0


def test_bio_rates_half_temperature_switch_off():
    rf = RateFunctionSet(temperature=lambda T, p: 0.5, feed=lambda n, p: 1.0, air=lambda a, p: 1.0)
    r = bio_rates(LarvaState(0.01, 0.03, 100.0), MediumState(0.4, 0.0, 1.0, 30.0), 1.0, rf, P)
    assert r.r_maint == 0.5 and r.r_mat == 0.0


def test_bio_rates_zero_feed_annihilates():
    larva = LarvaState(0.01, 0.03, 270.0)
    r = bio_rates(larva, MediumState(0.0, 0.1, 1.0, 30.0), 5.0, p=P)
    assert r.r_maint == 0.0 and r.r_mat == 0.0 and r.r_assim == 0.0


def test_bio_rates_zero_normaliser():
    with pytest.raises(DomainError):
        bio_rates(LarvaState(0.01, 0.03, 100.0), MediumState(0.4, 0.0, 1.0, 30.0), 1.0, p=P.replace(k_rmaxA=0.0))


def test_dry_mass_zero_biomass():
    d, fl = dry_mass_rhs(LarvaState(0.0, 0.0, 100.0), _rates(), P)
    assert d == 0.0
    assert all(getattr(fl, f) == 0.0 for f in ("phi_B_ing", "phi_B_excr", "phi_B_assim", "phi_B_maint", "phi_B_mat"))


def test_dry_mass_hand_evaluation():
    d, fl = dry_mass_rhs(LarvaState(0.1, 0.3, 100.0), _rates(), P)
    expected = (1 - 0.25 - 0.1843) * 37.39e-6 * 0.1 - 2.169e-6 * 0.1
    assert d == pytest.approx(expected, rel=1e-12)
    assert d == pytest.approx(1.898e-6, rel=1e-3)
    assert fl.phi_B_eff == pytest.approx(fl.phi_B_ing - fl.phi_B_excr - fl.phi_B_assim)


def test_wet_mass_no_water_exchange():
    assert wet_mass_rhs(1e-6, BioFluxes(), 0.7, P) == 1e-6


def test_wet_mass_hand_evaluation():
    fl = BioFluxes(phi_B_assim=6.891e-7, phi_B_maint=2.169e-7)
    water = wet_mass_rhs(0.0, fl, 0.75, P)
    assert water == pytest.approx(2.9 * (6.891e-7 * 0.75 - 2.169e-7), rel=1e-12)
    assert water == pytest.approx(8.70e-7, rel=2e-3)


def test_wet_mass_linear_in_k_W_assim():
    fl = BioFluxes(phi_B_assim=6.891e-7, phi_B_maint=2.169e-7)
    one = wet_mass_rhs(0.0, fl, 0.75, P)
    two = wet_mass_rhs(0.0, fl, 0.75, P.replace(k_W_assim=2 * P.k_W_assim))
    assert two == pytest.approx(2 * one)


def test_bio_heat_hand_evaluation():
    fl = BioFluxes(phi_B_assim=1e-7, phi_B_maint=2e-8, phi_B_mat=3e-8)
    expected = 2000 * (P.k_Q_assim * 1e-7 + P.k_Q_maint * 2e-8 + P.k_Q_mat * 3e-8)
    assert bio_heat_flux(fl, 2000, 0.5, P) == pytest.approx(expected + P.k_Q_bio_rate * 0.5)


def test_feed_fluxes_scale_with_population():
    fl = BioFluxes(phi_B_ing=1e-7, phi_B_excr=2.5e-8)
    assert feed_fluxes(fl, 2000) == pytest.approx((2e-4, 5e-5))


def test_moisture_fraction():
    assert moisture_fraction(1.5, 0.5) == 0.75
    assert moisture_fraction(0.0, 0.0) == 0.0
    assert moisture_fraction(-1.0, 1.0) == 0.0


def test_medium_state_aggregates():
    m = MediumState(0.4, 0.1, 1.2, 30.0, 2000, 1.8, 8.56)
    assert m.N_med == pytest.approx(0.5)
    assert m.W_med_pct == pytest.approx(0.75)
    assert m.B_tot == 8.56


def test_cardinal_temperature_shape():
    assert cardinal_temperature(P.rf_T_opt, P) == pytest.approx(1.0)
    assert cardinal_temperature(P.rf_T_min, P) == 0.0
    assert cardinal_temperature(P.rf_T_max, P) == 0.0


larvae = st.builds(LarvaState, st.floats(0.0, 0.3), st.floats(0.0, 0.9), st.floats(0.0, 400.0))
media = st.builds(MediumState, st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.floats(0.0, 3.0),
                  st.floats(0.0, 50.0), st.floats(0.0, 5000.0))


@given(larvae, media, st.floats(0.0, 2000.0), st.floats(0.0, 2.0))
def test_rates_and_fluxes_invariants(larva, med, A_air, steep):
    opts = ModelOptions(maturity_steepness=steep)
    rates, fl, dB_dry, _ = larva_fluxes(larva, med, A_air, p=P, options=opts)
    for name in ("r_assim", "r_maint", "r_mat", "r_B_mat"):
        assert 0.0 <= getattr(rates, name) <= 1.0
    if rates.r_B_mat == 0.0:
        assert rates.r_mat == 0.0
    for name in ("phi_B_ing", "phi_B_excr", "phi_B_assim", "phi_B_maint", "phi_B_mat"):
        assert getattr(fl, name) >= 0.0
    assert fl.phi_B_eff == pytest.approx(fl.phi_B_ing - fl.phi_B_excr - fl.phi_B_assim, abs=1e-20)
    assert fl.phi_O_bio == pytest.approx(P.k_bio_CO * fl.phi_C_bio, abs=1e-20)
    assert math.isfinite(dB_dry)


@given(larvae, media, st.floats(0.0, 2000.0))
def test_gas_flux_coupling(larva, med, A_air):
    _, fl, _, _ = larva_fluxes(larva, med, A_air, p=P)
    c, o = bio_gas_flux(fl, med.L_num, med.N_feed, med.W_med_pct, P)
    assert o == pytest.approx(P.k_bio_CO * c)
