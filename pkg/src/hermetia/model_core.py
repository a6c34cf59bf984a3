"""Larvae growth, development and the biologically driven resource fluxes.

Per-larva biomass fluxes (``phi_B_*``) are in g/s.  Aggregation over the
population happens only in the flux functions that take ``L_num``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

from .errors import DomainError
from .params import ModelOptions, ParameterSet

__all__ = [
    "LarvaState",
    "MediumState",
    "BioRates",
    "BioFluxes",
    "RateFunctionSet",
    "DEFAULT_RATE_FUNCTIONS",
    "cardinal_temperature",
    "monod_feed",
    "saturating_air",
    "default_assimilation",
    "default_development",
    "maturity_switch",
    "moisture_fraction",
    "bio_rates",
    "dry_mass_rhs",
    "wet_mass_rhs",
    "bio_heat_flux",
    "bio_gas_flux",
    "feed_fluxes",
    "larva_fluxes",
]


@dataclass(frozen=True)
class LarvaState:
    B_dry: float  # g
    B_wet: float  # g
    T_sigma: float  # h


@dataclass(frozen=True)
class MediumState:
    N_feed: float  # kg
    N_exc: float  # kg
    W_med: float  # kg
    T_med: float  # degC
    L_num: float = 0.0
    B_med: float = 0.0  # kg
    B_tot: float = 0.0  # g, dry mass of all larvae

    @property
    def N_med(self) -> float:
        return self.N_feed + self.N_exc

    @property
    def W_med_pct(self) -> float:
        return moisture_fraction(self.W_med, self.N_feed)


@dataclass(frozen=True)
class BioRates:
    r_assim: float
    r_maint: float
    r_mat: float
    r_B_mat: float
    r_T: float
    r_Fgrw: float
    r_A: float
    r_dev: float = 0.0  # development rate [h/h]


@dataclass(frozen=True)
class BioFluxes:
    phi_B_ing: float = 0.0
    phi_B_excr: float = 0.0
    phi_B_assim: float = 0.0
    phi_B_maint: float = 0.0
    phi_B_mat: float = 0.0
    phi_B_eff: float = 0.0
    phi_W_assim: float = 0.0  # g/s per larva
    phi_W_maint: float = 0.0  # g/s per larva
    phi_Q_bio: float = 0.0  # W
    phi_C_bio: float = 0.0  # kg/s
    phi_O_bio: float = 0.0  # kg/s
    phi_N_ing: float = 0.0  # g/s
    phi_N_exc: float = 0.0  # g/s
    phi_W_bio: float = 0.0  # kg/s


# -- default response families ------------------------------------------------


def cardinal_temperature(T: float, p: ParameterSet) -> float:
    """Beta-type cardinal temperature response, 1 at ``rf_T_opt``, 0 outside (T_min, T_max)."""
    t_min, t_opt, t_max = p.rf_T_min, p.rf_T_opt, p.rf_T_max
    if T <= t_min or T >= t_max:
        return 0.0
    expo = (t_opt - t_min) / (t_max - t_opt)
    return (t_max - T) / (t_max - t_opt) * ((T - t_min) / (t_opt - t_min)) ** expo


def monod_feed(N_feed: float, p: ParameterSet) -> float:
    n = max(N_feed, 0.0)
    return n / (n + p.rf_K_feed)


def saturating_air(A_air: float, p: ParameterSet) -> float:
    a = max(A_air, 0.0)
    return a / (a + p.rf_K_air)


def default_assimilation(norm_product: float, larva: LarvaState, p: ParameterSet) -> float:
    """Normalised response product times a hyperbolic size response.

    Without the size term the ingestion flux grows exponentially with dry
    mass for the whole larval stage.
    """
    b = max(larva.B_dry, 0.0)
    return norm_product * p.rf_B_half / (p.rf_B_half + b)


def default_development(r_T_norm: float, larva: LarvaState, p: ParameterSet) -> float:
    """Development rate in development hours per hour."""
    return r_T_norm


@dataclass(frozen=True)
class RateFunctionSet:
    """Pluggable growth-regulation responses.

    ``temperature``, ``feed`` and ``air`` map (value, params) to a
    non-negative response; they are divided by ``k_rmaxT``, ``k_rmaxgm`` and
    ``k_rmaxA``.  ``assimilation`` maps (normalised product, larva, params)
    to ``r_assim`` and ``development`` maps (normalised temperature
    response, larva, params) to the development rate.
    """

    temperature: Callable[[float, ParameterSet], float] = cardinal_temperature
    feed: Callable[[float, ParameterSet], float] = monod_feed
    air: Callable[[float, ParameterSet], float] = saturating_air
    assimilation: Callable[[float, LarvaState, ParameterSet], float] = default_assimilation
    development: Callable[[float, LarvaState, ParameterSet], float] = default_development

    @property
    def is_default(self) -> bool:
        """True when every member is a built-in family (compiled kernels apply)."""
        return (
            self.temperature is cardinal_temperature
            and self.feed is monod_feed
            and self.air is saturating_air
            and self.assimilation is default_assimilation
            and self.development is default_development
        )


DEFAULT_RATE_FUNCTIONS = RateFunctionSet()


# -- operations -------------------------------------------------------------


def _logistic(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def maturity_switch(T_sigma: float, p: ParameterSet, steepness: float = 0.0) -> float:
    """Maturity activation: 1 strictly inside (k_TS1, k_TS3), else 0.

    With ``steepness > 0`` the switch is replaced by the smooth product of two
    logistic ramps centred on the thresholds.
    """
    if steepness > 0.0:
        return _logistic(steepness * (T_sigma - p.k_TS1)) * _logistic(steepness * (p.k_TS3 - T_sigma))
    return 1.0 if p.k_TS1 < T_sigma < p.k_TS3 else 0.0


def assimilation_taper(T_sigma: float, p: ParameterSet) -> float:
    """Linear ramp from 1 at ``k_TS1`` to 0 at ``k_TS2``."""
    if T_sigma <= p.k_TS1:
        return 1.0
    if T_sigma >= p.k_TS2:
        return 0.0
    return (p.k_TS2 - T_sigma) / (p.k_TS2 - p.k_TS1)


def moisture_fraction(W_med: float, N_feed: float) -> float:
    """Water fraction of the water-plus-feed mass, clipped to [0, 1]."""
    w = max(W_med, 0.0)
    n = max(N_feed, 0.0)
    total = w + n
    if total <= 0.0:
        return 0.0
    return w / total


def bio_rates(
    larva: LarvaState,
    med: MediumState,
    A_air: float,
    rf: RateFunctionSet = DEFAULT_RATE_FUNCTIONS,
    p: ParameterSet = ParameterSet(),
    options: ModelOptions = ModelOptions(),
) -> BioRates:
    if p.k_rmaxT == 0 or p.k_rmaxgm == 0 or p.k_rmaxA == 0:
        raise DomainError("rate normalizers k_rmaxT, k_rmaxgm, k_rmaxA must be non-zero")
    r_T = rf.temperature(med.T_med, p)
    r_F = rf.feed(med.N_feed, p)
    r_A = rf.air(A_air, p)
    r_T_n = r_T / p.k_rmaxT
    product = r_T_n * (r_F / p.k_rmaxgm) * (r_A / p.k_rmaxA)
    r_B_mat = maturity_switch(larva.T_sigma, p, options.maturity_steepness)
    r_assim = rf.assimilation(product, larva, p)
    if options.assimilation_taper:
        r_assim *= assimilation_taper(larva.T_sigma, p)
    return BioRates(
        r_assim=r_assim,
        r_maint=product,
        r_mat=r_B_mat * product,
        r_B_mat=r_B_mat,
        r_T=r_T,
        r_Fgrw=r_F,
        r_A=r_A,
        r_dev=rf.development(r_T_n, larva, p),
    )


def dry_mass_rhs(larva: LarvaState, rates: BioRates, p: ParameterSet) -> tuple[float, BioFluxes]:
    """Dry mass derivative [g/s] and the per-larva biomass fluxes."""
    b = max(larva.B_dry, 0.0)
    ing = rates.r_assim * p.k_inges * b
    excr = p.k_alpha_excr * ing
    assim = p.k_alpha_assim * ing
    eff = ing - excr - assim
    maint = rates.r_maint * p.k_maint * b
    mat = rates.r_mat * p.k_mat * b
    fl = BioFluxes(
        phi_B_ing=ing,
        phi_B_excr=excr,
        phi_B_assim=assim,
        phi_B_maint=maint,
        phi_B_mat=mat,
        phi_B_eff=eff,
    )
    return eff - maint - mat, fl


def wet_mass_rhs(dBdry_dt: float, fluxes: BioFluxes, W_med_pct: float, p: ParameterSet) -> float:
    water = p.k_W_assim * (fluxes.phi_B_assim * W_med_pct - fluxes.phi_B_maint)
    return dBdry_dt + water


def bio_heat_flux(fluxes: BioFluxes, L_num: float, N_med: float, p: ParameterSet) -> float:
    larvae = p.k_Q_assim * fluxes.phi_B_assim + p.k_Q_maint * fluxes.phi_B_maint + p.k_Q_mat * fluxes.phi_B_mat
    return L_num * larvae + p.k_Q_bio_rate * max(N_med, 0.0)


def bio_gas_flux(
    fluxes: BioFluxes, L_num: float, N_feed: float, W_med_pct: float, p: ParameterSet
) -> tuple[float, float]:
    """CO2 production and O2 consumption [kg/s]."""
    larvae_g = p.k_C_assim * fluxes.phi_B_assim + p.k_C_maint * fluxes.phi_B_maint + p.k_C_mat * fluxes.phi_B_mat
    phi_C = 1e-3 * L_num * larvae_g + p.k_C_bio_rate * max(N_feed, 0.0) * W_med_pct
    return phi_C, p.k_bio_CO * phi_C


def feed_fluxes(fluxes: BioFluxes, L_num: float) -> tuple[float, float]:
    """Population feed ingestion and excretion [g/s]."""
    return L_num * fluxes.phi_B_ing, L_num * fluxes.phi_B_excr


def larva_fluxes(
    larva: LarvaState,
    med: MediumState,
    A_air: float,
    rf: RateFunctionSet = DEFAULT_RATE_FUNCTIONS,
    p: ParameterSet = ParameterSet(),
    options: ModelOptions = ModelOptions(),
) -> tuple[BioRates, BioFluxes, float, float]:
    """Everything the reactor needs from the larvae model at one instant.

    Returns:
        ``(rates, fluxes, dB_dry/dt, dB_wet/dt)`` with population aggregates
        filled into ``fluxes``.
    """
    rates = bio_rates(larva, med, A_air, rf, p, options)
    dB_dry, fl = dry_mass_rhs(larva, rates, p)
    w_pct = med.W_med_pct
    dB_wet = wet_mass_rhs(dB_dry, fl, w_pct, p)
    phi_W_assim = p.k_W_assim * fl.phi_B_assim * w_pct
    phi_W_maint = p.k_W_assim * fl.phi_B_maint
    L = med.L_num
    phi_Q = bio_heat_flux(fl, L, med.N_med, p)
    phi_C, phi_O = bio_gas_flux(fl, L, med.N_feed, w_pct, p)
    n_ing, n_exc = feed_fluxes(fl, L)
    fl = replace(
        fl,
        phi_W_assim=phi_W_assim,
        phi_W_maint=phi_W_maint,
        phi_Q_bio=phi_Q,
        phi_C_bio=phi_C,
        phi_O_bio=phi_O,
        phi_N_ing=n_ing,
        phi_N_exc=n_exc,
        phi_W_bio=1e-3 * L * (phi_W_assim - phi_W_maint),
    )
    return rates, fl, dB_dry, dB_wet
