"""Heat, vapour, water and gas flux laws of the production unit.

Sign conventions used throughout the package:

* convective and exchange fluxes are positive when they heat (or add mass
  to) the chamber air;
* ``phi_W_L`` of a surface is evaporation minus condensation, i.e. positive
  when the surface loses water to the air; the matching latent heat is
  removed from that surface.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .errors import DegenerateStateError, DomainError, SetupError
from .params import ModelOptions, ParameterSet

__all__ = [
    "Surface",
    "AirVolume",
    "ActuatorBank",
    "MAGNUS_A",
    "MAGNUS_B",
    "MAGNUS_C",
    "h_sat",
    "h_sat_unchecked",
    "relative_humidity_to_h",
    "convective_flux",
    "lewis_coefficient",
    "conductive_flux",
    "exchange_flow",
    "exchange_heat_flux",
    "tec_heat_flux",
    "led_heat_flux",
    "evap_cond_flux",
    "eps_evap",
    "film_eps",
    "latent_heat_flux",
    "heat_capacities",
    "vapor_exchange_flux",
    "gas_exchange_flux",
    "water_input_flux",
    "condensate_runoff",
]

MAGNUS_A = 610.94  # Pa
MAGNUS_B = 17.625
MAGNUS_C = 243.03  # degC
_H_SAT_T_MIN = -40.0


@dataclass(frozen=True)
class Surface:
    area: float  # m^2
    heat_transfer_coeff: float  # W/(m^2 K)
    vapor_transport_coeff: float  # m/s
    temperature: float  # degC
    water_film: float = 0.0  # kg

    def __post_init__(self):
        if not self.area > 0:
            raise DomainError(f"surface area must be positive, got {self.area}")
        if self.heat_transfer_coeff < 0 or self.vapor_transport_coeff < 0:
            raise DomainError("surface transfer coefficients must be non-negative")


@dataclass(frozen=True)
class AirVolume:
    volume: float  # m^3
    T_air: float  # degC
    H_air: float  # kg/m^3
    C_air: float  # kg/m^3
    O_air: float  # kg/m^3

    def __post_init__(self):
        if not self.volume > 0:
            raise DomainError(f"air volume must be positive, got {self.volume}")


@dataclass(frozen=True)
class ActuatorBank:
    """Normalised actuator signals of the closed setup.

    ``u_T`` lies in [-1, 1] (cooling to heating); every other signal in
    [0, 1].  ``u_fan`` and ``u_h`` are accepted for completeness: the fan has
    no flux law and harvesting is handled as a discrete event.
    """

    u_v: float = 0.0
    u_d: float = 0.0
    u_T: float = 0.0
    u_H: float = 0.0
    u_W_med: float = 0.0
    u_N: float = 0.0
    u_fan: float = 0.0
    u_h: float = 0.0
    u_I: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)
    u_W_sto: float = 0.0
    u_W_ovf: float = 0.0

    def __post_init__(self):
        if len(self.u_I) != 4:
            raise SetupError("u_I must have four LED channels")
        if not -1.0 <= self.u_T <= 1.0:
            raise SetupError(f"u_T={self.u_T} outside [-1, 1]")
        for name in ("u_v", "u_d", "u_H", "u_W_med", "u_N", "u_fan", "u_h", "u_W_sto", "u_W_ovf"):
            val = getattr(self, name)
            if not 0.0 <= val <= 1.0:
                raise SetupError(f"{name}={val} outside [0, 1]")
        for i, val in enumerate(self.u_I, start=1):
            if not 0.0 <= val <= 1.0:
                raise SetupError(f"u_I{i}={val} outside [0, 1]")


# -- psychrometrics -----------------------------------------------------------


def h_sat_unchecked(T_ref: float, p: ParameterSet | None = None) -> float:
    """Magnus saturation vapour density [kg/m^3] without a range check."""
    R_v = 461.5 if p is None else p.k_R_g
    p_sat = MAGNUS_A * math.exp(MAGNUS_B * T_ref / (T_ref + MAGNUS_C))
    return p_sat / (R_v * (T_ref + 273.0))


def h_sat(T_ref: float, p: ParameterSet | None = None) -> float:
    """Saturation vapour density [kg/m^3] at ``T_ref`` [degC].

    Raises:
        DomainError: ``T_ref`` at or below -40 degC, where the Magnus fit is
            not valid.
    """
    if not T_ref > _H_SAT_T_MIN:
        raise DomainError(f"h_sat is valid above {_H_SAT_T_MIN} degC, got {T_ref}")
    return h_sat_unchecked(T_ref, p)


def relative_humidity_to_h(rh: float, T: float, p: ParameterSet | None = None) -> float:
    """Vapour density for a relative humidity ``rh`` in [0, 1]."""
    return rh * h_sat(T, p)


# -- heat ---------------------------------------------------------------------


def convective_flux(surf: Surface, T_air: float) -> float:
    """Surface-to-air convection [W]; positive heats the air."""
    return surf.area * surf.heat_transfer_coeff * (surf.temperature - T_air)


def lewis_coefficient(phi_W_evap: float, p: ParameterSet) -> float:
    """Medium-air heat transfer coefficient raised by simultaneous evaporation."""
    return p.k_he_a_m + p.k_hm_a_m * phi_W_evap


def conductive_flux(contact_area: float, U: float, T_a: float, T_b: float) -> float:
    """Conduction from body ``a`` to body ``b`` [W]."""
    if contact_area < 0:
        raise DomainError("contact area must be non-negative")
    return contact_area * U * (T_a - T_b)


def exchange_flow(mode: str, u: float, p: ParameterSet) -> float:
    """Volumetric air exchange [m^3/s] for ``vent``, ``leak`` or ``door``."""
    if mode == "vent":
        return p.k_Vdot_u * u
    if mode == "leak":
        return p.k_Vdot_leak
    if mode == "door":
        return p.k_Vdot_door * u
    raise SetupError(f"unknown exchange mode {mode!r}")


def exchange_heat_flux(mode: str, u: float, T_out: float, T_air: float, p: ParameterSet) -> float:
    return p.k_c_air * p.k_rho_air * exchange_flow(mode, u, p) * (T_out - T_air)


def tec_heat_flux(
    u_T: float, T_air: float, T_out: float, p: ParameterSet, scale: str = "celsius"
) -> float:
    """Heat delivered by the thermoelectric module into the heat exchanger [W].

    The Seebeck term uses ``T_air`` in degC for ``scale="celsius"`` (the form
    the tabulated TEC constants were fitted with) or in K for ``"kelvin"``.
    """
    if scale == "celsius":
        T_s = T_air
    elif scale == "kelvin":
        T_s = T_air + 273.15
    else:
        raise SetupError(f"unknown temperature scale {scale!r}")
    seebeck = p.k_alpha_q * u_T * p.k_V_max / p.k_R_q * T_s
    joule = u_T * p.k_V_max ** 2 / (2.0 * p.k_R_q)
    return seebeck + joule + p.k_TEC * (T_out - T_air)


def led_heat_flux(u_I: Sequence[float], p: ParameterSet) -> float:
    k = (p.k_heat_1, p.k_heat_2, p.k_heat_3, p.k_heat_4)
    if len(u_I) != 4:
        raise SetupError("expected four LED channel signals")
    return sum(ki * ui for ki, ui in zip(k, u_I))


def latent_heat_flux(T_surf: float, phi_W_net: float, p: ParameterSet) -> float:
    """Heat taken from a surface by net evaporation ``phi_W_net`` [W]."""
    return (p.k_c_water * (100.0 - T_surf) + p.k_h_ew) * phi_W_net


def heat_capacities(med, air: AirVolume, W_chm: float, p: ParameterSet) -> tuple[float, float, float]:
    """Heat capacities of the medium, the air and the chamber walls [J/K].

    ``med`` needs ``N_feed`` and ``W_med`` attributes (a
    :class:`~hermetia.model_core.MediumState`).  The feed term uses the
    unconsumed feed dry mass.

    Raises:
        DegenerateStateError: a capacity is not positive.
    """
    c_med = p.k_c_tray * p.k_m_tray + p.k_c_feed * med.N_feed + p.k_c_water * med.W_med
    c_air = p.k_c_air * p.k_rho_air * air.volume + p.k_c_vap * air.volume * air.H_air
    c_chm = p.k_c_chm * p.k_m_chm + p.k_c_water * W_chm
    for name, val in (("k_C_med", c_med), ("k_C_air", c_air), ("k_C_chm", c_chm)):
        if not val > 0:
            raise DegenerateStateError(f"{name} = {val} is not positive")
    return c_med, c_air, c_chm


# -- water and vapour ---------------------------------------------------------


def evap_cond_flux(
    surf: Surface, H_air: float, eps_evap: float, p: ParameterSet | None = None
) -> tuple[float, float, float]:
    """Evaporation, condensation and net evaporation of a surface [kg/s]."""
    gap = h_sat_unchecked(surf.temperature, p) - H_air
    g = surf.area * surf.vapor_transport_coeff
    evap = g * eps_evap * gap if gap > 0 else 0.0
    cond = -g * gap if gap < 0 else 0.0
    return evap, cond, evap - cond


def eps_evap(W_med_pct: float, p: ParameterSet, continuous: bool = False, smoothing: float = 0.0) -> float:
    """Evaporation coefficient of the growing medium.

    ``smoothing > 0`` replaces the switch at ``k_W_per`` by a logistic blend
    of that width (in moisture fraction) towards 1.
    """
    gain = 1.0 / p.k_W_per if continuous else p.k_G_W
    eps = gain * W_med_pct
    if smoothing > 0.0:
        z = (W_med_pct - p.k_W_per) / smoothing
        s = 1.0 / (1.0 + math.exp(-z)) if z >= 0 else math.exp(z) / (1.0 + math.exp(z))
        return eps + (1.0 - eps) * s
    return 1.0 if W_med_pct > p.k_W_per else eps


def film_eps(W_film: float, p: ParameterSet) -> float:
    """Evaporation coefficient of a wetted wall or heat-exchanger film."""
    if W_film <= 0.0:
        return 0.0
    return min(1.0, W_film / p.k_W_hold)


def vapor_exchange_flux(mode: str, u: float, H_out: float, H_air: float, p: ParameterSet) -> float:
    return exchange_flow(mode, u, p) * (H_out - H_air)


def gas_exchange_flux(mode: str, u: float, X_out: float, X_air: float, p: ParameterSet) -> float:
    return exchange_flow(mode, u, p) * (X_out - X_air)


def water_input_flux(u_W_med: float, p: ParameterSet) -> float:
    return p.k_W_u * u_W_med


def condensate_runoff(W_film: float, p: ParameterSet) -> float:
    """Drain of a condensate film above its holding capacity [kg/s]."""
    return p.k_runoff * max(W_film - p.k_W_hold, 0.0)


def medium_surface(T_med: float, p: ParameterSet, options: ModelOptions, phi_W_evap: float = 0.0) -> Surface:
    h = lewis_coefficient(phi_W_evap, p) if options.lewis_correction else p.k_h_a_m
    return Surface(p.k_A_m, h, p.k_h_med, T_med)
