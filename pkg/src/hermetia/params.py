"""Parameter registry.

Every constant of the production-unit and larvae models lives in one frozen
:class:`ParameterSet`.  Field metadata carries the unit, the conventional symbol,
estimation bounds and whether the default is a measured table value or an
assumption of this package (``source="assumed"``).

Symbols are accepted verbatim when overriding (``"k_α_excr"``, ``"k_h_a-c"``,
``"k_TΣ1"`` ...); they are mapped onto the Python field names by
:func:`canonical_name`.
"""

from __future__ import annotations

import dataclasses
import math
import unicodedata
from dataclasses import dataclass, field, fields
from typing import Any, Iterable, Mapping

import numpy as np

from .errors import ConfigError

__all__ = [
    "ParameterSet",
    "ModelOptions",
    "DEFAULT_PARAMETERS",
    "canonical_name",
    "parameter_info",
]


def _p(default, unit, symbol, *, lower=None, upper=None, source="table", doc=""):
    if lower is None:
        lower = 0.0
    if upper is None:
        upper = 10.0 * abs(default) if default != 0 else 1.0
    meta = {
        "unit": unit,
        "symbol": symbol,
        "lower": float(lower),
        "upper": float(upper),
        "source": source,
        "doc": doc,
    }
    return field(default=float(default), metadata=meta)


@dataclass(frozen=True)
class ParameterSet:
    """Immutable set of model constants.

    Units follow the model equations: per-larva biomass fluxes in g/s,
    masses of the growing medium in kg, temperatures in degC, concentrations
    in kg/m^3 and time in seconds (development sums in hours).
    """

    # -- larvae model ------------------------------------------------------
    k_inges: float = _p(37.39e-6, "g/g/s", "k_inges", doc="specific ingestion rate")
    k_mat: float = _p(1.6540e-05, "g/g/s", "k_mat", doc="specific maturity rate")
    k_maint: float = _p(2.1690e-06, "g/g/s", "k_maint", doc="specific maintenance rate")
    k_alpha_excr: float = _p(0.25, "-", "k_α_excr", upper=1.0, doc="fraction of ingested feed excreted")
    k_alpha_assim: float = _p(0.1843, "-", "k_α_assim", upper=1.0, doc="fraction of ingested feed spent for digestion")
    k_TS1: float = _p(261.0, "h", "k_TΣ1", doc="development sum where maturity starts")
    k_TS2: float = _p(272.0, "h", "k_TΣ2", doc="development sum where assimilation ends")
    k_TS3: float = _p(286.0, "h", "k_TΣ3", doc="development sum where maturity ends")
    k_Q_assim: float = _p(0.01401e6, "J/g", "k_Q_assim")
    k_Q_mat: float = _p(0.02802e6, "J/g", "k_Q_mat")
    k_Q_maint: float = _p(0.02802e6, "J/g", "k_Q_maint")
    k_Q_bio: float = _p(3.1e3, "J/g", "k_Q_bio", doc="nominal microbiome heat; not used by the balance, see k_Q_bio_rate")
    k_Q_bio_rate: float = _p(0.0, "W/kg", "k_Q_bio_rate", upper=100.0, source="assumed",
                             doc="microbiome heat per kg substrate dry mass")
    k_W_assim: float = _p(2.9, "g/g", "k_W_assim")
    k_C_assim: float = _p(1.6, "g/g", "k_C_assim")
    k_C_mat: float = _p(1.6, "g/g", "k_C_mat")
    k_C_maint: float = _p(1.6, "g/g", "k_C_maint")
    k_C_bio: float = _p(1.1920e-04, "g/g", "k_C_bio", doc="nominal microbiome CO2 yield; see k_C_bio_rate")
    k_C_bio_rate: float = _p(1.1920e-04 / 3600.0, "1/s", "k_C_bio_rate", source="assumed",
                             doc="microbiome CO2 per kg moist feed and second (nominal value read per hour)")
    k_bio_CO: float = _p(1.0, "-", "k_bio_C:O", doc="O2 consumed per CO2 produced")
    k_N_biome: float = _p(0.0, "1/s", "k_N_biome", upper=1e-5, source="assumed",
                          doc="first-order feed consumption by the microbiome")

    # -- production unit ---------------------------------------------------
    k_V_chm: float = _p(0.064, "m^3", "k_V_chm")
    k_A_c: float = _p(1.117, "m^2", "k_A_c")
    k_A_m: float = _p(0.12, "m^2", "k_A_m")
    k_A_hx: float = _p(0.29, "m^2", "k_A_hx")
    k_h_a_c: float = _p(26.97, "W/m^2/K", "k_h_a-c")
    k_h_a_m: float = _p(12.9, "W/m^2/K", "k_h_a-m")
    k_h_a_hx: float = _p(26.04, "W/m^2/K", "k_h_a-hx")
    k_h_o_c: float = _p(8.46, "W/m^2/K", "k_h_o-c")
    k_he_a_m: float = _p(11.75, "W/m^2/K", "k_he_a-m")
    k_hm_a_m: float = _p(1.34, "W/m^2/K per kg/s", "k_hm_a-m")
    k_A_hx_c: float = _p(0.0, "m^2", "k_A_hx-c")
    k_A_m_c: float = _p(0.0, "m^2", "k_A_m-c")
    k_U_hx_c: float = _p(0.0, "W/m^2/K", "k_U_hx-c", upper=100.0)
    k_U_m_c: float = _p(0.0, "W/m^2/K", "k_U_m-c", upper=100.0)
    k_c_air: float = _p(1006.0, "J/kg/K", "k_c_air")
    k_rho_air: float = _p(1.2041, "kg/m^3", "k_ρ_air")
    k_Vdot_u: float = _p(2.5e-4, "m^3/s", "k_V̇_u")
    k_Vdot_leak: float = _p(5.7870e-07, "m^3/s", "k_V̇_leak")
    k_Vdot_door: float = _p(1.5000e-04, "m^3/s", "k_V̇_door")
    k_alpha_q: float = _p(0.0460, "V/K", "k_α,q")
    k_V_max: float = _p(12.0, "V", "k_V_max")
    k_R_q: float = _p(1.72, "Ohm", "k_R_q", lower=1e-3)
    k_TEC: float = _p(0.4224, "W/K", "k_TEC")
    k_c_water: float = _p(4182.0, "J/kg/K", "k_c_water")
    k_h_ew: float = _p(2256400.0, "J/kg", "k_h_ew", doc="nominal unit kJ/kg; magnitude is J/kg")
    k_c_tray: float = _p(500.0, "J/kg/K", "k_c_tray")
    k_m_tray: float = _p(0.85, "kg", "k_m_tray")
    k_c_feed: float = _p(19861.0, "J/kg/K", "k_c_feed")
    k_c_vap: float = _p(4182.0, "J/kg/K", "k_c_vap")
    k_c_chm: float = _p(1854.0, "J/kg/K", "k_c_chm")
    k_W_mmol: float = _p(611.0, "g/mol", "k_W_mmol", doc="not used; vapour density uses k_R_g as specific gas constant")
    k_R_g: float = _p(461.5, "J/kg/K", "k_R_g", lower=1.0)
    k_G_W: float = _p(1.0, "-", "k_G_W")
    k_W_per: float = _p(0.6, "-", "k_W_per", upper=1.0)
    k_W_u: float = _p(0.0038, "kg/s", "k_W_u")

    # -- production unit, not tabulated (assumed defaults) ----------------
    k_m_chm: float = _p(5.0, "kg", "k_m_chm", lower=1e-3, source="assumed", doc="mass of walls and inner parts")
    k_C_hx: float = _p(500.0, "J/K", "k_C_hx", lower=1.0, source="assumed", doc="heat exchanger heat capacity")
    k_h_med: float = _p(1.2e-3, "m/s", "k_h_med", source="assumed", doc="vapour transport coefficient, medium")
    k_h_chm: float = _p(1.0e-3, "m/s", "k_h_chm", source="assumed", doc="vapour transport coefficient, walls")
    k_h_hx: float = _p(1.0e-3, "m/s", "k_h_hx", source="assumed", doc="vapour transport coefficient, heat exchanger")
    k_heat_1: float = _p(0.0, "W", "k_heat1", upper=50.0, source="assumed")
    k_heat_2: float = _p(0.0, "W", "k_heat2", upper=50.0, source="assumed")
    k_heat_3: float = _p(0.0, "W", "k_heat3", upper=50.0, source="assumed")
    k_heat_4: float = _p(0.0, "W", "k_heat4", upper=50.0, source="assumed")
    k_H_u: float = _p(1.0e-5, "kg/s", "k_H_u", source="assumed", doc="humidifier capacity")
    k_N_u: float = _p(1.0e-5, "kg/s", "k_N_u", source="assumed", doc="feeder capacity")
    k_W_hold: float = _p(0.01, "kg", "k_W_hold", source="assumed", doc="film holding capacity of a wet surface")
    k_runoff: float = _p(0.01, "1/s", "k_runoff", source="assumed", doc="drain rate of film above holding capacity")
    k_C_floor: float = _p(1.0e-6, "kg/m^3", "k_C_floor", source="assumed", doc="floor on C_air in O/C ratio")
    k_Vdot_supply: float = _p(2.5e-4, "m^3/s", "k_V̇_supply", source="assumed",
                              doc="supply air flow used for heating-energy accounting")

    # -- rate function shapes (placeholders for the growth-model responses) -
    rf_T_min: float = _p(12.0, "degC", "T_min", lower=-10.0, upper=25.0, source="assumed")
    rf_T_opt: float = _p(32.0, "degC", "T_opt", lower=20.0, upper=40.0, source="assumed")
    rf_T_max: float = _p(48.0, "degC", "T_max", lower=35.0, upper=55.0, source="assumed")
    rf_K_feed: float = _p(0.02, "kg", "K_feed", source="assumed", doc="half-saturation feed mass")
    rf_K_air: float = _p(1.0, "-", "K_air", source="assumed", doc="half-saturation O2/CO2 ratio")
    rf_B_half: float = _p(0.008, "g", "B_half", lower=1e-5, source="assumed",
                          doc="dry mass at which the size response of ingestion halves")
    k_rmaxT: float = _p(1.0, "-", "k_rmaxT", lower=1e-6)
    k_rmaxgm: float = _p(1.0, "-", "k_rmaxgm", lower=1e-6)
    k_rmaxA: float = _p(1.0, "-", "k_rmaxA", lower=1e-6)

    # ------------------------------------------------------------------
    def replace(self, **changes: float) -> "ParameterSet":
        """Return a copy with some values changed; keys may be symbols."""
        resolved = {}
        for key, value in changes.items():
            name = canonical_name(key)
            try:
                resolved[name] = float(value)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"parameter {key!r}: not a number ({value!r})") from exc
        return dataclasses.replace(self, **resolved)

    def to_dict(self) -> dict[str, float]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any] | None = None) -> "ParameterSet":
        return cls().replace(**dict(data or {}))

    def to_array(self, names: Iterable[str]) -> np.ndarray:
        return np.array([getattr(self, n) for n in names], dtype=float)

    def bounds(self, name: str) -> tuple[float, float]:
        info = parameter_info(name)
        return info["lower"], info["upper"]

    # derived quantities used in several places
    @property
    def eps_inges(self) -> float:
        """Feed efficiency ``1 - k_alpha_excr - k_alpha_assim``."""
        return 1.0 - self.k_alpha_excr - self.k_alpha_assim


@dataclass(frozen=True)
class ModelOptions:
    """Switches that select between nominal and alternative model forms.

    Attributes:
        tec_temperature_scale: ``"celsius"`` evaluates the Seebeck term of the
            TEC flux with the air temperature in degC; ``"kelvin"``
            uses absolute temperature.
        assimilation_taper: Multiply the assimilation rate by a linear ramp
            from 1 at ``k_TS1`` to 0 at ``k_TS2``.
        maturity_steepness: 0 selects the hard 0/1 maturity switch, a
            positive value a product of two logistic ramps with this
            steepness per development hour.
        eps_evap_continuous: Rescale ``k_G_W`` to ``1/k_W_per`` so the
            evaporation coefficient is continuous.
        evap_smoothing: 0 keeps the switch of the evaporation coefficient at
            ``k_W_per``; a positive value blends the two branches with a
            logistic of this width in moisture fraction.
        lewis_correction: Use ``k_he_a-m + k_hm_a-m * phi_W_evap`` for the
            medium-air convection coefficient instead of ``k_h_a-m``.
    """

    tec_temperature_scale: str = "celsius"
    assimilation_taper: bool = False
    maturity_steepness: float = 0.0
    eps_evap_continuous: bool = False
    lewis_correction: bool = True
    evap_smoothing: float = 0.0

    def __post_init__(self):
        if self.tec_temperature_scale not in ("celsius", "kelvin"):
            raise ConfigError(
                f"tec_temperature_scale must be 'celsius' or 'kelvin', got {self.tec_temperature_scale!r}"
            )
        if not math.isfinite(self.maturity_steepness) or self.maturity_steepness < 0:
            raise ConfigError("maturity_steepness must be a finite non-negative number")
        if not math.isfinite(self.evap_smoothing) or self.evap_smoothing < 0:
            raise ConfigError("evap_smoothing must be a finite non-negative number")

    def replace(self, **changes) -> "ModelOptions":
        return dataclasses.replace(self, **changes)


DEFAULT_PARAMETERS = ParameterSet()

_FIELDS = {f.name: f for f in fields(ParameterSet)}

_GREEK = {"α": "alpha", "ρ": "rho", "Σ": "S", "σ": "S"}

# symbol spellings that do not normalise onto the field name
_EXTRA_ALIASES = {
    "k_Q_miant": "k_Q_maint",
    "k_C_miant": "k_C_maint",
    "k_h_a-o": "k_h_o_c",
    "k_a,q": "k_alpha_q",
    "k_T_S1": "k_TS1",
    "k_T_S2": "k_TS2",
    "k_T_S3": "k_TS3",
    "k_lrv_C:O": "k_bio_CO",
    "k_C:O": "k_bio_CO",
}


def _normalise(key: str) -> str:
    # the combining dot above marks a flow rate (V-dot)
    text = unicodedata.normalize("NFD", key).replace("V̇", "Vdot").replace("̇", "")
    text = "".join(_GREEK.get(ch, ch) for ch in text)
    for sep in ("-", ",", ".", " "):
        text = text.replace(sep, "_")
    text = text.replace(":", "")
    while "__" in text:
        text = text.replace("__", "_")
    return text.strip("_")


_ALIASES: dict[str, str] = {}
for _name, _f in _FIELDS.items():
    _ALIASES[_name] = _name
    _ALIASES[_normalise(_f.metadata["symbol"])] = _name
for _alias, _target in _EXTRA_ALIASES.items():
    _ALIASES[_normalise(_alias)] = _target
    _ALIASES[_alias] = _target


def canonical_name(key: str) -> str:
    """Map a symbol or field name onto the :class:`ParameterSet` field.

    >>> canonical_name("k_α_excr")
    'k_alpha_excr'
    >>> canonical_name("k_h_a-c")
    'k_h_a_c'
    """
    if key in _ALIASES:
        return _ALIASES[key]
    norm = _normalise(key)
    if norm in _ALIASES:
        return _ALIASES[norm]
    raise ConfigError(f"unknown parameter {key!r}")


def parameter_info(name: str) -> dict[str, Any]:
    """Unit, symbol, bounds, source and description of one parameter."""
    f = _FIELDS[canonical_name(name)]
    return {"name": f.name, "default": f.default, **f.metadata}
