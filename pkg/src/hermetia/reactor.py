"""Right-hand sides of the closed, partially closed and open setups.

Two implementations exist.  :func:`evaluate` assembles the balances from the
building blocks of :mod:`hermetia.model_core` and :mod:`hermetia.thermo` and
returns every flux; it is the reference used for reports and tests.  The
flat kernels selected by :mod:`hermetia.kernels` compute the same
derivatives without the bookkeeping and drive all integration.

Balances (closed setup, ``phi_W_L`` evaporation-positive, exchange fluxes
into the chamber positive)::

    k_C_air dT_air/dt = Q_LED + Q_hx-a + Q_exch + Q_leak + Q_door + Q_m-a + Q_a-c
    k_C_med dT_med/dt = Q_bio - Q_m-a - Q_m-c - Q_L,med
    k_C_hx  dT_hx/dt  = Q_TEC - Q_hx-a - Q_c-hx - Q_L,hx
    k_C_chm dT_chm/dt = -Q_a-c + Q_c-o + Q_c-hx + Q_m-c - Q_L,chm
    V dH/dt = H_u + H_exch + H_leak + H_door + W_L,med + W_L,chm + W_L,hx
    dW_med/dt = W_u - W_L,med - W_bio
    dW_chm/dt = -W_L,chm - W_chm,out          (same for hx)
    V dC/dt = C_exch + C_leak + C_door + C_bio
    V dO/dt = O_exch + O_leak + O_door - k_bio_C:O C_bio
"""

from __future__ import annotations

import warnings
from collections.abc import Mapping
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from . import kernels
from ._layout import (
    CLOSED_INPUTS,
    CLOSED_STATES,
    DISTURBANCES,
    INPUT_NAMES,
    KINDS,
    KIND_CLOSED,
    KIND_PARTIAL,
    STATE_NAMES,
)
from .errors import DegenerateStateError, SetupError
from .model_core import (
    DEFAULT_RATE_FUNCTIONS,
    BioRates,
    LarvaState,
    MediumState,
    RateFunctionSet,
    larva_fluxes,
)
from .params import DEFAULT_PARAMETERS, ModelOptions, ParameterSet
from .thermo import (
    AirVolume,
    Surface,
    condensate_runoff,
    conductive_flux,
    convective_flux,
    eps_evap,
    evap_cond_flux,
    exchange_flow,
    exchange_heat_flux,
    film_eps,
    gas_exchange_flux,
    heat_capacities,
    latent_heat_flux,
    led_heat_flux,
    lewis_coefficient,
    tec_heat_flux,
    vapor_exchange_flux,
    water_input_flux,
)

__all__ = [
    "CLOSED_STATES",
    "CLOSED_INPUTS",
    "DISTURBANCES",
    "TABLE_A1_SYMBOLS",
    "Disturbance",
    "SetupConfig",
    "FluxReport",
    "evaluate",
    "rhs_closed",
    "rhs_partial",
    "rhs_open",
    "flux_report",
]

# Flux symbols in ASCII transliteration; the door heat exchange is keyed phi_Q_door.
TABLE_A1_SYMBOLS = (
    "phi_B_ing", "phi_B_excr", "phi_B_assim", "phi_B_eff", "phi_B_mat", "phi_B_maint",
    "phi_W_assim", "phi_W_maint",
    "phi_Q_bio", "phi_C_bio", "phi_O_bio", "phi_N_ing", "phi_N_exc", "phi_N_biome",
    "phi_Q_LED", "phi_Q_hx-a", "phi_Q_exch", "phi_Q_leak", "phi_Q_door", "phi_Q_m-a",
    "phi_Q_a-c", "phi_Q_m-c", "phi_Q_TEC", "phi_Q_c-hx", "phi_Q_c-o",
    "phi_Q_L_med", "phi_Q_L_hx", "phi_Q_L_chm",
    "phi_H_u", "phi_H_exch", "phi_H_leak", "phi_H_door",
    "phi_W_L_chm", "phi_W_L_hx", "phi_W_L_med", "phi_W_u", "phi_W_bio",
    "phi_W_chm_out", "phi_W_hx_out",
    "phi_C_exch", "phi_C_leak", "phi_O_exch", "phi_O_leak",
    "phi_N_u", "phi_Vdot_u",
)

FLUX_UNITS = {
    **{k: "g/s" for k in ("phi_B_ing", "phi_B_excr", "phi_B_assim", "phi_B_eff", "phi_B_mat",
                          "phi_B_maint", "phi_W_assim", "phi_W_maint", "phi_N_ing", "phi_N_exc",
                          "phi_N_biome")},
    **{k: "W" for k in TABLE_A1_SYMBOLS if k.startswith("phi_Q")},
    "phi_Vdot_u": "m^3/s",
}
for _k in TABLE_A1_SYMBOLS:
    FLUX_UNITS.setdefault(_k, "kg/s")


@dataclass(frozen=True)
class Disturbance:
    """Outside air: temperature [degC] and vapour, CO2, O2 densities [kg/m^3]."""

    T_out: float
    H_out: float
    C_out: float = 7.2e-4
    O_out: float = 0.273

    def __post_init__(self):
        for name in ("H_out", "C_out", "O_out"):
            if getattr(self, name) < 0:
                raise SetupError(f"{name} must be non-negative")

    def as_array(self) -> np.ndarray:
        return np.array([self.T_out, self.H_out, self.C_out, self.O_out])

    @classmethod
    def from_array(cls, d: Sequence[float]) -> "Disturbance":
        if len(d) != 4:
            raise SetupError(f"disturbance needs 4 entries {DISTURBANCES}, got {len(d)}")
        return cls(*(float(v) for v in d))


@dataclass(frozen=True)
class SetupConfig:
    """Which setup is simulated, with which constants and how many larvae.

    In the partial and open setups ``u_W_med`` is a water mass flow [kg/s];
    in the closed setup it is the normalised pump signal.
    """

    kind: str = "closed"
    params: ParameterSet = DEFAULT_PARAMETERS
    L_num: float = 2000.0
    options: ModelOptions = field(default_factory=ModelOptions)
    rate_functions: RateFunctionSet = DEFAULT_RATE_FUNCTIONS

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SetupError(f"unknown setup kind {self.kind!r}; use one of {sorted(KINDS)}")
        if self.L_num < 0:
            raise SetupError("L_num must be non-negative")
        object.__setattr__(self, "_packed", kernels.pack_params(self.params, self.options, self.L_num))

    # -- shape information ---------------------------------------------
    @property
    def kind_id(self) -> int:
        return KINDS[self.kind]

    @property
    def state_names(self) -> tuple[str, ...]:
        return STATE_NAMES[self.kind_id]

    @property
    def input_names(self) -> tuple[str, ...]:
        return INPUT_NAMES[self.kind_id]

    @property
    def nx(self) -> int:
        return len(self.state_names)

    @property
    def nu(self) -> int:
        return len(self.input_names)

    @property
    def packed(self) -> np.ndarray:
        """Flat parameter vector for the kernels (read-only copy)."""
        return self._packed.copy()

    @property
    def uses_kernels(self) -> bool:
        return self.rate_functions.is_default

    def replace(self, **changes) -> "SetupConfig":
        data = {
            "kind": self.kind,
            "params": self.params,
            "L_num": self.L_num,
            "options": self.options,
            "rate_functions": self.rate_functions,
        }
        data.update(changes)
        return SetupConfig(**data)

    def with_params(self, **symbols: float) -> "SetupConfig":
        return self.replace(params=self.params.replace(**symbols))

    def zero_input(self) -> np.ndarray:
        return np.zeros(self.nu)

    def state(self, **values: float) -> np.ndarray:
        """State vector from keyword values; missing entries are 0."""
        x = np.zeros(self.nx)
        for k, v in values.items():
            if k not in self.state_names:
                raise SetupError(f"{k!r} is not a state of the {self.kind} setup")
            x[self.state_names.index(k)] = v
        return x

    def validate_input(self, u: Sequence[float]) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape != (self.nu,):
            raise SetupError(f"{self.kind} setup takes {self.nu} inputs {self.input_names}, got shape {u.shape}")
        if self.kind == "closed":
            for name, val in zip(self.input_names, u):
                lo = -1.0 if name == "u_T" else 0.0
                if not lo <= val <= 1.0:
                    raise SetupError(f"{name}={val} outside [{lo}, 1]")
        elif u[self.input_names.index("u_W_med")] < 0:
            raise SetupError("u_W_med must be non-negative")
        return u

    # -- evaluation ----------------------------------------------------
    def rhs(self, x, u, d) -> np.ndarray:
        """State derivative at one instant."""
        if self.uses_kernels:
            x = np.asarray(x, dtype=float)
            u = np.asarray(u, dtype=float)
            d = np.asarray(d, dtype=float)
            _check_dims(self, x, u, d)
            return kernels.backend.rhs(self.kind_id, x, u, d, self._packed)
        return evaluate(self, x, u, d)[0]

    def fluxes(self, x, u, d) -> "FluxReport":
        return evaluate(self, x, u, d)[1]


class FluxReport(Mapping):
    """Every named flux at one instant.

    Behaves as a read-only mapping over exactly the TABLE_A1_SYMBOLS keys.  Growth
    rates are kept in :attr:`rates`; capacities, the evaporation and
    condensation split, door gas fluxes and the derivative vector are in
    :attr:`extra`.
    """

    def __init__(self, fluxes: dict[str, float], rates: BioRates, extra: dict[str, object]):
        missing = set(TABLE_A1_SYMBOLS) - set(fluxes)
        unknown = set(fluxes) - set(TABLE_A1_SYMBOLS)
        if missing or unknown:
            raise ValueError(f"flux report keys mismatch: missing {sorted(missing)}, unknown {sorted(unknown)}")
        self.fluxes = {k: float(fluxes[k]) for k in TABLE_A1_SYMBOLS}
        self.rates = rates
        self.extra = extra

    def __getitem__(self, key: str) -> float:
        return self.fluxes[key]

    def __iter__(self) -> Iterator[str]:
        return iter(self.fluxes)

    def __len__(self) -> int:
        return len(self.fluxes)

    def __repr__(self) -> str:
        return f"FluxReport({len(self)} fluxes)"

    def as_row(self, include_rates: bool = True) -> dict[str, float]:
        """Flat dict for export: fluxes, then growth rates."""
        row = dict(self.fluxes)
        if include_rates:
            for name in ("r_assim", "r_maint", "r_mat", "r_B_mat", "r_T", "r_Fgrw", "r_A", "r_dev"):
                row[name] = float(getattr(self.rates, name))
        return row


def _check_dims(model: SetupConfig, x: np.ndarray, u: np.ndarray, d: np.ndarray) -> None:
    if x.shape != (model.nx,):
        raise SetupError(f"{model.kind} setup has {model.nx} states, got shape {x.shape}")
    if u.shape != (model.nu,):
        raise SetupError(f"{model.kind} setup takes {model.nu} inputs {model.input_names}, got shape {u.shape}")
    if d.shape != (4,):
        raise SetupError(f"disturbance needs 4 entries {DISTURBANCES}, got shape {d.shape}")


def evaluate(model: SetupConfig, x, u, d) -> tuple[np.ndarray, FluxReport]:
    """Reference evaluation of derivatives and the full flux report."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    d = np.asarray(d, dtype=float)
    _check_dims(model, x, u, d)
    p, opt, kind = model.params, model.options, model.kind_id
    L = model.L_num
    B_dry, B_wet, T_S, W_med, N_feed, N_exc, B_med, T_med = (float(v) for v in x[:8])
    T_out, H_out, C_out, O_out = (float(v) for v in d)

    if kind == KIND_CLOSED:
        T_air, H_air, C_air, O_air, T_chm, T_hx, W_chm, W_hx = (float(v) for v in x[8:16])
        u_v, u_d, u_T, u_H, u_W, u_N = (float(v) for v in u[:6])
        u_I = [float(v) for v in u[8:12]]
        phi_W_u = water_input_flux(u_W, p)
    else:
        if kind == KIND_PARTIAL:
            T_air, H_air = T_out + float(u[0]), H_out + float(u[1])
            phi_W_u, u_N = float(u[2]), float(u[3])
        else:
            T_air, H_air = T_out, H_out
            phi_W_u, u_N = float(u[0]), 0.0
        C_air, O_air = C_out, O_out
        T_chm = T_hx = T_air
        W_chm = W_hx = 0.0
        u_v = u_d = u_T = u_H = 0.0
        u_I = [0.0, 0.0, 0.0, 0.0]

    larva = LarvaState(B_dry, B_wet, T_S)
    med = MediumState(N_feed, N_exc, W_med, T_med, L, B_med, L * B_dry)
    A_air = O_air / max(C_air, p.k_C_floor)
    rates, bf, dB_dry, dB_wet = larva_fluxes(larva, med, A_air, model.rate_functions, p, opt)
    phi_N_biome = p.k_N_biome * max(N_feed, 0.0)  # kg/s
    phi_N_u = p.k_N_u * u_N

    # growing medium
    eps = eps_evap(med.W_med_pct, p, continuous=opt.eps_evap_continuous, smoothing=opt.evap_smoothing)
    evap_med, cond_med, W_L_med = evap_cond_flux(Surface(p.k_A_m, p.k_h_a_m, p.k_h_med, T_med), H_air, eps, p)
    h_am = lewis_coefficient(evap_med, p) if opt.lewis_correction else p.k_h_a_m
    Q_ma = convective_flux(Surface(p.k_A_m, h_am, p.k_h_med, T_med), T_air)
    Q_mc = conductive_flux(p.k_A_m_c, p.k_U_m_c, T_med, T_chm)
    Q_L_med = latent_heat_flux(T_med, W_L_med, p)
    c_med, c_air, c_chm = heat_capacities(med, AirVolume(p.k_V_chm, T_air, H_air, C_air, O_air), W_chm, p)

    dx = np.zeros(model.nx)
    dx[0] = dB_dry
    dx[1] = dB_wet
    dx[2] = rates.r_dev / 3600.0
    dx[3] = phi_W_u - W_L_med - bf.phi_W_bio
    dx[4] = phi_N_u - 1e-3 * bf.phi_N_ing - phi_N_biome
    dx[5] = 1e-3 * bf.phi_N_exc
    dx[6] = dx[3] + dx[4] + dx[5] + 1e-3 * L * dB_wet
    dx[7] = (bf.phi_Q_bio - Q_ma - Q_mc - Q_L_med) / c_med

    fl = {k: 0.0 for k in TABLE_A1_SYMBOLS}
    fl.update(
        phi_B_ing=bf.phi_B_ing, phi_B_excr=bf.phi_B_excr, phi_B_assim=bf.phi_B_assim,
        phi_B_eff=bf.phi_B_eff, phi_B_mat=bf.phi_B_mat, phi_B_maint=bf.phi_B_maint,
        phi_W_assim=bf.phi_W_assim, phi_W_maint=bf.phi_W_maint,
        phi_Q_bio=bf.phi_Q_bio, phi_C_bio=bf.phi_C_bio, phi_O_bio=bf.phi_O_bio,
        phi_N_ing=bf.phi_N_ing, phi_N_exc=bf.phi_N_exc, phi_N_biome=1e3 * phi_N_biome,
        phi_W_L_med=W_L_med, phi_W_u=phi_W_u, phi_W_bio=bf.phi_W_bio, phi_N_u=phi_N_u,
        **{"phi_Q_m-a": Q_ma, "phi_Q_m-c": Q_mc, "phi_Q_L_med": Q_L_med},
    )
    extra: dict[str, object] = {
        "k_C_med": c_med,
        "k_C_air": c_air,
        "k_C_chm": c_chm,
        "k_C_hx": p.k_C_hx,
        "phi_W_evap_med": evap_med,
        "phi_W_cond_med": cond_med,
        "A_air": A_air,
        "W_med_pct": med.W_med_pct,
        "T_air": T_air,
        "H_air": H_air,
    }

    if kind == KIND_CLOSED:
        Vdot_u = exchange_flow("vent", u_v, p)
        Q_exch = exchange_heat_flux("vent", u_v, T_out, T_air, p)
        Q_leak = exchange_heat_flux("leak", 0.0, T_out, T_air, p)
        Q_door = exchange_heat_flux("door", u_d, T_out, T_air, p)
        Q_led = led_heat_flux(u_I, p)
        Q_hxa = convective_flux(Surface(p.k_A_hx, p.k_h_a_hx, p.k_h_hx, T_hx), T_air)
        Q_ac = convective_flux(Surface(p.k_A_c, p.k_h_a_c, p.k_h_chm, T_chm), T_air)
        dx[8] = (Q_led + Q_hxa + Q_exch + Q_leak + Q_door + Q_ma + Q_ac) / c_air

        evap_chm, cond_chm, W_L_chm = evap_cond_flux(
            Surface(p.k_A_c, p.k_h_a_c, p.k_h_chm, T_chm), H_air, film_eps(W_chm, p), p
        )
        evap_hx, cond_hx, W_L_hx = evap_cond_flux(
            Surface(p.k_A_hx, p.k_h_a_hx, p.k_h_hx, T_hx), H_air, film_eps(W_hx, p), p
        )
        out_chm = condensate_runoff(W_chm, p)
        out_hx = condensate_runoff(W_hx, p)

        H_u = p.k_H_u * u_H
        H_exch = vapor_exchange_flux("vent", u_v, H_out, H_air, p)
        H_leak = vapor_exchange_flux("leak", 0.0, H_out, H_air, p)
        H_door = vapor_exchange_flux("door", u_d, H_out, H_air, p)
        dx[9] = (H_u + H_exch + H_leak + H_door + W_L_med + W_L_chm + W_L_hx) / p.k_V_chm

        C_exch = gas_exchange_flux("vent", u_v, C_out, C_air, p)
        C_leak = gas_exchange_flux("leak", 0.0, C_out, C_air, p)
        C_door = gas_exchange_flux("door", u_d, C_out, C_air, p)
        O_exch = gas_exchange_flux("vent", u_v, O_out, O_air, p)
        O_leak = gas_exchange_flux("leak", 0.0, O_out, O_air, p)
        O_door = gas_exchange_flux("door", u_d, O_out, O_air, p)
        dx[10] = (C_exch + C_leak + C_door + bf.phi_C_bio) / p.k_V_chm
        dx[11] = (O_exch + O_leak + O_door - bf.phi_O_bio) / p.k_V_chm

        Q_tec = tec_heat_flux(u_T, T_air, T_out, p, opt.tec_temperature_scale)
        Q_chx = conductive_flux(p.k_A_hx_c, p.k_U_hx_c, T_hx, T_chm)
        Q_L_hx = latent_heat_flux(T_hx, W_L_hx, p)
        Q_co = convective_flux(Surface(p.k_A_c, p.k_h_o_c, 0.0, T_out), T_chm)
        Q_L_chm = latent_heat_flux(T_chm, W_L_chm, p)
        if not p.k_C_hx > 0:
            raise DegenerateStateError(f"k_C_hx = {p.k_C_hx} is not positive")
        dx[12] = (-Q_ac + Q_co + Q_chx + Q_mc - Q_L_chm) / c_chm
        dx[13] = (Q_tec - Q_hxa - Q_chx - Q_L_hx) / p.k_C_hx
        dx[14] = -W_L_chm - out_chm
        dx[15] = -W_L_hx - out_hx

        fl.update(
            phi_Q_LED=Q_led, phi_Q_exch=Q_exch, phi_Q_leak=Q_leak, phi_Q_door=Q_door,
            phi_Q_TEC=Q_tec, phi_Q_L_hx=Q_L_hx, phi_Q_L_chm=Q_L_chm,
            phi_H_u=H_u, phi_H_exch=H_exch, phi_H_leak=H_leak, phi_H_door=H_door,
            phi_W_L_chm=W_L_chm, phi_W_L_hx=W_L_hx, phi_W_chm_out=out_chm, phi_W_hx_out=out_hx,
            phi_C_exch=C_exch, phi_C_leak=C_leak, phi_O_exch=O_exch, phi_O_leak=O_leak,
            phi_Vdot_u=Vdot_u,
            **{"phi_Q_hx-a": Q_hxa, "phi_Q_a-c": Q_ac, "phi_Q_c-hx": Q_chx, "phi_Q_c-o": Q_co},
        )
        extra.update(
            phi_C_door=C_door, phi_O_door=O_door,
            phi_W_evap_chm=evap_chm, phi_W_cond_chm=cond_chm,
            phi_W_evap_hx=evap_hx, phi_W_cond_hx=cond_hx,
        )

    extra["dxdt"] = dx.copy()
    return dx, FluxReport(fl, rates, extra)


def _as_model(p, kind: str, L_num, options) -> SetupConfig:
    if isinstance(p, SetupConfig):
        if p.kind != kind:
            raise SetupError(f"expected a {kind} setup, got {p.kind}")
        return p
    return SetupConfig(kind=kind, params=p or DEFAULT_PARAMETERS, L_num=L_num, options=options or ModelOptions())


def rhs_closed(x, u, d, p=None, L_num: float = 2000.0, options: ModelOptions | None = None):
    """Closed-setup derivatives and flux report; ``p`` may be a ParameterSet or a SetupConfig."""
    return evaluate(_as_model(p, "closed", L_num, options), x, u, d)


def rhs_partial(x, u, d, p=None, L_num: float = 2000.0, options: ModelOptions | None = None):
    """Partial-setup derivatives; inputs are ``[u_dT, u_dH, u_W_med, u_N]``."""
    return evaluate(_as_model(p, "partial", L_num, options), x, u, d)


def rhs_open(x, u, d, p=None, L_num: float = 2000.0, options: ModelOptions | None = None) -> np.ndarray:
    """Open-setup derivatives; the only input is the water mass flow ``u_W_med``."""
    return evaluate(_as_model(p, "open", L_num, options), x, u, d)[0]


def flux_report(x, u, d, p=None, kind: str = "closed", L_num: float = 2000.0,
                options: ModelOptions | None = None) -> FluxReport:
    model = _as_model(p, kind, L_num, options)
    if x[1] < x[0]:
        warnings.warn("B_wet is below B_dry; reported unclamped", RuntimeWarning, stacklevel=2)
    return evaluate(model, x, u, d)[1]
