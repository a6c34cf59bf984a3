"""Backend selection for the hot kernels.

The compiled extension is used when it imports; setting the environment
variable ``HERMETIA_PURE_PYTHON=1`` forces the pure-Python twin.  Both
backends expose ``rhs``, ``propagate``, ``propagate_record``,
``propagate_many`` and ``propagate_jac_many`` with identical signatures.
"""

from __future__ import annotations

import os

import numpy as np

from . import _fallback
from ._layout import N_PARAMS, PARAM_INDEX, PARAM_NAMES
from .params import ModelOptions, ParameterSet

__all__ = ["backend", "BACKEND", "fallback", "compiled", "pack_params", "get_backend"]

fallback = _fallback

try:
    from . import _ckernels as compiled
except ImportError:  # extension not built
    compiled = None

if compiled is not None and os.environ.get("HERMETIA_PURE_PYTHON", "") not in ("1", "true", "yes"):
    backend = compiled
else:
    backend = _fallback

BACKEND: str = backend.BACKEND


def get_backend(name: str | None = None):
    """Return the kernel module for ``"cython"``, ``"python"`` or the active default."""
    if name is None:
        return backend
    if name == "python":
        return _fallback
    if name == "cython":
        if compiled is None:
            raise ImportError("compiled kernels are not available")
        return compiled
    raise ValueError(f"unknown backend {name!r}")


def pack_params(
    p: ParameterSet, options: ModelOptions | None = None, L_num: float = 0.0
) -> np.ndarray:
    """Flatten parameters, model switches and the larvae count for the kernels."""
    options = options or ModelOptions()
    out = np.empty(N_PARAMS)
    values = p.to_dict()
    switches = {
        "L_num": float(L_num),
        "opt_tec_kelvin": 1.0 if options.tec_temperature_scale == "kelvin" else 0.0,
        "opt_taper": 1.0 if options.assimilation_taper else 0.0,
        "opt_mat_steep": float(options.maturity_steepness),
        "opt_eps_cont": 1.0 if options.eps_evap_continuous else 0.0,
        "opt_lewis": 1.0 if options.lewis_correction else 0.0,
        "opt_evap_smooth": float(options.evap_smoothing),
    }
    for i, name in enumerate(PARAM_NAMES):
        out[i] = switches[name] if name in switches else values[name]
    return out


def set_L_num(packed: np.ndarray, L_num: float) -> np.ndarray:
    out = packed.copy()
    out[PARAM_INDEX["L_num"]] = L_num
    return out
