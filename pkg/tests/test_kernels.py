import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hermetia import _fallback, _layout, kernels
from hermetia.reactor import SetupConfig, evaluate
from hermetia.params import ModelOptions
from hermetia.scenarios import tg2_initial_state

cython = pytest.importorskip("hermetia._ckernels")

KIND_INPUTS = {
    "closed": np.array([0.5, 0.0, 0.3, 0.2, 0.1, 0.0, 1.0, 0.0, 1.0, 0.0, 0.5, 0.0, 0.0, 0.0]),
    "partial": np.array([2.0, 1e-3, 1e-7, 0.0]),
    "open": np.array([1e-7]),
}


def test_param_layouts_agree():
    assert tuple(cython.PARAM_NAMES) == _layout.PARAM_NAMES
    assert cython.N_PARAMS == _layout.N_PARAMS


def test_backend_selection():
    assert kernels.get_backend("python") is _fallback
    assert kernels.get_backend("cython") is cython
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")


@pytest.mark.parametrize("kind", ["closed", "partial", "open"])
@pytest.mark.parametrize("options", [ModelOptions(), ModelOptions(maturity_steepness=1.0, evap_smoothing=0.01),
                                     ModelOptions(tec_temperature_scale="kelvin", lewis_correction=False)])
def test_three_implementations_agree(kind, options, d_nominal):
    model = SetupConfig(kind=kind, options=options)
    x = tg2_initial_state(model, d_nominal)
    u = KIND_INPUTS[kind]
    p = model.packed
    ref = evaluate(model, x, u, d_nominal)[0]
    py = _fallback.rhs(model.kind_id, x, u, d_nominal, p)
    cy = cython.rhs(model.kind_id, x, u, d_nominal, p)
    scale = np.maximum(np.abs(ref), 1e-30)
    assert np.all(np.abs(py - ref) / scale < 1e-9)
    assert np.all(np.abs(cy - ref) / scale < 1e-9)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.0, 0.3), st.floats(0.0, 0.9), st.floats(100.0, 350.0), st.floats(0.1, 2.0),
       st.floats(15.0, 40.0), st.floats(0.2, 0.95))
def test_backends_agree_on_random_closed_states(B_dry, dW, T_sigma, W_med, T_med, rh):
    from hermetia.thermo import h_sat

    model = SetupConfig()
    d = np.array([24.0, 0.5 * h_sat(24.0), 7.2e-4, 0.273])
    x = tg2_initial_state(model, d, B_dry=B_dry * 1e-3, B_wet=(B_dry + dW) * 1e-3, T_sigma=T_sigma,
                          W_med=W_med, T_med=T_med)
    x[model.state_names.index("H_air")] = rh * h_sat(x[8])
    u = KIND_INPUTS["closed"]
    ref = evaluate(model, x, u, d)[0]
    cy = cython.rhs(0, x, u, d, model.packed)
    assert np.allclose(cy, ref, rtol=1e-9, atol=1e-300)


@pytest.mark.parametrize("kind", ["closed", "partial"])
def test_propagation_agrees(kind, d_nominal):
    model = SetupConfig(kind=kind)
    x = tg2_initial_state(model, d_nominal)
    u = KIND_INPUTS[kind]
    d1 = d_nominal + np.array([1.0, 0.0, 0.0, 0.0])
    a = _fallback.propagate(model.kind_id, x, u, d_nominal, d1, 600.0, 200, model.packed)
    b = cython.propagate(model.kind_id, x, u, d_nominal, d1, 600.0, 200, model.packed)
    assert np.allclose(a, b, rtol=1e-11, atol=0)


def test_jacobians_agree(d_nominal):
    model = SetupConfig(kind="partial")
    x = tg2_initial_state(model, d_nominal)
    X0 = np.vstack([x, x])
    U = np.vstack([KIND_INPUTS["partial"]] * 2)
    D = np.vstack([d_nominal] * 3)
    sx = np.maximum(np.abs(x), 1e-6) * 1e-6
    su = np.array([1e-6, 1e-9, 1e-12, 1e-9])
    a = _fallback.propagate_jac_many(1, X0, U, D, 600.0, 10, model.packed, sx, su)
    b = cython.propagate_jac_many(1, X0, U, D, 600.0, 10, model.packed, sx, su)
    for ra, rb in zip(a, b):
        assert np.allclose(ra, rb, rtol=1e-6, atol=1e-12)
