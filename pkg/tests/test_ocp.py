import numpy as np
import pytest

from hermetia.errors import SetupError, TranscriptionError
from hermetia.integrate import DisturbanceTrace
from hermetia.ocp import (
    FunctionDynamics,
    OcpSpec,
    ResourceAccount,
    Setpoints,
    SqpOptions,
    compare_resources,
    resource_account,
    setpoint_baseline,
    setpoint_inputs,
    solve,
    transcribe,
)
from hermetia.ocp.scenarios import scenario
from hermetia.reactor import SetupConfig
from hermetia.scenarios import tg2_initial_state
from hermetia.thermo import h_sat


def integrator_spec(N=12, **kw):
    """x' = u over one hour, x(T) = 1."""
    args = dict(model=FunctionDynamics(lambda x, u, d: u / 3600.0, 1, 1, substeps=2), x0=np.zeros(1),
                t_h=3600.0, dt=3600.0 / N, R=[1.0], terminal_weights={},
                terminal_bounds={"x0": (1.0, 1.0)}, rh_max=None)
    args.update(kw)
    return OcpSpec(**args)


def small_reactor_spec(N=3, hours=3.0):
    model = SetupConfig(kind="partial")
    return OcpSpec(model=model, x0=tg2_initial_state(model), t_h=hours * 3600.0, dt=hours * 3600.0 / N,
                   R=[0.01, 0.001, 0.001, 1000.0], S=[0.01] * 4,
                   u_bounds={"u_dT": (-5.0, 25.0), "u_dH": (0.0, 25e-3), "u_W_med": (0.0, 1e-7), "u_N": (0.0, 0.0)},
                   du_bounds={"u_dT": 3.0}, disturbance=[24.0, 0.5 * h_sat(24.0), 7.2e-4, 0.273], substeps=100)


def test_zero_dynamics_toy_gives_constant_input():
    sol = solve(transcribe(integrator_spec()))
    assert sol.converged
    assert np.allclose(sol.u[:, 0], 1.0, atol=1e-6)
    assert sol.x[-1, 0] == pytest.approx(1.0, abs=1e-8)


def test_tighter_input_bound_never_lowers_objective():
    loose = solve(transcribe(integrator_spec(R=[1.0], terminal_bounds={}, terminal_weights={"x0": -1.0})))
    tight = solve(transcribe(integrator_spec(R=[1.0], terminal_bounds={}, terminal_weights={"x0": -1.0},
                                             u_bounds={"u0": (0.0, 0.5)})))
    assert loose.converged and tight.converged
    assert tight.objective >= loose.objective - 1e-9
    assert np.all(tight.u <= 0.5 + 1e-9)


def test_rate_bounds_respected():
    spec = integrator_spec(du_bounds={"u0": 2.0}, u_init=[0.0])
    sol = solve(transcribe(spec))
    assert sol.converged
    steps = np.diff(np.r_[0.0, sol.u[:, 0]])
    assert np.all(np.abs(steps) <= 2.0 * spec.dt / 3600.0 + 1e-7)


def test_default_horizon_has_192_intervals():
    model = SetupConfig(kind="partial")
    nlp = transcribe(OcpSpec(model=model, x0=tg2_initial_state(model), substeps=10))
    assert nlp.N == 192
    assert nlp.n == 192 * (8 + 4) + 8


def test_pack_unpack_round_trip():
    nlp = transcribe(small_reactor_spec())
    rng = np.random.default_rng(0)
    w = rng.normal(size=nlp.n)
    X, U = nlp.unpack(w)
    assert np.array_equal(nlp.pack(X, U), w)
    Xm, Um = nlp.to_model_units(w)
    assert np.allclose(nlp.from_model_units(Xm, Um), w)


def test_defects_vanish_on_simulated_schedule():
    nlp = transcribe(small_reactor_spec())
    U = np.tile([2.0, 1e-3, 5e-8, 0.0], (nlp.N, 1))
    w = nlp.initial_guess(U)
    assert np.max(np.abs(nlp.defects(w))) < 1e-12


def test_defect_jacobian_matches_central_differences():
    nlp = transcribe(small_reactor_spec(N=2, hours=1.0))
    w = nlp.initial_guess(np.tile([2.0, 1e-3, 5e-8, 0.0], (nlp.N, 1)))
    _, _, _, J = nlp.defects_jac(w)
    J = J.toarray()
    free = np.flatnonzero(nlp.lb != nlp.ub)
    for i in free[::3]:
        h = 1e-5 * max(1.0, abs(w[i]))
        e = np.zeros(nlp.n)
        e[i] = h
        col = (nlp.defects(w + e) - nlp.defects(w - e)) / (2 * h)
        assert np.allclose(J[:, i], col, rtol=1e-3, atol=1e-6 * max(1.0, np.max(np.abs(col)))), i


def test_objective_gradient_and_terms():
    nlp = transcribe(small_reactor_spec())
    w = nlp.initial_guess(np.tile([2.0, 1e-3, 5e-8, 0.0], (nlp.N, 1)))
    terms = nlp.objective_terms(w)
    assert terms["total"] == pytest.approx(nlp.objective(w), rel=1e-12)
    rng = np.random.default_rng(1)
    v = rng.normal(size=nlp.n)
    h = 1e-6
    fd = (nlp.objective(w + h * v) - nlp.objective(w - h * v)) / (2 * h)
    assert nlp.gradient(w) @ v == pytest.approx(fd, rel=1e-6)


def test_terminal_weight_signs():
    spec = small_reactor_spec()
    c = spec.terminal_vector()
    names = spec.state_names
    assert c[names.index("B_dry")] == -10.0
    assert c[names.index("W_med")] == 10.0
    assert c[names.index("N_feed")] == c[names.index("N_exc")] == 10.0


def test_humidity_cap_rows():
    nlp = transcribe(small_reactor_spec())
    d = nlp.D[0]
    U = np.tile([0.0, 0.0, 0.0, 0.0], (nlp.N, 1))
    U[:, 1] = 0.95 * h_sat(d[0]) - d[1]
    w = nlp.initial_guess(U)
    g, G = nlp.ineq(w)
    assert np.allclose(g, 0.0, atol=1e-9)
    assert G.shape == (2 * nlp.N, nlp.n)


def test_spec_validation():
    with pytest.raises(SetupError):
        integrator_spec(dt=7.0)
    with pytest.raises(SetupError):
        integrator_spec(R=[-1.0])
    with pytest.raises(SetupError):
        integrator_spec(u_bounds={"u9": (0.0, 1.0)})
    with pytest.raises(SetupError):
        integrator_spec(u_bounds={"u0": (1.0, 0.0)})
    with pytest.raises(SetupError):
        integrator_spec(x0=np.zeros(2))


def test_infeasible_bounds_detected_at_transcription():
    with pytest.raises(TranscriptionError):
        transcribe(integrator_spec(x_bounds={"x0": (0.0, 0.5)}))
    with pytest.raises(TranscriptionError):
        transcribe(integrator_spec(x_bounds={"x0": (0.1, 2.0)}))


def test_max_iter_returns_partial_solution():
    sol = solve(transcribe(integrator_spec()), SqpOptions(max_iter=1))
    assert not sol.converged
    assert sol.status in ("max_iter", "infeasible")
    assert sol.u.shape == (12, 1)


# -- baseline and accounting ------------------------------------------------------


def test_setpoint_inputs_track_outside_air():
    model = SetupConfig(kind="partial")
    times = np.arange(0.0, 4 * 3600.0, 3600.0)
    dist = DisturbanceTrace.constant([33.0, 0.01, 7.2e-4, 0.273])
    U = setpoint_inputs(model, Setpoints(T_set=33.0, rh_set=0.6, u_W_med=14e-9), times, dist)
    assert np.all(U[:, 0] == 0.0)
    assert np.allclose(U[:, 1], 0.6 * h_sat(33.0) - 0.01)
    assert np.all(U[:, 2] == 14e-9)
    clamped = setpoint_inputs(model, Setpoints(T_set=40.0), times, dist, {"u_dT": (-5.0, 5.0)})
    assert np.all(clamped[:, 0] == 5.0)


def test_resource_account_hand_evaluation():
    model = SetupConfig(kind="partial")
    p = model.params
    U = np.array([[2.0, 1e-3, 1e-8, 0.0], [-3.0, -2e-3, 2e-8, 0.0]])
    x = tg2_initial_state(model)
    acct = resource_account(model, U, 3600.0, x)
    assert acct.heating_energy == pytest.approx(p.k_c_air * p.k_rho_air * p.k_Vdot_supply * 5.0 * 3600.0)
    assert acct.humidification_water == pytest.approx(p.k_Vdot_supply * 1e-3 * 3600.0)
    assert acct.substrate_water == pytest.approx(3e-8 * 3600.0)
    assert acct.N_med == pytest.approx(x[4] + x[5])
    with pytest.raises(SetupError):
        resource_account(SetupConfig(), U, 3600.0, x)


def test_compare_resources():
    a = ResourceAccount(10.0, 2.0, 0.0, 0.02, 1.0, 0.3)
    assert compare_resources(a, a) == {"heating_energy": 1.0, "humidification_water": 1.0,
                                       "substrate_water": None, "B_dry_delta": 0.0, "B_dry_ratio": 1.0}
    b = ResourceAccount(5.0, 4.0, 1.0, 0.03, 1.0, 0.3)
    r = compare_resources(b, a)
    assert r["heating_energy"] == 0.5 and r["humidification_water"] == 2.0
    assert r["B_dry_delta"] == pytest.approx(0.01)


def test_baseline_is_feasible_start_for_scenarios():
    for n in (1, 2, 3):
        sc = scenario(n, hours=6.0, substeps=100)
        spec = sc.spec
        base = setpoint_baseline(spec.model, sc.setpoints, (spec.t0, spec.t_h, spec.dt), sc.disturbance,
                                 spec.x0, u_bounds=spec.u_bounds)
        nlp = transcribe(spec)
        w = nlp.initial_guess(base.inputs)
        assert nlp.linear_violation(w) <= 1e-9, n
        assert np.max(nlp.ineq(w, jac=False)[0], initial=-1.0) <= 0.0, n


def test_scenario_presets():
    s2 = scenario(2, hours=2.0, substeps=10)
    s1 = scenario(1, hours=2.0, substeps=10)
    assert s2.disturbance.values[:, 0].mean() == pytest.approx(s1.disturbance.values[:, 0].mean() - 8.0)
    assert s2.spec.R[2] == 0.01 and s1.spec.R[2] == 0.001
    assert scenario(3, hours=2.0).spec.u_bounds["u_dH"] == (0.0, 0.0)
    with pytest.raises(SetupError):
        scenario(4)


def _growth_only_spec(a1):
    model = SetupConfig(kind="partial")
    return OcpSpec(model=model, x0=tg2_initial_state(model), t_h=4 * 3600.0, dt=3600.0, alpha=(a1, 0.0, 0.0),
                   u_bounds={"u_dT": (-5.0, 10.0), "u_dH": (0.0, 0.0), "u_W_med": (0.0, 0.0), "u_N": (0.0, 0.0)},
                   disturbance=[24.0, 0.5 * h_sat(24.0), 7.2e-4, 0.273], substeps=100)


def test_growth_only_pushes_heating_to_bound():
    # single-variable sweep oracle: terminal dry mass rises with a constant u_dT
    nlp = transcribe(_growth_only_spec(1.0))
    sweep = []
    for uT in np.linspace(-5.0, 10.0, 7):
        X, _ = nlp.to_model_units(nlp.initial_guess(np.tile([uT, 0.0, 0.0, 0.0], (nlp.N, 1))))
        sweep.append(X[-1, 0])
    assert np.all(np.diff(sweep) > 0)
    sol = solve(nlp)
    assert sol.converged
    assert np.allclose(sol.u[:, 0], 10.0, atol=1e-6)
    assert sol.x[-1, 0] >= max(sweep) - 1e-12


def test_larger_biomass_weight_never_lowers_harvest():
    harvest = [solve(transcribe(_growth_only_spec(a))).x[-1, 0] for a in (0.5, 5.0, 50.0)]
    assert np.all(np.diff(harvest) >= -1e-12)
