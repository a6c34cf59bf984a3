import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hermetia.errors import DataError, IntegrationError, SetupError, StepSizeUnderflow
from hermetia.integrate import (
    ControlSchedule,
    DisturbanceTrace,
    Event,
    EventSchedule,
    integrate_adaptive,
    integrate_rk4,
    preprocess_measurements,
    simulate,
)
from hermetia.reactor import SetupConfig
from hermetia.scenarios import Thermostat, tg2_initial_state


def decay(x, u, d):
    return -1.3 * x + u


def test_rk4_exact_for_time_polynomial():
    # x' = 3 t^2 through the disturbance channel; RK4 is exact for cubics
    d = lambda t: np.array([t, 0.0, 0.0, 0.0])  # noqa: E731
    tr = integrate_rk4(lambda x, u, dd: np.array([3.0 * dd[0] ** 2]), [0.0], None, d, 0.0, 2.0, 2.0)
    assert tr.final[0] == pytest.approx(8.0, rel=1e-6)


def test_rk4_fourth_order():
    errs = []
    for h in (0.2, 0.1, 0.05):
        tr = integrate_rk4(lambda x, u, d: -1.3 * x, [1.0], None, None, 0.0, 2.0, h)
        errs.append(abs(tr.final[0] - np.exp(-2.6)))
    slopes = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(slopes > 3.8)


def test_adaptive_matches_exact():
    tr = integrate_adaptive(lambda x, u, d: -1.3 * x, [1.0], None, None, 0.0, 2.0, tol=1e-10, atol=1e-12)
    assert tr.final[0] == pytest.approx(np.exp(-2.6), rel=1e-8)
    assert tr.stats["rejected"] >= 0 and tr.stats["steps"] > 0


def test_control_schedule_zero_order_hold():
    sched = ControlSchedule(np.array([0.0, 1.0, 2.0]), np.array([[1.0], [0.0]]))
    tr = integrate_rk4(decay, [0.0], sched, None, 0.0, 2.0, 0.01)
    x1 = (1 - np.exp(-1.3)) / 1.3
    assert tr.x[1, 0] == pytest.approx(x1, rel=1e-9)
    assert tr.final[0] == pytest.approx(x1 * np.exp(-1.3), rel=1e-9)
    assert np.array_equal(tr.u[:, 0], [1.0, 0.0, 0.0])


def test_schedule_validation():
    with pytest.raises(SetupError):
        ControlSchedule(np.array([0.0, 1.0]), np.zeros((2, 1)))
    with pytest.raises(SetupError):
        ControlSchedule(np.array([1.0, 0.0]), np.zeros((1, 1)))
    s = ControlSchedule.constant([0.5], 0.0, 10.0, dt=2.5)
    assert s.n_intervals == 4
    assert np.allclose(s.differences()[:, 0], [0.5, 0, 0, 0])


def test_disturbance_trace_interpolates_and_holds():
    tr = DisturbanceTrace(np.array([0.0, 10.0]), np.array([[0.0, 0, 0, 0], [10.0, 0, 0, 0]]))
    assert tr.at(5.0)[0] == 5.0
    assert tr.at(-3.0)[0] == 0.0 and tr.at(20.0)[0] == 10.0
    assert tr.shifted(1.5).at(5.0)[0] == 6.5
    with pytest.raises(SetupError):
        DisturbanceTrace(np.array([0.0]), np.zeros((1, 3)))


def test_event_validation():
    with pytest.raises(SetupError):
        Event(0.0, "teleport")
    with pytest.raises(SetupError):
        Event(0.0, "door", {"duration": 0})
    sched = EventSchedule((Event(5.0, "feed", {"mass": 1.0}), Event(1.0, "water", {"mass": 1.0})))
    assert [e.time for e in sched] == [1.0, 5.0]
    with pytest.raises(SetupError):
        sched.validate(0.0, 2.0)


def test_daily_sampling_schedule():
    s = EventSchedule.daily_sampling(10, 0.0, 3 * 86400.0)
    assert len(s) == 4
    assert s.door_level(86400.0 + 100.0) == 1.0
    assert s.door_level(86400.0 + 400.0) == 0.0


def test_sampling_event_removes_larvae(d_nominal):
    model = SetupConfig(kind="partial")
    x0 = tg2_initial_state(model, d_nominal)
    ev = EventSchedule((Event(1800.0, "sample", {"n": 100}),))
    tr = integrate_rk4(model, x0, np.zeros(4), d_nominal, 0.0, 3600.0, 3.6, events=ev)
    assert tr.L_num[0] == 2000 and tr.L_num[-1] == 1900
    free = integrate_rk4(model, x0, np.zeros(4), d_nominal, 0.0, 1800.0, 3.6)
    i = int(np.searchsorted(tr.t, 1800.0))
    assert tr.t[i] == 1800.0
    removed = free.column("B_med")[-1] - tr.column("B_med")[i]
    assert removed == pytest.approx(1e-3 * 100 * tr.column("B_wet")[i], rel=1e-12)


def test_sampling_too_many_larvae(d_nominal):
    model = SetupConfig(kind="open", L_num=5)
    x0 = tg2_initial_state(model, d_nominal)
    with pytest.raises(SetupError):
        integrate_rk4(model, x0, np.zeros(1), d_nominal, 0.0, 100.0, events=[Event(10.0, "sample", {"n": 6})])


def test_door_event_requires_closed(d_nominal):
    model = SetupConfig(kind="partial")
    x0 = tg2_initial_state(model, d_nominal)
    with pytest.raises(SetupError):
        integrate_rk4(model, x0, np.zeros(4), d_nominal, 0.0, 100.0, events=[Event(10.0, "door", {"duration": 5})])


def test_door_event_overrides_input(closed_model, x_closed, d_nominal):
    ev = EventSchedule((Event(600.0, "door", {"duration": 300.0}),))
    tr = integrate_rk4(closed_model, x_closed, np.zeros(14), d_nominal, 0.0, 1800.0, 3.6, events=ev)
    u_d = tr.column("u_d")
    assert u_d[np.searchsorted(tr.t, 600.0)] == 1.0
    assert u_d[0] == 0.0 and u_d[-1] == 0.0


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_nonfinite_raises_integration_error():
    with pytest.raises(IntegrationError) as e:
        integrate_rk4(lambda x, u, d: x ** 2, [1.0], None, None, 0.0, 10.0, 0.1)
    assert e.value.time is not None
    assert np.all(np.isfinite(e.value.state))


def test_step_underflow():
    with pytest.raises(StepSizeUnderflow):
        integrate_adaptive(lambda x, u, d: x ** 2, [1.0], None, None, 0.0, 10.0, tol=1e-8, max_steps=200)


def test_simulate_dispatch(d_nominal):
    model = SetupConfig(kind="open")
    x0 = tg2_initial_state(model, d_nominal)
    with pytest.raises(SetupError):
        simulate(model, x0, np.zeros(1), d_nominal, method="euler")
    with pytest.raises(SetupError):
        simulate(model, x0, np.zeros(1), d_nominal, 10.0, 5.0)


def test_policy_called_at_control_boundaries(closed_model, x_closed, d_nominal):
    calls = []

    def policy(t, x):
        calls.append(t)
        return np.zeros(14)

    integrate_rk4(closed_model, x_closed, policy, d_nominal, 0.0, 600.0, 3.6, control_dt=60.0)
    assert np.allclose(calls, np.arange(0.0, 600.0, 60.0))


def test_thermostat_holds_air_temperature(closed_model, x_closed, d_nominal):
    th = Thermostat()
    tr = integrate_rk4(closed_model, x_closed, th, d_nominal, 0.0, 6 * 3600.0, 3.6, control_dt=th.sample_dt)
    T_air = tr.column("T_air")
    assert abs(T_air[-1] - th.T_set) < 1.0
    u_T = tr.column("u_T")
    assert np.all((-1.0 <= u_T) & (u_T <= 1.0))


def test_preprocess_constant_is_fixed_point():
    t = np.arange(0.0, 6000.0, 10.0)
    ts, v = preprocess_measurements(t, np.full(t.size, 3.0), window=50, resample_dt=600.0)
    assert np.allclose(v, 3.0)
    assert np.allclose(np.diff(ts), 600.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 30), st.floats(-5, 5), st.floats(-1, 1))
def test_preprocess_preserves_lines_in_interior(window, a, b):
    t = np.arange(200.0)
    ts, v = preprocess_measurements(t, a + b * t, window=window, resample_dt=None)
    lo, hi = (window - 1) // 2, window // 2
    # centred window is exact for linear signals where it is symmetric
    inner = slice(lo, t.size - hi)
    if window % 2:
        assert np.allclose(v[inner], (a + b * t)[inner])
    else:
        assert np.allclose(v[inner], (a + b * (t + 0.5))[inner])


def test_preprocess_errors():
    with pytest.raises(DataError):
        preprocess_measurements([0, 1, 2], [1, 2, 3], window=5)
    with pytest.raises(DataError):
        preprocess_measurements([0, 2, 1], [1, 2, 3], window=1)
    with pytest.raises(DataError):
        preprocess_measurements([0, 1, 2], [1, 2], window=1)
