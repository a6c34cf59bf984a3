import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hermetia.errors import DataError, EstimationError, IntegrationError, SetupError
from hermetia.estimate import (
    Dataset,
    EstimationProblem,
    fit,
    objective,
    r_squared,
    residuals,
    synthetic_tg2_data,
    tg2_problem,
)

T = np.linspace(0.0, 10.0, 21)


def linear_problem(scaling=None, data_p=2.0, mask=None):
    y = np.column_stack([data_p * T, 3.0 + 0 * T])
    data = Dataset(T, ("y", "c"), y, mask)
    return EstimationProblem({"p": (0.0, 5.0)}, {"p": 1.0}, data,
                             lambda prm: np.column_stack([prm["p"] * T, 3.0 + 0 * T]), scaling=scaling)


def test_linear_toy_residuals():
    r = residuals(linear_problem(), [3.0])
    assert np.allclose(r[: T.size], -T)
    assert np.allclose(r[T.size:], 0.0)


def test_truth_gives_zero_residuals():
    assert np.all(residuals(linear_problem(), [2.0]) == 0.0)


def test_masked_channel_absent():
    mask = np.ones((T.size, 2), dtype=bool)
    mask[:, 1] = False
    prob = linear_problem(mask=mask)
    assert residuals(prob, [3.0]).size == T.size
    assert prob.data.active_channels == ("y",)
    sel = linear_problem().data.select(["c"])
    assert sel.active_channels == ("c",)


def test_nan_samples_are_skipped():
    y = np.column_stack([2.0 * T, 3.0 + 0 * T])
    y[3, 0] = np.nan
    data = Dataset(T, ("y", "c"), y)
    prob = EstimationProblem({"p": (0.0, 5.0)}, {"p": 1.0}, data,
                             lambda prm: np.column_stack([prm["p"] * T, 3.0 + 0 * T]), scaling=None)
    assert residuals(prob, [2.0]).size == 2 * T.size - 1


def test_residuals_reject_out_of_bounds():
    with pytest.raises(SetupError):
        residuals(linear_problem(), [6.0])


def test_linear_toy_recovery_from_every_start():
    res = fit(linear_problem(), n_starts=5, seed=3)
    assert res.values["p"] == pytest.approx(2.0, abs=1e-6)
    for s in res.starts:
        assert s.x[0] == pytest.approx(2.0, abs=1e-6)
        assert res.rss <= s.rss


def test_bimodal_objective_finds_global_basin():
    # f(p) = (p^2 - 1)^2 + 0.3 (p + 1)^2: global minimum at p = -1, local one near p = 0.816
    t = np.array([0.0, 1.0])

    def sim(prm):
        p = prm["p"]
        return np.array([[(p * p - 1.0)], [np.sqrt(0.3) * (p + 1.0)]])

    data = Dataset(t, ("y",), np.zeros((2, 1)))
    prob = EstimationProblem({"p": (-2.0, 2.0)}, {"p": 0.0}, data, sim, scaling=None)
    grid = np.linspace(-2, 2, 40001)
    f = (grid ** 2 - 1) ** 2 + 0.3 * (grid + 1) ** 2
    p_star = grid[np.argmin(f)]
    res = fit(prob, n_starts=16, seed=0)
    assert p_star < 0
    assert res.values["p"] == pytest.approx(p_star, abs=1e-3)


def test_fit_is_deterministic():
    a = fit(linear_problem(), n_starts=3, seed=11)
    b = fit(linear_problem(), n_starts=3, seed=11)
    assert np.array_equal(a.x, b.x)
    assert [s.rss for s in a.starts] == [s.rss for s in b.starts]


@settings(max_examples=10, deadline=None)
@given(st.floats(0.1, 100.0))
def test_scaling_invariance(c):
    noisy = np.random.default_rng(0).normal(0, 0.1, T.size)
    data = Dataset(T, ("y",), (2.0 * T + noisy)[:, None])
    sim = lambda prm: (prm["p"] * T)[:, None]  # noqa: E731
    a = fit(EstimationProblem({"p": (0.0, 5.0)}, {"p": 1.0}, data, sim, scaling=[1.0]), n_starts=2, seed=1)
    b = fit(EstimationProblem({"p": (0.0, 5.0)}, {"p": 1.0}, data, sim, scaling=[c]), n_starts=2, seed=1)
    assert a.x[0] == pytest.approx(b.x[0], abs=1e-6)


def test_all_starts_failed():
    def boom(prm):
        raise IntegrationError("non-finite state")

    data = Dataset(T, ("y",), T[:, None])
    prob = EstimationProblem({"p": (0.0, 1.0)}, {"p": 0.5}, data, boom, scaling=None)
    with pytest.raises(EstimationError) as e:
        fit(prob, n_starts=2)
    assert "p=" in e.value.records[0].message


def test_problem_validation():
    data = Dataset(T, ("y",), T[:, None])
    sim = lambda prm: T[:, None]  # noqa: E731
    with pytest.raises(SetupError):
        EstimationProblem({"q": (0.0, 1.0)}, {"p": 0.5}, data, sim)
    with pytest.raises(SetupError):
        EstimationProblem({"p": (1.0, 0.0)}, {"p": 0.5}, data, sim)
    with pytest.raises(SetupError):
        EstimationProblem({"p": (0.0, np.inf)}, {"p": 0.5}, data, sim)
    with pytest.raises(SetupError):
        EstimationProblem({}, {"p": 0.5}, data, sim)
    with pytest.raises(DataError):
        EstimationProblem({"p": (0.0, 1.0)}, {"p": 0.5}, data, sim, horizon=(0.0, 5.0))
    with pytest.raises(SetupError):
        fit(EstimationProblem({"p": (0.0, 1.0)}, {"p": 0.5}, data, sim), n_starts=0)


def test_dataset_validation():
    with pytest.raises(DataError):
        Dataset(T, ("a", "b"), T[:, None])
    with pytest.raises(DataError):
        Dataset(T[::-1], ("a",), T)


def test_r_squared_definition():
    y = np.array([1.0, 2.0, 4.0, 7.0])
    assert r_squared(y, y) == 1.0
    assert r_squared(y, np.full(4, y.mean())) == pytest.approx(0.0)
    both = r_squared(np.column_stack([y, y]), np.column_stack([y, y + 1]))
    assert both[0] == 1.0 and both[1] < 1.0
    with pytest.raises(DataError):
        r_squared([1.0, 1.0], [1.0, 2.0])
    with pytest.raises(DataError):
        r_squared([1.0], [1.0])


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=30), st.floats(-10, 10))
def test_r_squared_at_most_one(values, shift):
    y = np.array(values)
    if np.var(y) < 1e-6:
        return
    assert r_squared(y, y + shift) <= 1.0


def test_tg2_truth_residuals_vanish_without_noise():
    data = synthetic_tg2_data(hours=24.0, noise=0.0, sample_dt=7200.0, dt=60.0)
    prob = tg2_problem(data, dt=60.0)
    x_true = [getattr(prob.params, n) for n in prob.names]
    assert np.max(np.abs(residuals(prob, x_true))) < 1e-12
    assert objective(prob, x_true) < 1e-24
