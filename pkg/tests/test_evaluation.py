import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trunclad.errors import DimensionError, ParameterError
from trunclad.evaluation import (
    aggregate,
    delta_comparison,
    empirical_l1_risk,
    hill_curve,
    hill_estimator,
    hill_table,
    hill_weighted,
    log10_error,
    prediction_error,
)
from trunclad.rng import RngStream
from trunclad.tail_dist import NoiseSpec, sample
from trunclad.var_model import forecast, lag_design, preset, simulate


def test_risk_examples():
    y = np.array([[3.0, 4.0], [0.0, -1.0]])
    x = np.ones((2, 3))
    assert empirical_l1_risk(np.zeros((2, 3)), x, y) == pytest.approx(3.0)
    assert empirical_l1_risk([[1.0]], [[1.0]], [[3.0]]) == 2.0


def test_risk_batch_matches_loop():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(200, 4))
    y = rng.normal(size=(200, 2))
    thetas = rng.normal(size=(7, 2, 4))
    batch = empirical_l1_risk(thetas, x, y, chunk=3)
    loop = [np.mean(np.linalg.norm(y - x @ t.T, axis=1)) for t in thetas]
    assert np.allclose(batch, loop, rtol=1e-13)


def test_prediction_error_examples():
    assert prediction_error(np.zeros((2, 2)), np.ones((1, 2)), np.zeros((3, 2))) == 0.0
    assert prediction_error(np.zeros((2, 2)), np.ones((1, 2)), [[1.0, 0.0]]) == 1.0
    assert prediction_error([[0.5]], [[2.0]], [1.2, 0.4]) == pytest.approx(0.15, abs=1e-15)
    with pytest.raises(DimensionError):
        prediction_error([[0.5]], [[2.0]], np.zeros((2, 3)))


def test_prediction_error_zero_on_noiseless_path():
    truth = preset("var1-sim")
    z = np.empty((12, 5))
    z[0] = np.arange(1.0, 6.0)
    for t in range(1, 12):
        z[t] = truth.phi[0] @ z[t - 1]
    assert np.array_equal(forecast(truth.theta, z[:2], 10), z[2:])
    assert prediction_error(truth.theta, z[:2], z[2:]) == 0.0


def test_log10_examples():
    assert log10_error(1.0) == 0.0
    assert log10_error(100.0) == 2.0
    assert log10_error(0.0) == -12.0
    with pytest.raises(ParameterError):
        log10_error(-1.0)


def test_aggregate_examples():
    s = aggregate([2.5] * 6)
    assert (s.mean, s.median, s.q3 - s.q1, s.outliers) == (2.5, 2.5, 0.0, ())
    s = aggregate([1, 2, 3, 4, 5])
    assert (s.median, s.q1, s.q3) == (3.0, 2.0, 4.0)
    s = aggregate([1, 2, 3, 4, 100])
    assert s.outliers == (100.0,)
    assert s.whisker_high == 4.0
    with pytest.raises(ParameterError):
        aggregate([])


@settings(max_examples=100)
@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=50))
def test_aggregate_mean(values):
    assert aggregate(values).mean == pytest.approx(math.fsum(values) / len(values), abs=1e-12, rel=1e-12)


def test_hill_examples():
    assert hill_estimator([3.0] * 10, 4) == 0.0
    assert hill_estimator([2.0, 4.0, 8.0, 16.0], 2) == pytest.approx((math.log(4) + math.log(2)) / 2, abs=1e-12)
    assert hill_weighted([3.0] * 10, 5) == 0.0
    with pytest.raises(ParameterError):
        hill_estimator([1.0, 2.0, 3.0], 3)
    with pytest.raises(ParameterError):
        hill_estimator([1.0, -2.0, 3.0, 4.0], 2)


def test_hill_curve_matches_pointwise():
    x = sample(NoiseSpec.frechet(1.7), RngStream(4), 500)
    curve = hill_curve(x, 40)
    for k in range(2, 41):
        assert curve[k - 1] == pytest.approx(hill_estimator(x, k), rel=1e-12)


def test_hill_pareto_consistency():
    x = sample(NoiseSpec.pareto(1.5), RngStream(12), 10**5)
    assert 1 / hill_estimator(x, 1000) == pytest.approx(1.5, abs=0.15)


def test_hill_weighted_on_plateau():
    n = 5000
    x = ((np.arange(1, n + 1)) / (n + 1)) ** (-1 / 4)
    assert 1 / hill_weighted(x, 160) == pytest.approx(4.0, abs=0.3)
    rows = hill_table(x, 160)
    assert rows[0][0] == 2 and rows[-1][0] == 160
    assert rows[-1][2] == pytest.approx(hill_weighted(x, 160), rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6), c=st.floats(1e-3, 1e3))
def test_hill_scale_invariance(seed, c):
    x = sample(NoiseSpec.pareto(2.0), RngStream(seed), 300)
    assert np.allclose(hill_curve(c * x, 100), hill_curve(x, 100), rtol=0, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_risk_convex_along_segments(seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_t(1.5, size=(40, 3))
    y = rng.standard_t(1.5, size=(40, 2))
    a, b = rng.normal(size=(2, 2, 3)) * 3
    mid = empirical_l1_risk((a + b) / 2, x, y)
    assert mid <= (empirical_l1_risk(a, x, y) + empirical_l1_risk(b, x, y)) / 2 + 1e-12 * (1 + mid)


def test_delta_examples():
    assert delta_comparison(3.0, 3.0) == 0.0
    assert delta_comparison(2.0, 1.0) == 0.5
    assert delta_comparison(1.0, 2.0) == -1.0
    with pytest.raises(ZeroDivisionError):
        delta_comparison(0.0, 1.0)


def test_risk_on_var_design_is_finite():
    s = simulate(preset("var1-sim"), NoiseSpec.frechet(1.2, True), 100, 200, RngStream(1))
    x, y = lag_design(s.values, 1)
    assert np.isfinite(empirical_l1_risk(2 * np.eye(5), x, y))
