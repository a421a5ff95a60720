import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from trunclad.errors import DimensionError, NumericError, UnstableModelError
from trunclad.rng import RngStream
from trunclad.tail_dist import NoiseSpec
from trunclad.var_model import (
    PRESETS,
    TimeSeries,
    VarCoefficients,
    companion,
    default_theta0,
    forecast,
    is_stable,
    lag_design,
    operator_norm,
    preset,
    simulate,
    spectral_radius,
)

DIAG = np.diag([0.6, -0.4, 0.1, 0.5, -0.2])


def test_companion_layouts():
    assert np.array_equal(companion(VarCoefficients((DIAG,))), DIAG)
    c = companion(VarCoefficients((np.array([[0.5]]), np.array([[0.25]]))))
    assert np.array_equal(c, [[0.5, 0.25], [1.0, 0.0]])
    big = companion(preset("var2-sim"))
    assert big.shape == (10, 10)
    assert np.array_equal(big[5:, :5], np.eye(5))
    assert np.array_equal(big[5:, 5:], np.zeros((5, 5)))


def test_coefficient_shapes_checked():
    with pytest.raises(DimensionError):
        VarCoefficients((np.eye(2), np.eye(3)))
    with pytest.raises(DimensionError):
        VarCoefficients(())


def test_operator_norm_examples():
    assert operator_norm(np.eye(4)) == pytest.approx(1.0, abs=1e-12)
    assert operator_norm(DIAG) == pytest.approx(0.6, abs=1e-12)
    assert operator_norm(np.array([[0.0, 1.0], [0.0, 0.0]])) == pytest.approx(1.0, abs=1e-12)
    assert operator_norm(np.zeros((3, 2))) == 0.0


def test_operator_norm_cap_raises_with_estimate():
    # a zero tolerance is unreachable in floating point on a dense matrix
    m = np.random.default_rng(3).normal(size=(6, 6))
    with pytest.raises(NumericError) as info:
        operator_norm(m, tol=0.0, max_iter=5)
    assert info.value.estimate == pytest.approx(np.linalg.svd(m, compute_uv=False)[0], rel=1e-9)


def test_operator_norm_against_svd():
    rng = np.random.default_rng(0)
    for _ in range(50):
        m = rng.normal(size=(rng.integers(1, 7), rng.integers(1, 7)))
        assert operator_norm(m) == pytest.approx(np.linalg.svd(m, compute_uv=False)[0], rel=1e-9)


def test_spectral_radius_examples():
    assert spectral_radius(DIAG) == pytest.approx(0.6, abs=1e-6)
    assert spectral_radius(np.array([[0.5, 0.25], [1.0, 0.0]])) == pytest.approx((0.5 + math.sqrt(1.25)) / 2, abs=1e-6)
    pair = companion(VarCoefficients((np.array([[0.6]]), np.array([[-0.3]]))))
    assert spectral_radius(pair) == pytest.approx(math.sqrt(0.3), abs=1e-6)


def test_spectral_radius_against_eigvals():
    rng = np.random.default_rng(1)
    for _ in range(100):
        m = rng.normal(size=(5, 5))
        exact = np.max(np.abs(np.linalg.eigvals(m)))
        assert spectral_radius(m) == pytest.approx(exact, rel=1e-6)


def test_spectral_radius_extreme_scales():
    assert spectral_radius(1e200 * DIAG) == pytest.approx(0.6e200, rel=1e-9)
    assert spectral_radius(1e-200 * DIAG) == pytest.approx(0.6e-200, rel=1e-9)
    assert spectral_radius(np.array([[0.0, 1.0], [0.0, 0.0]])) == 0.0


def test_stability_gate():
    assert is_stable(preset("var1-sim"), 0.99)
    assert not is_stable(VarCoefficients((np.eye(3),)), 0.99)
    # the shipped VAR(2) matrices are explosive: z**2 + 0.6 z - 0.5 has a root at about -1.068
    assert spectral_radius(companion(preset("var2-sim"))) == pytest.approx(0.3 + math.sqrt(0.59), abs=1e-9)
    assert not is_stable(preset("var2-sim"), 0.99)
    assert is_stable(preset("var2-sim-lagswap"), 0.99)


def test_simulate_rejects_unstable():
    with pytest.raises(UnstableModelError):
        simulate(preset("var2-sim"), NoiseSpec.pareto(1.8, True), 10, 10, RngStream(0))


def test_simulate_degenerate_is_zero():
    s = simulate(preset("var1-sim"), NoiseSpec.degenerate(), 50, 100, RngStream(0))
    assert s.values.shape == (50, 5)
    assert np.all(s.values == 0)


def _acf1(z):
    z = z - z.mean()
    return float(z[1:] @ z[:-1] / (z @ z))


def test_white_noise_lag1_autocorrelation():
    s = simulate(VarCoefficients((np.zeros((1, 1)),)), NoiseSpec.pareto(3.0, True), 20000, 10, RngStream(2))
    assert abs(_acf1(s.values[:, 0])) < 4 / math.sqrt(20000)


def test_ar1_lag1_autocorrelation():
    s = simulate(VarCoefficients((np.array([[0.6]]),)), NoiseSpec.pareto(3.0, True), 10**5, 5000, RngStream(3))
    assert _acf1(s.values[:, 0]) == pytest.approx(0.6, abs=0.02)


def test_simulation_deterministic():
    coeffs, noise = preset("var2-sim-lagswap"), NoiseSpec.frechet(1.5, True)
    a = simulate(coeffs, noise, 200, 300, RngStream(9, 4))
    b = simulate(coeffs, noise, 200, 300, RngStream(9, 4))
    assert np.array_equal(a.values, b.values)


def test_forecast_examples():
    assert np.array_equal(forecast(np.zeros((2, 2)), np.ones((1, 2)), 3), np.zeros((3, 2)))
    assert forecast(np.array([[0.5]]), [[2.0]], 2).ravel().tolist() == [1.0, 0.5]
    coeffs = VarCoefficients((np.array([[0.5]]), np.array([[0.25]])))
    assert forecast(coeffs, [[1.0], [1.0]], 2).ravel().tolist() == [0.75, 0.625]
    with pytest.raises(DimensionError):
        forecast(coeffs, [[1.0]], 2)


def test_lag_design_layout():
    z = np.arange(10.0).reshape(5, 2)
    x, y = lag_design(z, 2)
    assert np.array_equal(y, z[2:])
    assert np.array_equal(x[0], np.concatenate([z[1], z[0]]))


def test_default_theta0_and_presets():
    assert np.array_equal(default_theta0(5, 1), 2 * np.eye(5))
    assert np.array_equal(default_theta0(5, 2), np.hstack([np.eye(5), np.eye(5)]))
    assert np.array_equal(PRESETS["var1-sim"].phi[0], DIAG)
    coeffs = VarCoefficients.from_theta(preset("var2-sim").theta, 2)
    assert np.array_equal(coeffs.phi[1], preset("var2-sim").phi[1])


def test_time_series_validation():
    assert TimeSeries([1.0, 2.0]).values.shape == (2, 1)
    with pytest.raises(NumericError):
        TimeSeries([[1.0, np.nan]])


_mats = arrays(np.float64, (3, 3), elements=st.floats(-1, 1, allow_nan=False, allow_subnormal=False))


@settings(max_examples=100, deadline=None)
@given(a=_mats, b=_mats)
def test_companion_norm_relations(a, b):
    coeffs = VarCoefficients((a, b))
    psi = companion(coeffs)
    nrm = operator_norm(psi)
    assert spectral_radius(psi) <= nrm * (1 + 1e-9) + 1e-12
    assert operator_norm(coeffs.theta) <= nrm * (1 + 1e-9) + 1e-12


@settings(max_examples=50, deadline=None)
@given(a=_mats, z=arrays(np.float64, 3, elements=st.floats(-10, 10)), L=st.integers(1, 6))
def test_forecast_decay_bound(a, z, L):
    pred = forecast(a, z[None, :], L)
    assert np.linalg.norm(pred[-1]) <= operator_norm(a) ** L * np.linalg.norm(z) * (1 + 1e-9) + 1e-12
