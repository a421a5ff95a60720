import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trunclad.errors import NumericError, ParameterError
from trunclad.evaluation import empirical_l1_risk
from trunclad.losses import LossSpec, PenaltySpec, psi_alpha_deriv
from trunclad.optimizer import (
    SgdConfig,
    fit_all_three,
    fit_many,
    risk_trajectory,
    sgd_fit,
    sgd_step,
    write_trajectory_csv,
)
from trunclad.rng import RngStream
from trunclad.tail_dist import NoiseSpec
from trunclad.var_model import default_theta0, lag_design, operator_norm, preset, simulate

LAD = LossSpec.absolute()


def test_config_validation():
    with pytest.raises(ParameterError):
        SgdConfig(LAD, eta=0.0)
    with pytest.raises(ParameterError):
        SgdConfig(LAD, eta=1.5)
    with pytest.raises(ParameterError):
        SgdConfig(LAD, c0=0.0)
    with pytest.raises(ParameterError):
        SgdConfig(LAD, sampling="shuffled")


def test_step_examples():
    cfg = SgdConfig(LAD, eta=0.1)
    assert sgd_step([[0.0]], [1.0], [2.0], cfg)[0, 0] == pytest.approx(0.1)
    cfg = SgdConfig(LAD, penalty=PenaltySpec(0.5), eta=0.1)
    assert sgd_step([[0.2]], [1.0], [2.0], cfg)[0, 0] == pytest.approx(0.25)
    assert sgd_step([[0.2]], [1.0], [2.0], cfg, eta=0.0)[0, 0] == 0.2


def test_step_rejects_non_finite():
    with pytest.raises(NumericError):
        sgd_step([[0.0]], [np.inf], [1.0], SgdConfig(LAD, eta=0.1))


def test_zero_steps_gives_start_only():
    tr = sgd_fit(np.ones((3, 1)), np.ones((3, 1)), SgdConfig(LAD, steps=0, theta0=[[0.3]]))
    assert tr.thetas.shape == (1, 1, 1)
    assert tr.final[0, 0] == 0.3


def test_repeated_pair_sign_dynamics():
    x = np.ones((40, 1))
    y = np.ones((40, 1))
    tr = sgd_fit(x, y, SgdConfig(LAD, eta=0.1, steps=40, theta0=[[0.0]]))
    path = tr.thetas[:, 0, 0]
    first = int(np.argmax(path > 1.0 + 1e-9))
    assert np.allclose(np.diff(path[:first + 1]), 0.1)
    # each sign step moves by exactly eta, so the iterate alternates across 1 within [1 - eta, 1 + eta]
    tail = path[first:]
    assert np.all((tail >= 0.9 - 1e-9) & (tail <= 1.1 + 1e-9))
    assert np.allclose(tail[2:], tail[:-2])


def test_batched_engine_matches_single_steps():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(60, 3))
    y = x @ rng.normal(size=(2, 3)).T + rng.standard_t(2, size=(60, 2))
    for loss in (LossSpec.psi(1.3, 0.2), LossSpec.huber_loss(0.5, 2.0), LAD):
        cfg = SgdConfig(loss, PenaltySpec(0.05), eta=0.05, steps=60, theta0=np.zeros((2, 3)))
        theta = np.zeros((2, 3))
        for k in range(60):
            theta = sgd_step(theta, x[k], y[k], cfg)
        assert np.allclose(sgd_fit(x, y, cfg).final, theta, rtol=0, atol=1e-13)


def test_sequential_needs_enough_pairs():
    with pytest.raises(ParameterError):
        sgd_fit(np.ones((3, 1)), np.ones((3, 1)), SgdConfig(LAD, steps=4))
    with pytest.raises(ParameterError):
        sgd_fit(np.ones((3, 1)), np.ones((3, 1)), SgdConfig(LAD, steps=2, sampling="uniform"))


def test_uniform_sampling_is_seeded():
    x = np.arange(10.0)[:, None]
    y = 0.5 * x
    cfg = SgdConfig(LAD, steps=30, sampling="uniform", eta=0.01)
    a = sgd_fit(x, y, cfg, RngStream(3))
    b = sgd_fit(x, y, cfg, RngStream(3))
    assert np.array_equal(a.thetas, b.thetas)
    assert np.array_equal(a.indices, b.indices)
    assert a.indices.min() >= 0 and a.indices.max() < 10


def test_penalty_drop_fires_once_and_stays():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(50, 2))
    y = x @ np.array([[1.0, -1.0]]).T
    cfg = SgdConfig(LAD, PenaltySpec(0.5), eta=0.05, steps=400, sampling="uniform", c0=1e-3,
                    theta0=np.zeros((1, 2)))
    tr = sgd_fit(x, y, cfg, RngStream(1))
    assert tr.penalty_drop_step is not None
    k = tr.penalty_drop_step
    # after the drop, an iterate with exact zero residual stays put, so no sign term is acting
    deltas = [d for s, _, d in tr.risk_checks]
    assert deltas[-1] <= 1e-3 and all(d > 1e-3 for d in deltas[:-1])
    assert tr.risk_checks[-1][0] == k


def test_infinite_threshold_drops_at_first_step():
    cfg = SgdConfig(LAD, PenaltySpec(1.0), eta=0.1, steps=3, c0=np.inf, theta0=[[0.0]])
    tr = sgd_fit(np.ones((3, 1)), 2 * np.ones((3, 1)), cfg)
    assert tr.penalty_drop_step == 1


def test_drop_check_stride():
    rng = np.random.default_rng(5)
    x = rng.normal(size=(30, 1))
    cfg = SgdConfig(LAD, PenaltySpec(0.1), eta=0.01, steps=30, c0=1e-12, risk_eval_stride=7, theta0=[[0.0]])
    tr = sgd_fit(x, 3 * x, cfg)
    assert [s for s, _, _ in tr.risk_checks] == [7, 14, 21, 28]


def test_degenerate_data_from_truth_is_constant():
    truth = preset("var1-sim")
    s = simulate(truth, NoiseSpec.degenerate(), 20, 0)
    # zero history makes a degenerate path all zeros; seed a non-zero start instead
    z = np.empty((30, 5))
    z[0] = 1.0
    for t in range(1, 30):
        z[t] = truth.phi[0] @ z[t - 1]
    x, y = lag_design(z, 1)
    out = fit_all_three(x, y, LossSpec.psi(1.5, 0.035), LossSpec.huber_loss(0.5, 1.0), eta=0.01, steps=29,
                        theta0=truth.theta)
    for tr in out.values():
        assert np.array_equal(tr.thetas, np.broadcast_to(truth.theta, tr.thetas.shape))
    assert np.all(s.values == 0)


def test_fit_all_three_determinism_and_keys():
    s = simulate(preset("var1-sim"), NoiseSpec.pareto(1.8, True), 201, 500, RngStream(8))
    x, y = lag_design(s.values, 1)
    kw = dict(penalty=PenaltySpec(0.01), eta=0.01, steps=200, theta0=default_theta0(5, 1))
    a = fit_all_three(x, y, LossSpec.psi(1.2, 0.035), LossSpec.huber_loss(0.5, 1.0), **kw)
    b = fit_all_three(x, y, LossSpec.psi(1.2, 0.035), LossSpec.huber_loss(0.5, 1.0), **kw)
    assert set(a) == {"psi_alpha", "lad", "huber"}
    for k in a:
        assert np.array_equal(a[k].thetas, b[k].thetas)
        assert len(a[k]) == 201


def test_var1_pareto18_psi_risk_decreases():
    truth = preset("var1-sim")
    for rep in range(10):
        s = simulate(truth, NoiseSpec.pareto(1.8, True), 801, 5000, RngStream(100 + rep))
        x, y = lag_design(s.values, 1)
        cfg = SgdConfig(LossSpec.psi(1.2, 0.035), PenaltySpec(0.01), eta=0.01, steps=800,
                        theta0=default_theta0(5, 1))
        tr = sgd_fit(x, y, cfg)
        assert empirical_l1_risk(tr.final, x, y) < empirical_l1_risk(tr.thetas[0], x, y)


def test_projection_caps_operator_norm():
    rng = np.random.default_rng(7)
    x = rng.normal(size=(100, 3)) * 5
    y = x @ (3 * np.eye(3)).T
    cfg = SgdConfig(LAD, eta=0.5, steps=100, projection=1.0, theta0=np.zeros((3, 3)))
    tr = sgd_fit(x, y, cfg)
    assert max(operator_norm(t) for t in tr.thetas) <= 1.0 + 1e-9


def test_failure_is_isolated_per_config():
    # the psi weight grows with the residual and overflows; the bounded absolute-loss weight does not
    x = np.array([[1.0], [1e200], [1.0]])
    y = np.array([[1.0], [-1e200], [1.0]])
    ok = SgdConfig(LAD, eta=0.001, steps=3, theta0=[[0.0]])
    bad = SgdConfig(LossSpec.psi(2.0, 1e10), eta=1.0, steps=3, theta0=[[0.0]])
    trajs = fit_many(x, y, [ok, bad], np.arange(3))
    assert trajs[1].error is not None and trajs[1].error.step == 2
    assert trajs[0].error is None and np.isfinite(trajs[0].final).all()
    with pytest.raises(NumericError):
        sgd_fit(x, y, bad)


def test_record_subset_and_risk_trajectory():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(50, 2))
    y = x @ np.ones((1, 2)).T
    cfg = SgdConfig(LAD, eta=0.05, steps=50, theta0=np.zeros((1, 2)))
    full = sgd_fit(x, y, cfg)
    part = sgd_fit(x, y, cfg, record=[0, 10, 20, 30, 40])
    assert list(part.steps) == [0, 10, 20, 30, 40, 50]
    assert np.array_equal(part.at(30), full.at(30))
    s1, r1 = risk_trajectory(full, x, y, 10)
    s2, r2 = risk_trajectory(part, x, y, 10)
    assert np.array_equal(s1, s2) and np.array_equal(r1, r2)
    with pytest.raises(ParameterError):
        risk_trajectory(part, x, y, 5)


def test_trajectory_csv(tmp_path):
    x = np.ones((5, 1))
    out = fit_all_three(x, 2 * x, LossSpec.psi(1.5, 0.1), LossSpec.huber_loss(0.5, 1.0), eta=0.1, steps=5)
    path = tmp_path / "traj.csv"
    write_trajectory_csv(path, out, x, 2 * x, stride=2)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["step", "loss_name", "empirical_risk"]
    assert [r[0] for r in rows[1:5]] == ["0", "2", "4", "5"]
    assert {r[1] for r in rows[1:]} == {"psi_alpha", "lad", "huber"}


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10**6), kind=st.sampled_from(["psi", "huber", "lad"]), gamma=st.floats(0, 1))
def test_step_norm_bound(seed, kind, gamma):
    rng = np.random.default_rng(seed)
    loss = {"psi": LossSpec.psi(1.4, 0.3), "huber": LossSpec.huber_loss(0.5, 2.0), "lad": LAD}[kind]
    theta = rng.normal(size=(2, 3))
    x = rng.standard_t(1.5, size=3)
    y = rng.standard_t(1.5, size=2)
    eta = 0.1
    new = sgd_step(theta, x, y, SgdConfig(loss, PenaltySpec(gamma), eta=eta))
    r = np.linalg.norm(y - theta @ x)
    if kind == "psi":
        w = psi_alpha_deriv(loss.lam * r, loss.alpha)
        assert w <= 1 + (loss.lam * r) ** (loss.alpha - 1)
    elif kind == "huber":
        w = min(loss.sigma * r, loss.tau)
    else:
        w = 1.0
    bound = eta * (w * np.linalg.norm(x) + gamma * np.sqrt(6))
    assert operator_norm(new - theta) <= bound * (1 + 1e-9) + 1e-12
