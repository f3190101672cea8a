import math

import numpy as np
import pytest
from sklearn.base import clone

from adaswitch.experts import (ConstantExpert, FixedShare, MultiplicativeWeights, _share_update,
                               declared_slowness_fixed_share, fixed_share_step, is_frozen,
                               make_fixed_share, mw_step)
from adaswitch.simplex import tv_distance


def test_fixed_share_symmetric_losses_keep_uniform():
    s = make_fixed_share(2, 1000, 1.0)
    for c in (0.0, 0.3, 1.0):
        np.testing.assert_allclose(fixed_share_step(s, [c, c]).z, [0.5, 0.5], atol=1e-15)


def test_frozen_fixed_share_never_moves():
    s = make_fixed_share(10, 50, 1.0)
    assert s.frozen and is_frozen(10, 50, 1.0)
    assert fixed_share_step(s, np.eye(10)[0]).z is s.z
    assert declared_slowness_fixed_share(s) == 0.0


def test_fixed_share_recomputation_oracle():
    z = np.full(3, 1 / 3)
    eta, tau = 0.1, 100
    w = [z[0] * math.exp(-eta) + 1 / 300, z[1] + 1 / 300, z[2] + 1 / 300]
    expected = np.array(w) / sum(w)
    np.testing.assert_allclose(_share_update(z, np.array([1.0, 0, 0]), eta, tau), expected, atol=1e-12)


def test_declared_slowness_formula():
    s = make_fixed_share(10, 1000, 2.0)
    assert not s.frozen
    assert declared_slowness_fixed_share(s) == pytest.approx(math.sqrt(math.log(10_000) / 2000))
    assert FixedShare(10, 1000, 2.0).declared_slowness == pytest.approx(s.eta)


def test_share_update_moves_at_most_eta():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        N = rng.integers(2, 12)
        eta = rng.uniform(0.01, 1.0)
        tau = rng.uniform(2 / eta, 2 / eta + 5000)
        z = rng.dirichlet(np.ones(N) * rng.uniform(0.05, 3))
        l = rng.random(N)
        assert tv_distance(z, _share_update(z, l, eta, tau)) <= eta + 1e-12


def test_fixed_share_adversarial_movement_bounded():
    rng = np.random.default_rng(1)
    est = FixedShare(5, 200, 1.0)
    prev = est.current_action().copy()
    worst = 0.0
    for t in range(10_000):
        l = np.zeros(5)
        l[np.argmax(prev)] = 1.0  # hit the current favourite
        if t % 7 == 0:
            l = rng.random(5)
        est.partial_fit(l)
        worst = max(worst, tv_distance(prev, est.current_action()))
        prev = est.current_action().copy()
    assert worst <= est.eta_


def test_mw_step_properties():
    z = np.array([0.2, 0.3, 0.5])
    np.testing.assert_allclose(mw_step(z, [0.4, 0.4, 0.4], 0.7), z, atol=1e-15)
    z1 = mw_step(z, [0.0, 1.0, 0.0], 0.5)
    assert z1[1] < z[1]
    assert z1[0] / z1[2] == pytest.approx(z[0] / z[2], rel=1e-12)
    rng = np.random.default_rng(2)
    for _ in range(50):
        z, l, eta = rng.dirichlet(np.ones(6)), rng.random(6), rng.uniform(0, 2)
        w = z * np.exp(-eta * l)
        np.testing.assert_allclose(mw_step(z, l, eta), w / w.sum(), atol=1e-12)


def test_mw_log_space_survives_long_runs():
    est = MultiplicativeWeights(3, 2**20, 1.0)
    L = np.tile([1.0, 0.0, 1.0], (300, 1))
    est._reset()
    est.eta_ = 5.0  # eta * t = 1500 would underflow plain weights
    for l in L:
        est.partial_fit(l)
    assert np.all(np.isfinite(est.z_)) and est.z_[1] == pytest.approx(1.0)


def test_loss_validation():
    with pytest.raises(ValueError):
        FixedShare(3, 100).partial_fit([0.0, 2.0, 0.0])
    with pytest.raises(ValueError):
        MultiplicativeWeights(3, 100).fit(np.zeros((5, 4)))


def test_estimator_api():
    est = FixedShare(4, 128, 1.0)
    assert clone(est).get_params() == {"n_experts": 4, "tau": 128, "D": 1.0}
    L = np.random.default_rng(3).random((64, 4))
    est.fit(L)
    assert est.plays_.shape == (64, 4)
    np.testing.assert_allclose(est.plays_[0], 0.25)
    c = ConstantExpert(3, 2)
    np.testing.assert_array_equal(c.current_action(), [0, 0, 1])
    assert c.declared_slowness == 0.0


def test_mw_whole_horizon_regret_bound():
    rng = np.random.default_rng(4)
    N, T, D = 10, 4096, 1.0
    L = (rng.random((T, N)) < np.linspace(0.3, 0.6, N)).astype(float)
    P = MultiplicativeWeights(N, T, D).fit(L).plays_
    alg = (P * L).sum() + D * 0.5 * np.abs(np.diff(P, axis=0)).sum()
    assert alg - L.sum(axis=0).min() <= math.sqrt(8 * D * T * math.log(N))
