import math

import numpy as np
import pytest

from adaswitch.adversary import (ALLOWED_LOSSES, NEUTRAL, PROBE, PUNISH, ConstantPolicy, flip_flop, iid_losses,
                                 interval_composition_adversary, lower_bound_adversary, phased_trace,
                                 piecewise_stationary, round_robin_trace, target_gap, zipf_trace)
from adaswitch.gate import TwoExpertsGate
from adaswitch.harness import best_s_switch_comparator


def only_allowed(losses):
    return all(tuple(row) in ALLOWED_LOSSES for row in losses)


def test_frozen_policy():
    # weight 0 loses 1 per probe, so the gain falls below -1/2 and the punish fires at round 3
    T, M = 64, 2.0
    run = lower_bound_adversary(ConstantPolicy(0.0), T, M)
    np.testing.assert_array_equal(run.losses[:3], [PROBE, PROBE, PUNISH])
    assert np.all(run.losses[3:] == NEUTRAL)
    assert run.punished_at == [2]
    assert run.service == pytest.approx(T / 2 + 0.5)
    assert run.service >= T / 2 + target_gap(M)


def test_half_policy_is_never_punished():
    # the uniform learner has regret T/2 against expert 1, outside the guarantee
    run = lower_bound_adversary(ConstantPolicy(0.5), 64, 2.0)
    assert run.punished_at == [] and np.all(run.losses == PROBE)
    assert run.service == 32.0 and np.all(run.gains == 0.0)


def test_mirrored_roles():
    run = lower_bound_adversary(ConstantPolicy(1.0), 64, 2.0)
    np.testing.assert_array_equal(run.losses[:3], [PUNISH, PUNISH, PROBE])
    assert run.service == pytest.approx(32.5)


def test_gain_tracker_matches_measured_loss():
    policy = TwoExpertsGate(tau=256, Z=1e-3)
    run = lower_bound_adversary(policy, 256, 10.0)
    g = run.weights
    per_round = (1 - g) * run.losses[:, 0] + g * run.losses[:, 1]
    np.testing.assert_allclose(run.gains, np.arange(1, 257) / 2 - np.cumsum(per_round), atol=1e-12)
    assert only_allowed(run.losses)


def test_precondition():
    with pytest.raises(ValueError):
        lower_bound_adversary(ConstantPolicy(0.0), 16, 5.0)
    run = lower_bound_adversary(ConstantPolicy(0.0), 16, 5.0, check_precondition=False)
    assert run.losses.shape == (16, 2)


def test_interval_composition_layout():
    run = interval_composition_adversary(1024, TwoExpertsGate(tau=1024, Z=1e-3))
    assert run.block_length == 10 and run.n_blocks == 102
    assert np.all(run.losses[1020:] == 0.5)
    assert only_allowed(run.losses)


def test_interval_composition_forced_loss_on_regret_bounded_policy():
    # weight 0 forever: lower-bound blocks never punish and charge every round
    T = 256
    run = interval_composition_adversary(T, ConstantPolicy(0.0))
    M = math.log2(T) / 100
    assert run.service >= T / 2 + (T // math.log2(T)) * M * 2.0 ** (-4 * M)


def test_flip_flop_layout():
    L = flip_flop(10_000, 10)
    np.testing.assert_array_equal(L[:10], np.tile([1.0, 0.0], (10, 1)))
    np.testing.assert_array_equal(L[10:20], np.tile([0.0, 1.0], (10, 1)))
    L3 = flip_flop(40, 4, N=3)
    assert np.all(L3[:, 2] == 1.0)


def test_iid_means():
    rng = np.random.default_rng(0)
    L = iid_losses(20_000, 3, rng, p=[0.1, 0.5, 0.8])
    se = np.sqrt(np.array([0.09, 0.25, 0.16]) / 20_000)
    assert np.all(np.abs(L.mean(axis=0) - [0.1, 0.5, 0.8]) <= 4 * se)
    with pytest.raises(ValueError):
        iid_losses(5, 2, rng, kind="gaussian")


def test_piecewise_stationary_and_switch_comparator():
    rng = np.random.default_rng(1)
    L, bounds, best = piecewise_stationary(800, 4, 4, rng)
    assert list(bounds) == [0, 200, 400, 600, 800]
    assert np.all(best[1:] != best[:-1])
    per_segment = sum(L[a:b].sum(axis=0).min() for a, b in zip(bounds, bounds[1:]))
    assert best_s_switch_comparator(L, (1, 800), 3, 0.0) <= per_segment + 1e-9


def test_paging_traces():
    rng = np.random.default_rng(2)
    t = zipf_trace(5000, 8, rng, s=1.2)
    assert t.min() >= 1 and t.max() <= 8 and np.bincount(t)[1] > np.bincount(t)[8]
    t, b = phased_trace(1000, 8, 4, rng)
    assert len(t) == 1000 and list(b) == [0, 250, 500, 750, 1000]
    np.testing.assert_array_equal(round_robin_trace(7, 3), [1, 2, 3, 1, 2, 3, 1])
