import math

import numpy as np
import pytest

from adaswitch.combiner import (StronglyAdaptiveExperts, TwoAlgorithmCombiner, build_stack, combine_step,
                                default_Z, scaled_loss, stack_step)
from adaswitch.experts import ConstantExpert, FixedShare
from adaswitch.gate import make_drift_state
from adaswitch.simplex import tv_distance


class Scripted:
    """Slow algorithm replaying a fixed sequence of actions."""

    def __init__(self, plays, slowness):
        self.plays = np.asarray(plays, dtype=float)
        self.t = 0
        self.declared_slowness = slowness

    def current_action(self):
        return self.plays[min(self.t, len(self.plays) - 1)]

    def observe(self, loss):
        self.t += 1


def test_scaled_loss_examples():
    z = np.array([0.3, 0.7])
    assert scaled_loss(np.zeros(2), z, z, 2.0, 1.0) == 0.0
    assert scaled_loss(np.ones(2), z, z, 2.0, 3.5) == pytest.approx(1 / 4.5)
    rng = np.random.default_rng(0)
    for _ in range(100):
        z, w, l = rng.dirichlet(np.ones(4)), rng.dirichlet(np.ones(4)), rng.random(4)
        D, M = rng.uniform(1, 3), rng.uniform(3, 6)
        ref = (float(l @ z) + D * 0.5 * np.abs(z - w).sum()) / (M + 1)
        assert scaled_loss(l, z, w, D, M) == pytest.approx(ref, abs=1e-12)


def test_scaled_loss_range_violation():
    with pytest.raises(ValueError):
        scaled_loss(np.ones(2), np.array([1.0, 0]), np.array([0, 1.0]), 4.0, 0.5)


def test_combine_step_follows_a0_at_zero_drift_and_when_dormant():
    a0 = Scripted([[1.0, 0.0]] * 5, 0.0)
    a1 = Scripted([[0.0, 1.0]] * 5, 0.0)
    gate = make_drift_state(4096, 1e-4, 1.0)
    action, gate = combine_step(gate, a0, a1, np.array([1.0, 0.0]))
    np.testing.assert_array_equal(action, [1.0, 0.0])
    dormant = make_drift_state(64, 1e-4, 1.0, x0=40.0, projected=False, horizon=10)
    for _ in range(3):
        action, dormant = combine_step(dormant, a0, a1, np.array([1.0, 0.0]), M=1.0)
        np.testing.assert_array_equal(action, [1.0, 0.0])


def test_combine_identical_algorithms():
    plays = np.random.default_rng(1).dirichlet(np.ones(3), size=40)
    a0, a1 = Scripted(plays, 1.0), Scripted(plays, 1.0)
    gate = make_drift_state(1024, 1e-3, 1.0)
    gate = type(gate)(**{**gate.__dict__, "x": gate.gate.U / 2})
    for t in range(40):
        action, gate = combine_step(gate, a0, a1, np.random.default_rng(t).random(3))
        np.testing.assert_allclose(action, plays[t], atol=1e-15)


def test_stack_without_base_and_single_level():
    fs = FixedShare(3, 64)
    stack = build_stack(None, [fs], 64)
    assert stack.n_levels == 0 and stack.members == [fs]
    L = np.random.default_rng(2).random((64, 3))
    ref = FixedShare(3, 64).fit(L).plays_
    np.testing.assert_allclose([stack_step(stack, l) for l in L], ref, atol=1e-15)


def test_single_level_stack_matches_combine_step():
    T, Z = 1024, 1e-3
    rng = np.random.default_rng(3)
    L = rng.random((T, 2))
    stack = build_stack(ConstantExpert(2, 0), [FixedShare(2, T)], T, Z=Z)
    a0, a1 = ConstantExpert(2, 0), FixedShare(2, T)
    gate = make_drift_state(T, Z, 1.0)
    M = stack.M[0]
    for l in L:
        expected, gate = combine_step(gate, a0, a1, l, M=M)
        np.testing.assert_allclose(stack_step(stack, l), expected, atol=1e-14)


def test_ledger_growth_is_at_most_half_over_d():
    T, D = 4096, 1.0
    Z = default_Z(T)
    levels = [FixedShare(10, T >> u, D) for u in range(12)]
    stack = build_stack(ConstantExpert(10), levels, T, D=D, Z=Z)
    assert stack.taus == [T >> u for u in range(12)]
    growth = stack.slowness_ledger[-1] - stack.slowness_ledger[0]
    assert 0 < growth <= 1 / (2 * D)


def test_constant_base_with_zero_losses():
    T = 256
    stack = build_stack(ConstantExpert(4, 2), [FixedShare(4, T >> u) for u in range(8)], T, Z=1e-3)
    for _ in range(T):
        np.testing.assert_array_equal(stack_step(stack, np.zeros(4)), [0, 0, 1, 0])
    assert all(g.x == 0.0 for g in stack.gates)


def test_stack_errors():
    with pytest.raises(ValueError):
        build_stack(None, [FixedShare(2, 100)], 100)
    with pytest.raises(ValueError):
        build_stack(Scripted([[1, 0]], 0.9), [], 64, D=2.0)
    stack = build_stack(ConstantExpert(2), [FixedShare(2, 4)], 4, Z=0.1)
    for _ in range(4):
        stack_step(stack, np.zeros(2))
    with pytest.raises(ValueError):
        stack_step(stack, np.zeros(2))


def test_measured_slowness_and_scaled_losses():
    T, N = 2048, 5
    rng = np.random.default_rng(4)
    L = (rng.random((T, N)) < 0.5).astype(float)
    L[T // 2:, 3] = 0.0
    est = StronglyAdaptiveExperts(N, T, debug=True).fit(L)
    stack = est.stack_
    assert np.all(stack.max_movement <= np.array(stack.slowness_ledger) + 1e-9)
    seen = [x for row in stack.scaled_losses for pair in row if pair is not None for x in pair]
    assert seen and min(seen) >= 0.0 and max(seen) <= 1.0


def test_base_preservation_small():
    T, D = 1024, 1.0
    rng = np.random.default_rng(5)
    L = rng.random((T, 3))
    L[:, 0] *= 0.5
    est = StronglyAdaptiveExperts(3, T, D=D, base=ConstantExpert(3, 0)).fit(L)
    P = est.plays_
    total = (P * L).sum() + D * 0.5 * np.abs(np.diff(P, axis=0)).sum()
    Z = default_Z(T)
    assert total <= L[:, 0].sum() + 2 * math.sqrt(D) * T * math.log2(T) * Z


def test_two_algorithm_combiner_estimator():
    T = 512
    L = np.tile([1.0, 0.0], (T, 1))
    comb = TwoAlgorithmCombiner(ConstantExpert(2, 0), ConstantExpert(2, 1), tau=T, Z=1e-3).fit(L)
    assert comb.plays_[0, 1] == 0.0 and comb.plays_[-1, 1] == 1.0
    assert comb.declared_slowness > 0
    assert set(comb.get_params()) >= {"tau", "Z", "D", "M"}


def test_stack_plays_are_distributions():
    T = 256
    L = np.random.default_rng(6).random((T, 4))
    P = StronglyAdaptiveExperts(4, T).fit(L).plays_
    np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-12)
    assert P.min() >= 0.0
    assert max(tv_distance(a, b) for a, b in zip(P, P[1:])) <= 1.0
