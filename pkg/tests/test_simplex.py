import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import chisquare

from adaswitch.simplex import build_coupling, fractional_loss, rollout, transition_sample, tv_distance
from adaswitch.validation import as_simplex


def random_simplex(rng, n):
    return rng.dirichlet(np.ones(n))


simplex_st = st.integers(2, 6).flatmap(
    lambda n: st.tuples(*[st.lists(st.floats(0.0, 1.0), min_size=n, max_size=n).filter(lambda v: sum(v) > 1e-3)] * 2)
).map(lambda p: tuple(np.asarray(v) / np.sum(v) for v in p))


def test_tv_identity_and_simple_case():
    z = np.array([0.2, 0.3, 0.5])
    assert tv_distance(z, z) == 0.0
    assert tv_distance([0.5, 0.5], [0.2, 0.8]) == pytest.approx(0.3, abs=1e-15)


def test_tv_matches_both_half_l1_forms():
    rng = np.random.default_rng(0)
    for _ in range(200):
        z, w = random_simplex(rng, 5), random_simplex(rng, 5)
        tv = tv_distance(z, w)
        assert tv == pytest.approx(np.maximum(z - w, 0).sum(), abs=1e-12)
        assert tv == pytest.approx(0.5 * np.abs(z - w).sum(), abs=1e-12)


def test_tv_dimension_mismatch():
    with pytest.raises(ValueError):
        tv_distance([1.0, 0.0], [1.0, 0.0, 0.0])


def test_simplex_renormalizes_and_rejects():
    z = as_simplex([0.5, 0.5 + 1e-10])
    assert z.sum() == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(ValueError):
        as_simplex([0.5, 0.6])
    with pytest.raises(ValueError):
        as_simplex([1.1, -0.1])


def test_coupling_identity_is_diagonal():
    z = np.array([0.1, 0.6, 0.3])
    plan = build_coupling(z, z)
    np.testing.assert_allclose(plan.joint, np.diag(z), atol=1e-15)
    assert plan.switch_prob == pytest.approx(0.0, abs=1e-15)


def test_coupling_two_point_example():
    plan = build_coupling([0.6, 0.4], [0.4, 0.6])
    np.testing.assert_allclose(plan.joint, [[0.4, 0.2], [0.0, 0.4]], atol=1e-15)
    assert plan.switch_prob == pytest.approx(0.2, abs=1e-15)


def test_coupling_disjoint_supports():
    assert build_coupling([1.0, 0.0], [0.0, 1.0]).switch_prob == pytest.approx(1.0)


@settings(max_examples=200, deadline=None)
@given(simplex_st)
def test_coupling_marginals_property(pair):
    z, w = pair
    plan = build_coupling(z, w)
    assert plan.joint.min() >= 0.0
    np.testing.assert_allclose(plan.joint.sum(axis=1), z, atol=1e-9)
    np.testing.assert_allclose(plan.joint.sum(axis=0), w, atol=1e-9)
    assert 1.0 - np.trace(plan.joint) == pytest.approx(tv_distance(z, w), abs=1e-9)


@settings(max_examples=200, deadline=None)
@given(simplex_st, st.integers(0, 2**32 - 1))
def test_tv_is_a_metric(pair, seed):
    z, w = pair
    x = np.random.default_rng(seed).dirichlet(np.ones(len(z)))
    assert tv_distance(z, w) == tv_distance(w, z)
    assert tv_distance(z, w) <= tv_distance(z, x) + tv_distance(x, w) + 1e-12


def test_transition_identity_and_forced_move():
    rng = np.random.default_rng(1)
    z = np.array([0.3, 0.7])
    assert all(transition_sample(1, z, z, rng) == 1 for _ in range(100))
    assert all(transition_sample(0, [1.0, 0.0], [0.0, 1.0], rng) == 1 for _ in range(100))


def test_transition_rejects_zero_mass_current():
    with pytest.raises(ValueError):
        transition_sample(1, [1.0, 0.0], [0.5, 0.5], 0)


def test_transition_switch_rate_matches_coupling():
    rng = np.random.default_rng(2)
    z, w = np.array([0.6, 0.4]), np.array([0.4, 0.6])
    starts = rng.choice(2, size=100_000, p=z)
    moved = np.mean([transition_sample(a, z, w, rng) != a for a in starts[:20_000]])
    assert moved == pytest.approx(build_coupling(z, w).switch_prob, abs=0.01)


def test_transition_chain_preserves_marginals():
    rng = np.random.default_rng(3)
    chain = [random_simplex(rng, 4) for _ in range(5)]
    n = 20_000
    states = rng.choice(4, size=n, p=chain[0])
    for z, w in itertools.pairwise(chain) if hasattr(itertools, "pairwise") else zip(chain, chain[1:]):
        states = np.array([transition_sample(a, z, w, rng) for a in states])
        counts = np.bincount(states, minlength=4)
        assert chisquare(counts, n * w).pvalue > 0.001


def test_rollout_constant_play_and_single_round():
    L = np.random.default_rng(4).random((30, 3))
    plays = np.tile([1.0, 0.0, 0.0], (30, 1))
    actions, total = rollout(plays, L, 2.0, 0)
    assert np.all(actions == 0)
    assert total == pytest.approx(L[:, 0].sum())
    _, one = rollout(plays[:1], L[:1], 5.0, 0)
    assert one == pytest.approx(L[0, 0])


def test_rollout_length_mismatch():
    with pytest.raises(ValueError):
        rollout(np.full((3, 2), 0.5), np.zeros((4, 2)), 1.0, 0)


def test_rollout_mean_matches_fractional_loss():
    rng = np.random.default_rng(5)
    T, N, D = 50, 3, 2.0
    plays = rng.dirichlet(np.ones(N), size=T)
    L = rng.random((T, N))
    totals = np.array([rollout(plays, L, D, rng)[1] for _ in range(10_000)])
    se = totals.std(ddof=1) / np.sqrt(totals.size)
    assert abs(totals.mean() - fractional_loss(plays, L, D)) <= 2 * se + 1e-9
