"""Adaptive lower-bound adversaries and synthetic workloads."""

import math
from dataclasses import dataclass, field

import numpy as np

from .validation import as_generator, check_horizon

PROBE = (1.0, 0.0)
PUNISH = (0.0, 1.0)
NEUTRAL = (0.5, 0.5)
ALLOWED_LOSSES = (PROBE, PUNISH, NEUTRAL)


def target_gap(M):
    """``a = M * 2^{-4M}``; underflows to 0 for ``M`` beyond about 269."""
    return M * 2.0 ** (-4.0 * M)


@dataclass
class GainTracker:
    """Gain ``G_t = t/2 - L_t`` of a two-expert learner and the adversary phase."""

    a: float
    gain: float = 0.0
    t: int = 0
    phase: str = "probe"

    def record(self, loss):
        self.t += 1
        self.gain += 0.5 - loss


@dataclass
class LowerBoundRun:
    """Output of an adversary run.

    ``weights[t]`` is the learner's weight on expert 1 before round ``t``;
    ``service`` is its fractional loss without movement.
    """

    losses: np.ndarray
    weights: np.ndarray
    gains: np.ndarray
    a: float
    punished_at: list = field(default_factory=list)

    @property
    def service(self):
        return float(((1.0 - self.weights) * self.losses[:, 0] + self.weights * self.losses[:, 1]).sum())

    @property
    def movement(self):
        return float(np.abs(np.diff(self.weights)).sum())


def _weight(policy):
    z = np.asarray(policy.current_action(), dtype=float)
    if z.shape != (2,):
        raise ValueError("the lower-bound adversary needs a two-expert policy")
    return float(z[1])


def _block(policy, length, M, losses, weights, gains, offset):
    """Drive ``policy`` for ``length`` rounds; returns the punish round or None."""
    tracker = GainTracker(a=target_gap(M))
    mirror = None
    punished = None
    for s in range(length):
        z = _weight(policy)
        if mirror is None:
            mirror = z > 0.5
        y = 1.0 - z if mirror else z
        if tracker.phase == "probe":
            if y > 0.5 + tracker.gain + tracker.a:
                tracker.phase = "punish"
                loss = PUNISH
                punished = offset + s
            else:
                loss = PROBE
        else:
            tracker.phase = "freeze"
            loss = NEUTRAL
        l0, l1 = loss
        if mirror:
            l0, l1 = l1, l0
        lv = np.array([l0, l1])
        tracker.record((1.0 - z) * l0 + z * l1)
        losses[offset + s] = lv
        weights[offset + s] = z
        gains[offset + s] = tracker.gain
        policy.observe(lv)
    return punished


def lower_bound_adversary(policy, T, M, check_precondition=True):
    """Adaptive sequence forcing loss at least ``T/2 + M 2^{-4M}`` on learners with regret ``<= M``.

    Plays ``(1, 0)`` while the weight on expert 1 stays at most
    ``1/2 + G + a``; at the first excess it plays ``(0, 1)`` once and then
    ``(1/2, 1/2)`` forever.  The expert roles are swapped when the initial
    weight on expert 1 exceeds 1/2.  The guarantee needs ``T >= 4M``.

    Parameters
    ----------
    policy : two-expert policy
        Exposes ``current_action()`` (a length-2 distribution) and
        ``observe(loss)``; it is advanced in place.
    T : int
    M : float
        Regret bound of the policy against expert 1.
    check_precondition : bool, default=True
        Raise when ``T < 4M``.
    """
    T = check_horizon(T, power_of_two=False)
    if M < 0:
        raise ValueError("M must be non-negative")
    if check_precondition and T < 4 * M:
        raise ValueError(f"need T >= 4M, got T={T}, M={M:.6g}")
    losses = np.zeros((T, 2))
    weights = np.zeros(T)
    gains = np.zeros(T)
    punished = _block(policy, T, M, losses, weights, gains, 0)
    return LowerBoundRun(losses, weights, gains, target_gap(M),
                         [] if punished is None else [punished])


def interval_composition_adversary(T, policy, M=None):
    """Concatenate lower-bound blocks of length ``log2 T`` with ``M = log2(T) / 100``.

    Rounds left after the last full block get ``(1/2, 1/2)``.
    """
    T = check_horizon(T)
    if T < 4:
        raise ValueError("need T >= 4")
    length = int(math.log2(T))
    M = length / 100.0 if M is None else float(M)
    n_blocks = T // length
    losses = np.zeros((T, 2))
    weights = np.zeros(T)
    gains = np.zeros(T)
    punished = []
    for b in range(n_blocks):
        p = _block(policy, length, M, losses, weights, gains, b * length)
        if p is not None:
            punished.append(p)
    for t in range(n_blocks * length, T):
        weights[t] = _weight(policy)
        losses[t] = NEUTRAL
        policy.observe(losses[t].copy())
    run = LowerBoundRun(losses, weights, gains, target_gap(M), punished)
    run.block_length = length
    run.n_blocks = n_blocks
    return run


class ConstantPolicy:
    """Two-expert policy that always puts weight ``w`` on expert 1."""

    def __init__(self, w):
        self.w = float(w)

    def current_action(self):
        return np.array([1.0 - self.w, self.w])

    def observe(self, loss):
        return self


def iid_losses(T, N, rng, p=0.5, kind="bernoulli"):
    """I.i.d. losses: Bernoulli with per-expert means ``p``, or uniform on [0, 1]."""
    rng = as_generator(rng)
    if kind == "uniform":
        return rng.random((T, N))
    if kind != "bernoulli":
        raise ValueError(f"unknown kind {kind!r}")
    p = np.broadcast_to(np.asarray(p, dtype=float), (N,))
    return (rng.random((T, N)) < p).astype(float)


def piecewise_stationary(T, N, segments, rng, best_mean=0.2, other_mean=0.5):
    """Bernoulli losses whose best expert changes at ``segments`` equal-length segments.

    Returns
    -------
    losses : ndarray of shape (T, N)
    boundaries : ndarray of int
        Segment start rounds (0-based), followed by ``T``.
    best : ndarray of int
        Best expert of each segment; consecutive segments differ.
    """
    rng = as_generator(rng)
    if not 1 <= segments <= T:
        raise ValueError("need 1 <= segments <= T")
    bounds = np.linspace(0, T, segments + 1).round().astype(int)
    best = np.empty(segments, dtype=int)
    losses = np.empty((T, N))
    for s in range(segments):
        choices = [i for i in range(N) if s == 0 or i != best[s - 1]]
        best[s] = choices[rng.integers(len(choices))]
        means = np.full(N, other_mean)
        means[best[s]] = best_mean
        length = bounds[s + 1] - bounds[s]
        losses[bounds[s]:bounds[s + 1]] = rng.random((length, N)) < means
    return losses, bounds, best


def flip_flop(T, block, N=2):
    """Blocks of ``(1, 0)`` and ``(0, 1)`` alternating every ``block`` rounds.

    With ``N > 2`` the extra experts lose 1 throughout.
    """
    if block < 1 or N < 2:
        raise ValueError("need block >= 1 and N >= 2")
    losses = np.ones((T, N))
    phase = (np.arange(T) // block) % 2
    losses[:, 0] = phase == 0
    losses[:, 1] = phase == 1
    return losses


def zipf_trace(T, n, rng, s=1.0, perm=None):
    """Requests drawn i.i.d. from a Zipf law of exponent ``s`` over ``n`` pages."""
    rng = as_generator(rng)
    p = 1.0 / np.arange(1, n + 1) ** s
    p /= p.sum()
    ranks = rng.choice(n, size=T, p=p)
    perm = np.arange(1, n + 1) if perm is None else np.asarray(perm)
    return perm[ranks]


def phased_trace(T, n, phases, rng, s=1.0):
    """Zipf requests whose page popularity order is re-drawn at each of ``phases`` phases."""
    rng = as_generator(rng)
    bounds = np.linspace(0, T, phases + 1).round().astype(int)
    parts = []
    for ph in range(phases):
        perm = rng.permutation(n) + 1
        parts.append(zipf_trace(bounds[ph + 1] - bounds[ph], n, rng, s=s, perm=perm))
    return np.concatenate(parts), bounds


def round_robin_trace(T, n):
    """Pages ``1, 2, ..., n, 1, 2, ...``; adversarial for caches of size ``n - 1``."""
    return np.arange(T) % n + 1
