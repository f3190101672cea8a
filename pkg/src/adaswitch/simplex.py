"""Total-variation geometry on the simplex and minimal-switching couplings.

A fractional play ``x_t`` over ``N`` actions is turned into an integral
action sequence by coupling consecutive distributions so that the
probability of changing action equals their total-variation distance.
"""

from dataclasses import dataclass

import numpy as np

from .validation import as_generator, as_simplex, check_loss_matrix


@dataclass(frozen=True)
class CouplingPlan:
    """Joint law of consecutive actions.

    Attributes
    ----------
    joint : ndarray of shape (N, N)
        ``joint[i, j]`` is the probability of moving from action ``i`` to ``j``.
    switch_prob : float
        Probability that the two actions differ, ``1 - trace(joint)``.
    """

    joint: np.ndarray
    switch_prob: float


def _pair(z, z_next):
    z = as_simplex(z)
    z_next = as_simplex(z_next)
    if z.shape != z_next.shape:
        raise ValueError(f"dimension mismatch: {z.shape[0]} vs {z_next.shape[0]}")
    return z, z_next


def tv_distance(z, z_next):
    """Total-variation distance ``||z - z'||_1 / 2``.

    The half-L1 form is used because it is exactly symmetric in floating point.
    """
    z, z_next = _pair(z, z_next)
    return float(0.5 * np.abs(z - z_next).sum())


def build_coupling(z, z_next):
    """Coupling of ``z`` and ``z_next`` with ``P(X != X') = TV(z, z_next)``.

    The diagonal keeps ``min(z_i, z'_i)`` in place; the surplus ``(z - z')_+``
    is spread over the deficit ``(z' - z)_+`` proportionally.
    """
    z, z_next = _pair(z, z_next)
    surplus = np.maximum(z - z_next, 0.0)
    deficit = np.maximum(z_next - z, 0.0)
    tv = deficit.sum()
    joint = np.diag(np.minimum(z, z_next))
    if tv > 0.0:
        joint = joint + np.outer(surplus, deficit) / tv
    return CouplingPlan(joint=joint, switch_prob=float(1.0 - np.trace(joint)))


def transition_sample(current, z, z_next, rng):
    """Draw the next action given ``current ~ z`` so that it is ``~ z_next``.

    Leaves ``current`` with probability ``(z_i - z'_i)_+ / z_i`` and, when it
    leaves, lands on ``j`` with probability proportional to ``(z'_j - z_j)_+``.
    """
    z, z_next = _pair(z, z_next)
    rng = as_generator(rng)
    current = int(current)
    if not 0 <= current < z.shape[0]:
        raise IndexError(f"action {current} out of range")
    if z[current] <= 0.0:
        raise ValueError(f"current action {current} has zero probability under z")
    leave = max(z[current] - z_next[current], 0.0) / z[current]
    if leave <= 0.0 or rng.random() >= leave:
        return current
    deficit = np.maximum(z_next - z, 0.0)
    cdf = np.cumsum(deficit)
    j = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    # rounding can push the draw past the end
    return j if j < len(cdf) else int(np.flatnonzero(deficit)[-1])


def rollout(fractional_plays, losses, D, rng):
    """Sample an integral action path from fractional plays.

    Returns
    -------
    actions : ndarray of int, shape (T,)
    total_loss : float
        ``sum_t losses[t, a_t] + D * #switches``.
    """
    plays = np.asarray(fractional_plays, dtype=float)
    L = check_loss_matrix(losses)
    if plays.ndim != 2 or plays.shape != L.shape:
        raise ValueError(f"plays {plays.shape} and losses {L.shape} must have equal shape")
    rng = as_generator(rng)
    T, N = plays.shape
    actions = np.empty(T, dtype=int)
    actions[0] = rng.choice(N, p=as_simplex(plays[0]))
    for t in range(1, T):
        actions[t] = transition_sample(actions[t - 1], plays[t - 1], plays[t], rng)
    switches = int(np.count_nonzero(np.diff(actions)))
    total = float(L[np.arange(T), actions].sum() + D * switches)
    return actions, total


def fractional_loss(fractional_plays, losses, D):
    """Expected loss of the rollout: ``sum <l_t, x_t> + D sum TV(x_t, x_{t-1})``."""
    plays = np.asarray(fractional_plays, dtype=float)
    L = np.asarray(losses, dtype=float)
    movement = 0.5 * np.abs(np.diff(plays, axis=0)).sum()
    return float((plays * L).sum() + D * movement)
