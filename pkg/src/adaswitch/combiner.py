"""Pairwise combination of slow algorithms and the dyadic combiner stack.

A slow algorithm exposes ``current_action()``, ``observe(loss)`` and
``declared_slowness`` (a bound on the per-step total-variation movement of
its actions).  The stack keeps, for every prefix ``B_u``, a weight vector
over its members (the root and the level algorithms) so that the same code
drives dense simplex play and policies whose members are point masses.
"""

import math

import numpy as np
from sklearn.base import BaseEstimator

from .experts import FixedShare
from .gate import gate_movement_bound, gate_step, gate_weight, make_drift_state
from .simplex import tv_distance
from .validation import check_horizon, check_loss_matrix, check_switching_cost, check_Z

SCALED_LOSS_TOL = 1e-9


def scaled_loss(l, z_now, z_next, D, M):
    """``(<l, z_now> + D * TV(z_now, z_next)) / (M + 1)``, checked to lie in [0, 1]."""
    value = (float(np.dot(l, z_now)) + D * tv_distance(z_now, z_next)) / (M + 1.0)
    return _check_scaled(value)


def _check_scaled(value):
    if not -SCALED_LOSS_TOL <= value <= 1.0 + SCALED_LOSS_TOL:
        raise ValueError(f"scaled loss {value!r} left [0, 1]; a slowness declaration is wrong")
    return min(max(value, 0.0), 1.0)


def default_Z(T):
    """``1 / (2 T log2 T)``, the choice making the regret to the base ``sqrt(D)``."""
    return 1.0 / (2.0 * T * math.log2(T)) if T > 2 else 1.0 / math.e


def combine_step(gate, A0, A1, l, M=None):
    """One round of the two-algorithm combiner.

    Emits ``(1 - g) z0 + g z1`` (``z0`` alone while the gate is dormant),
    feeds ``l`` to both algorithms and advances the gate on their scaled
    losses.  ``M`` defaults to ``D`` times the larger declared slowness.

    Returns
    -------
    action : ndarray
    gate : DriftGateState
    """
    D = gate.D
    if M is None:
        M = D * max(A0.declared_slowness, A1.declared_slowness)
    z0 = np.array(A0.current_action(), dtype=float)
    z1 = np.array(A1.current_action(), dtype=float)
    g = gate_weight(gate)
    action = (1.0 - g) * z0 + g * z1
    A0.observe(l)
    A1.observe(l)
    l0 = scaled_loss(l, z0, A0.current_action(), D, M)
    l1 = scaled_loss(l, z1, A1.current_action(), D, M)
    return action, gate_step(gate, l0, l1)


class SimplexSpace:
    """Members play points of the simplex; a prefix plays their mixture."""

    is_dense = True

    def __init__(self, D):
        self.D = float(D)
        self.gate_D = self.D
        self.unit = 1.0

    def read(self, member):
        return np.asarray(member.current_action(), dtype=float)

    def prepare(self, acts_now, acts_next, loss):
        return np.vstack(acts_now), np.vstack(acts_next), np.asarray(loss, dtype=float)

    def mix(self, weights, acts):
        return weights @ np.vstack(acts[: weights.shape[0]])

    def cost(self, prep, w_now, w_next):
        Z_now, Z_next, loss = prep
        p = w_now.shape[0]
        x_now = w_now @ Z_now[:p]
        x_next = w_next @ Z_next[:p]
        return float(loss @ x_now) + self.D * float(np.maximum(x_next - x_now, 0.0).sum())

    def movement(self, prep, w_now, w_next):
        Z_now, Z_next, _ = prep
        p = w_now.shape[0]
        return float(np.maximum(w_next @ Z_next[:p] - w_now @ Z_now[:p], 0.0).sum())


def _extend(weights, g):
    """Prefix weights of ``B_u`` from those of ``B_{u-1}`` and gate weight ``g``."""
    out = np.empty(weights.shape[0] + 1)
    out[:-1] = (1.0 - g) * weights
    out[-1] = g
    return out


class CombinerStack:
    """The chain ``B_{-1}, B_0, ..., B_{K-1}`` of pairwise combiners.

    ``members[0]`` is the root (the base, or the first level when there is
    no base) and ``members[j]`` for ``j >= 1`` is combined through gate
    ``j - 1`` with interval scale ``taus[j - 1]``.  The stack is itself a
    slow algorithm and can be nested.

    Use :func:`build_stack` to construct one.
    """

    def __init__(self, members, taus, T, D, Z, space, M=None, debug=False):
        self.members = list(members)
        self.taus = [int(t) for t in taus]
        self.T = int(T)
        self.D = float(D)
        self.Z = float(Z)
        self.space = space
        self.debug = debug
        self.t = 0
        self.gates = [make_drift_state(tau, Z, space.gate_D) for tau in self.taus]
        slow = [float(m.declared_slowness) for m in self.members]
        ledger = [slow[0]]
        Ms = []
        for j, tau in enumerate(self.taus, start=1):
            Ms.append(self.D * max(ledger[-1], slow[j]) if M is None else float(M))
            ledger.append(ledger[-1] + gate_movement_bound(tau, Z, self.D))
        self.slowness_ledger = ledger
        self.M = Ms
        self.max_movement = np.zeros(len(self.members))
        self.scaled_losses = []

    @property
    def n_levels(self):
        return len(self.taus)

    @property
    def declared_slowness(self):
        return self.slowness_ledger[-1]

    def prefix_weights(self):
        """Member weights of every prefix ``B_u``, root first."""
        w = [np.ones(1)]
        for gate in self.gates:
            w.append(_extend(w[-1], gate_weight(gate)))
        return w

    def weights(self):
        return self.prefix_weights()[-1]

    def current_action(self):
        if self.space.is_dense:
            acts = [self.space.read(m) for m in self.members]
            return self.space.mix(self.weights(), acts)
        return self.weights()

    def observe(self, loss):
        if self.t >= self.T:
            raise ValueError(f"stack already ran its {self.T} rounds")
        space = self.space
        acts_now = [space.read(m) for m in self.members]
        w_now = self.prefix_weights()
        for m in self.members:
            m.observe(loss)
        acts_next = [space.read(m) for m in self.members]
        prep = space.prepare(acts_now, acts_next, loss)
        if self.debug:
            self._check_members(prep)
        scale = space.unit
        w_next = [np.ones(1)]
        round_scaled = []
        for j, gate in enumerate(self.gates):
            if gate.dormant:
                # a dormant gate's weight is identically 0, its drift is never read
                w_next.append(_extend(w_next[j], 0.0))
                round_scaled.append(None)
                continue
            M = self.M[j]
            c0 = space.cost(prep, w_now[j], w_next[j]) / scale
            e = np.zeros(j + 2)
            e[-1] = 1.0
            c1 = space.cost(prep, e, e) / scale
            l0 = _check_scaled(c0 / (M + 1.0))
            l1 = _check_scaled(c1 / (M + 1.0))
            round_scaled.append((l0, l1))
            self.gates[j] = gate_step(gate, l0, l1)
            w_next.append(_extend(w_next[j], gate_weight(self.gates[j])))
        if space.is_dense:
            for j in range(len(w_now)):
                mv = space.movement(prep, w_now[j], w_next[j])
                self.max_movement[j] = max(self.max_movement[j], mv)
        self.scaled_losses.append(round_scaled)
        self.t += 1
        return self

    def _check_members(self, prep):
        for j, m in enumerate(self.members):
            e = np.zeros(j + 1)
            e[-1] = 1.0
            mv = self.space.movement(prep, e, e)
            if mv > m.declared_slowness + 1e-9:
                raise AssertionError(f"member {j} moved {mv:.3g} > declared {m.declared_slowness:.3g}")


def build_stack(base, levels, T, D=1.0, Z=None, space=None, M=None, check_slowness=True,
                debug=False):
    """Chain ``base`` and ``levels`` with gates of scale ``tau_u = T / 2^u``.

    Without a base, ``levels[0]`` is the root and gate ``u`` (for ``u >= 1``)
    combines ``levels[u]``.  ``Z`` defaults to ``1 / (2 T log2 T)``.
    """
    T = check_horizon(T)
    D = check_switching_cost(D)
    Z = default_Z(T) if Z is None else check_Z(Z)
    levels = list(levels)
    if base is None and not levels:
        raise ValueError("need a base or at least one level")
    if len(levels) > max(int(math.log2(T)), 1) + 1:
        raise ValueError(f"at most log2(T) + 1 levels fit a horizon of {T}")
    space = SimplexSpace(D) if space is None else space
    if check_slowness:
        for alg in ([base] if base is not None else []) + levels:
            if alg.declared_slowness > 1.0 / D + 1e-12:
                raise ValueError(f"declared slowness {alg.declared_slowness:.4g} exceeds 1/D")
    if base is None:
        members, taus = levels, [T >> u for u in range(1, len(levels))]
    else:
        members, taus = [base] + levels, [T >> u for u in range(len(levels))]
    if any(tau < 1 for tau in taus):
        raise ValueError("a level's interval scale dropped below 1")
    return CombinerStack(members, taus, T, D, Z, space, M=M, debug=debug)


def stack_step(stack, loss):
    """Emit the stack's action for this round, then advance it on ``loss``."""
    action = stack.current_action()
    stack.observe(loss)
    return action


class TwoAlgorithmCombiner(BaseEstimator):
    """Combine ``A0`` (protected) and ``A1`` with one drift gate.

    Parameters
    ----------
    A0, A1 : slow algorithms
        Exposing ``current_action``, ``observe`` and ``declared_slowness``.
    tau : float
    Z : float
    D : float, default=1.0
    M : float, optional
        Slowness scale; defaults to ``D`` times the larger declared slowness.
    """

    def __init__(self, A0, A1, tau, Z, D=1.0, M=None):
        self.A0 = A0
        self.A1 = A1
        self.tau = tau
        self.Z = Z
        self.D = D
        self.M = M

    def _reset(self):
        self.gate_ = make_drift_state(self.tau, self.Z, self.D)

    def current_action(self):
        if not hasattr(self, "gate_"):
            self._reset()
        g = gate_weight(self.gate_)
        return (1.0 - g) * np.asarray(self.A0.current_action()) + g * np.asarray(self.A1.current_action())

    def partial_fit(self, loss):
        if not hasattr(self, "gate_"):
            self._reset()
        _, self.gate_ = combine_step(self.gate_, self.A0, self.A1, np.asarray(loss, float), self.M)
        return self

    observe = partial_fit

    def fit(self, X, y=None):
        L = check_loss_matrix(X)
        self._reset()
        plays = []
        for l in L:
            plays.append(self.current_action())
            self.partial_fit(l)
        self.plays_ = np.vstack(plays)
        return self

    @property
    def declared_slowness(self):
        M = self.M
        if M is None:
            M = self.D * max(self.A0.declared_slowness, self.A1.declared_slowness)
        return M / self.D + gate_movement_bound(self.tau, self.Z, self.D)


class StronglyAdaptiveExperts(BaseEstimator):
    """Fixed Share at every dyadic scale, chained by a combiner stack.

    Level ``u`` runs Fixed Share tuned for ``tau_u = T / 2^u``; regret on an
    interval of length about ``tau_u`` is then controlled against the best
    expert of that interval.

    Parameters
    ----------
    n_experts : int
    T : int
        Horizon, a power of two.
    D : float, default=1.0
    Z : float, optional
        Gate budget; defaults to ``1 / (2 T log2 T)``.
    base : slow algorithm, optional
        Protected root of the stack.
    debug : bool, default=False
        Assert member slowness every round.

    Attributes
    ----------
    plays_ : ndarray of shape (T, n_experts)
        Fractional action before each round, filled by ``fit``.
    stack_ : CombinerStack
    """

    def __init__(self, n_experts, T, D=1.0, Z=None, base=None, debug=False):
        self.n_experts = n_experts
        self.T = T
        self.D = D
        self.Z = Z
        self.base = base
        self.debug = debug

    def _reset(self):
        K = int(math.log2(check_horizon(self.T)))
        levels = [FixedShare(self.n_experts, self.T >> u, self.D) for u in range(max(K, 1))]
        self.stack_ = build_stack(self.base, levels, self.T, self.D, self.Z, debug=self.debug)

    def current_action(self):
        if not hasattr(self, "stack_"):
            self._reset()
        return self.stack_.current_action()

    def partial_fit(self, loss):
        if not hasattr(self, "stack_"):
            self._reset()
        self.stack_.observe(np.asarray(loss, dtype=float))
        return self

    observe = partial_fit

    def fit(self, X, y=None):
        L = check_loss_matrix(X, n_actions=self.n_experts)
        self._reset()
        plays = np.empty_like(L)
        for t, l in enumerate(L):
            plays[t] = stack_step(self.stack_, l)
        self.plays_ = plays
        return self

    @property
    def declared_slowness(self):
        if not hasattr(self, "stack_"):
            self._reset()
        return self.stack_.declared_slowness
