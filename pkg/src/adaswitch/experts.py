"""Fixed Share and Multiplicative Weights with switching-cost step sizes."""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp
from sklearn.base import BaseEstimator

from .validation import check_loss_matrix, check_loss_vector


@dataclass(frozen=True)
class FixedShareState:
    z: np.ndarray
    eta: float
    tau: int
    D: float
    frozen: bool


def fixed_share_eta(n_experts, tau, D):
    return math.sqrt(math.log(n_experts * tau) / (D * tau))


def is_frozen(n_experts, tau, D):
    """Fixed Share never moves when ``tau < 16 D log(N tau)``."""
    return tau < 16.0 * D * math.log(n_experts * tau)


def make_fixed_share(n_experts, tau, D=1.0):
    return FixedShareState(z=np.full(n_experts, 1.0 / n_experts),
                           eta=fixed_share_eta(n_experts, tau, D), tau=int(tau),
                           D=float(D), frozen=is_frozen(n_experts, tau, D))


def _share_update(z, loss, eta, tau):
    w = z * np.exp(-eta * loss) + 1.0 / (z.shape[0] * tau)
    return w / w.sum()


def fixed_share_step(state, loss):
    loss = check_loss_vector(loss, n_actions=state.z.shape[0])
    if state.frozen:
        return state
    return FixedShareState(z=_share_update(state.z, loss, state.eta, state.tau), eta=state.eta,
                           tau=state.tau, D=state.D, frozen=False)


def declared_slowness_fixed_share(state):
    return 0.0 if state.frozen else state.eta


def mw_eta(n_experts, T, D):
    return math.sqrt(math.log(n_experts) / (2.0 * D * T))


def mw_step(z, loss, eta):
    """One multiplicative-weights update of a probability vector."""
    loss = check_loss_vector(loss, n_actions=len(z))
    logits = np.log(np.asarray(z, dtype=float)) - eta * loss
    return np.exp(logits - logsumexp(logits))


class _ExpertsEstimator(BaseEstimator):
    """Shared fit/partial_fit plumbing; subclasses define ``_reset``/``_update``."""

    def fit(self, X, y=None):
        L = check_loss_matrix(X, n_actions=self.n_experts)
        self._reset()
        plays = np.empty_like(L)
        for t in range(L.shape[0]):
            plays[t] = self.z_
            self._update(L[t])
        self.plays_ = plays
        return self

    def partial_fit(self, loss):
        if not hasattr(self, "z_"):
            self._reset()
        self._update(check_loss_vector(loss, n_actions=self.n_experts))
        return self

    def current_action(self):
        if not hasattr(self, "z_"):
            self._reset()
        return self.z_

    def observe(self, loss):
        return self.partial_fit(loss)


class FixedShare(_ExpertsEstimator):
    """Fixed Share tuned for windows of length ``tau`` under switching cost ``D``.

    Step size ``eta = sqrt(log(N tau) / (D tau))`` and additive share
    ``1 / (N tau)``.  When ``tau < 16 D log(N tau)`` the learner stays
    uniform; otherwise each step moves at most ``eta`` in total variation.
    """

    def __init__(self, n_experts, tau, D=1.0):
        self.n_experts = n_experts
        self.tau = tau
        self.D = D

    def _reset(self):
        self.eta_ = fixed_share_eta(self.n_experts, self.tau, self.D)
        self.frozen_ = is_frozen(self.n_experts, self.tau, self.D)
        self.z_ = np.full(self.n_experts, 1.0 / self.n_experts)
        self.t_ = 0

    def _update(self, loss):
        if not self.frozen_:
            self.z_ = _share_update(self.z_, loss, self.eta_, self.tau)
        self.t_ += 1

    @property
    def declared_slowness(self):
        if is_frozen(self.n_experts, self.tau, self.D):
            return 0.0
        return fixed_share_eta(self.n_experts, self.tau, self.D)


class MultiplicativeWeights(_ExpertsEstimator):
    """Hedge with ``eta = sqrt(log N / (2 D T))`` over a known horizon ``T``.

    Weights are kept as logits so long runs do not underflow.
    """

    def __init__(self, n_experts, T, D=1.0):
        self.n_experts = n_experts
        self.T = T
        self.D = D

    def _reset(self):
        self.eta_ = mw_eta(self.n_experts, self.T, self.D)
        self.logits_ = np.zeros(self.n_experts)
        self.z_ = np.full(self.n_experts, 1.0 / self.n_experts)
        self.t_ = 0

    def _update(self, loss):
        self.logits_ -= self.eta_ * loss
        self.logits_ -= self.logits_.max()
        self.z_ = np.exp(self.logits_ - logsumexp(self.logits_))
        self.t_ += 1

    @property
    def declared_slowness(self):
        return mw_eta(self.n_experts, self.T, self.D)


class ConstantExpert(BaseEstimator):
    """Always plays one fixed expert; a 0-slow base for combiners."""

    def __init__(self, n_experts, expert=0):
        self.n_experts = n_experts
        self.expert = expert

    def current_action(self):
        z = np.zeros(self.n_experts)
        z[self.expert] = 1.0
        return z

    def observe(self, loss):
        return self

    partial_fit = observe
    declared_slowness = 0.0
