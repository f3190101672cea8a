"""Drift-gated two-experts algorithm with switching costs.

The weight given to the challenger (expert 1) is ``g(x)``, the clamp to
``[0, 1]`` of

    g~(x) = sqrt(tau/8) * Z * erf~(x / sqrt(8 tau)) * exp(x^2 / (16 tau)),

where ``erf~(y) = int_0^y exp(-s^2/2) ds``.  ``g~`` solves
``8 g~'(x) = x g~(x) / tau + Z`` with ``g~(0) = 0``.  The drift coordinate
``x`` integrates the scaled loss gap with geometric forgetting ``1 - 1/tau``.
"""

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import erf
from sklearn.base import BaseEstimator

from .validation import check_loss_matrix, check_loss_vector, check_Z

THRESHOLD_TOL = 1e-9
# g~ overflows only near |x| ~ 106 sqrt(tau); callers clamp far below this.
_GUARD = 100.0


@dataclass(frozen=True)
class GateFunction:
    """The gate ``g~_{tau,Z}`` together with its unit crossing ``U``."""

    tau: float
    Z: float
    U: float

    def tilde(self, x):
        return g_tilde(self, x)

    def __call__(self, x):
        """Clamped gate ``g(x) = clip(g~(x), 0, 1)``."""
        x = float(x)
        if x <= 0.0:
            return 0.0
        if x >= self.U:
            return 1.0
        return min(max(g_tilde(self, x), 0.0), 1.0)

    def derivative(self, x):
        """``|g'(x)|``: the ODE right-hand side on ``[0, U]``, zero outside."""
        x = float(x)
        if x < 0.0 or x > self.U:
            return 0.0
        return (x * self(x) / self.tau + self.Z) / 8.0


def _g_tilde(tau, Z, x):
    scale = math.sqrt(tau / 8.0) * Z * math.sqrt(math.pi / 2.0)
    return scale * erf(x / (4.0 * math.sqrt(tau))) * np.exp(x * x / (16.0 * tau))


def g_tilde(gate, x):
    """Evaluate ``g~`` (unclamped, odd, strictly increasing)."""
    x_arr = np.asarray(x, dtype=float)
    if np.any(np.abs(x_arr) > _GUARD * math.sqrt(gate.tau)):
        raise ValueError(f"|x| exceeds {_GUARD:g} * sqrt(tau); g~ would overflow")
    out = _g_tilde(gate.tau, gate.Z, x_arr)
    return float(out) if out.ndim == 0 else out


def solve_threshold(tau, Z, tol=THRESHOLD_TOL):
    """Find ``U`` with ``g~(U) = 1`` by bisection.

    The bracket is ``[0, sqrt(16 tau log(1/Z)) + 1]``; outside the regime
    ``tau >= 8e`` the right end may fall short of 1, which raises.
    """
    if tau < 1:
        raise ValueError(f"tau must be >= 1, got {tau!r}")
    check_Z(Z)
    lo, hi = 0.0, math.sqrt(16.0 * tau * math.log(1.0 / Z)) + 1.0
    if _g_tilde(tau, Z, hi) < 1.0:
        raise ValueError(f"g~ stays below 1 on [0, {hi:.6g}] for tau={tau}, Z={Z}")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _g_tilde(tau, Z, mid) < 1.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-13 * max(1.0, hi):
            break
    U = hi if abs(_g_tilde(tau, Z, hi) - 1.0) <= abs(_g_tilde(tau, Z, lo) - 1.0) else lo
    if abs(_g_tilde(tau, Z, U) - 1.0) > tol:
        raise ValueError("bisection did not reach the requested tolerance")
    return U


def make_gate(tau, Z):
    return GateFunction(tau=float(tau), Z=float(Z), U=solve_threshold(tau, Z))


def is_dormant(tau, Z, D):
    """True when ``D log(1/Z) > tau / 64``: the gate always predicts 0."""
    return D * math.log(1.0 / Z) > tau / 64.0


@dataclass(frozen=True)
class DriftGateState:
    """State of the two-experts algorithm.

    ``projected=True`` clips ``x`` to ``[-2, U + 2]`` after each update; the
    unprojected finite-horizon variant counts down ``horizon`` instead.
    """

    gate: GateFunction
    D: float
    x: float = 0.0
    dormant: bool = False
    projected: bool = True
    horizon: int | None = None


def make_drift_state(tau, Z, D, projected=True, x0=0.0, horizon=None):
    check_Z(Z)
    if D < 1:
        raise ValueError(f"switching cost D must be >= 1, got {D!r}")
    dormant = is_dormant(tau, Z, D)
    try:
        gate = make_gate(tau, Z)
    except ValueError:
        if not dormant:
            raise
        # dormant gates never read U; leave the upper clamp open
        gate = GateFunction(tau=float(tau), Z=float(Z), U=math.inf)
    if not projected:
        if horizon is None or horizon < 0:
            raise ValueError("the unprojected variant needs a non-negative horizon")
        if not -2.0 <= x0 <= gate.U + 2.0:
            raise ValueError("initial drift must lie in [-2, U + 2]")
    return DriftGateState(gate=gate, D=float(D), x=float(x0), dormant=dormant,
                          projected=projected, horizon=None if projected else int(horizon))


def gate_weight(state):
    """Probability placed on expert 1 at the current drift."""
    if state.dormant:
        return 0.0
    return state.gate(state.x)


def gate_step(state, l0, l1):
    """Advance the drift after observing the two losses ``l0, l1``."""
    if not (0.0 <= l0 <= 1.0 and 0.0 <= l1 <= 1.0):
        raise ValueError(f"losses must lie in [0, 1], got ({l0!r}, {l1!r})")
    horizon = state.horizon
    if horizon is not None:
        if horizon == 0:
            raise ValueError("stepped past the horizon")
        horizon -= 1
    b = (l0 - l1) / math.sqrt(state.D)
    x = (1.0 - 1.0 / state.gate.tau) * state.x + b
    if state.projected:
        x = min(max(x, -2.0), state.gate.U + 2.0)
    return replace(state, x=x, horizon=horizon)


def gate_movement_bound(tau, Z, D):
    """Per-step bound on ``|g(x_t) - g(x_{t+1})|`` for an active gate."""
    if is_dormant(tau, Z, D):
        return 0.0
    return math.sqrt(math.log(1.0 / Z) / (4.0 * tau * D)) + Z / (8.0 * math.sqrt(D))


class TwoExpertsGate(BaseEstimator):
    """Two-experts learner with near-zero regret to expert 0.

    Parameters
    ----------
    tau : float
        Interval scale; regret to expert 1 is controlled on windows of
        length at most ``tau``.
    Z : float
        Regret budget to expert 0 per round, in ``(0, 1/e]``.
    D : float, default=1.0
        Switching cost.
    projected : bool, default=True
        Clip the drift to ``[-2, U + 2]``.  The unprojected variant requires
        a finite number of rounds (the length of the loss matrix passed to
        ``fit``).
    x0 : float, default=0.0
        Initial drift.

    Attributes
    ----------
    weights_ : ndarray of shape (T,)
        Weight on expert 1 predicted before each round.
    drift_ : ndarray of shape (T + 1,)
        Drift coordinate before each round and after the last.
    """

    def __init__(self, tau, Z, D=1.0, projected=True, x0=0.0):
        self.tau = tau
        self.Z = Z
        self.D = D
        self.projected = projected
        self.x0 = x0

    def _init_state(self, horizon=None):
        self.state_ = make_drift_state(self.tau, self.Z, self.D, projected=self.projected,
                                       x0=self.x0, horizon=horizon)
        self.t_ = 0

    def fit(self, X, y=None):
        L = check_loss_matrix(X, n_actions=2)
        self._init_state(horizon=L.shape[0])
        weights = np.empty(L.shape[0])
        drift = np.empty(L.shape[0] + 1)
        for t, (l0, l1) in enumerate(L):
            drift[t] = self.state_.x
            weights[t] = gate_weight(self.state_)
            self.state_ = gate_step(self.state_, l0, l1)
        drift[-1] = self.state_.x
        self.t_ = L.shape[0]
        self.weights_ = weights
        self.drift_ = drift
        return self

    def partial_fit(self, loss):
        """Observe one round of losses ``(l0, l1)``."""
        if not hasattr(self, "state_"):
            if not self.projected:
                raise ValueError("the unprojected variant is run through fit()")
            self._init_state()
        l0, l1 = check_loss_vector(loss, n_actions=2)
        self.state_ = gate_step(self.state_, l0, l1)
        self.t_ += 1
        return self

    def current_weight(self):
        if not hasattr(self, "state_"):
            self._init_state()
        return gate_weight(self.state_)

    # policy protocol used by the combiner and the adversaries
    def current_action(self):
        g = self.current_weight()
        return np.array([1.0 - g, g])

    def observe(self, loss):
        return self.partial_fit(loss)

    @property
    def declared_slowness(self):
        return gate_movement_bound(self.tau, self.Z, self.D)


def fractional_two_expert_loss(weights, losses, D):
    """Per-round loss ``(1-g) l0 + g l1`` and movement ``D |g_t - g_{t-1}|``.

    The movement entry of the first round is zero.
    """
    g = np.asarray(weights, dtype=float)
    L = np.asarray(losses, dtype=float)
    service = (1.0 - g) * L[:, 0] + g * L[:, 1]
    movement = np.zeros_like(g)
    movement[1:] = D * np.abs(np.diff(g))
    return service, movement


def gate_curve(tau, Z, samples=200, x_min=None, x_max=None):
    """Sample points ``(x, g(x))`` of the clamped gate for plotting."""
    gate = make_gate(tau, Z)
    lo = -0.25 * gate.U if x_min is None else x_min
    hi = 1.25 * gate.U if x_max is None else x_max
    xs = np.linspace(lo, hi, int(samples))
    return xs, np.array([gate(x) for x in xs])
