"""Paging as a metrical task system over k-subsets of n pages.

Costs use the halved model: a request to a page outside the cache costs 1
and every evicted page costs 1/2, so the diameter of the state space is
``k / 2``.  Pages are numbered ``1..n`` in the public API.

The multiplicative-weights policy over all ``C(n, k)`` caches is run
implicitly through product weights ``alpha``: ``p(A) = prod_{i in A}
alpha_i / Psi``, where the partition function ``Psi`` is an elementary
symmetric polynomial computed by dynamic programming in log space.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln
from sklearn.base import BaseEstimator

from .combiner import build_stack, default_Z
from .simplex import build_coupling, transition_sample
from .validation import as_generator, check_horizon

_NEG_INF = -np.inf


def log_comb(n, k):
    return float(gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1))


def _log_psi_table(log_alpha, k):
    """``table[m, j] = log Psi_{m, j}`` over the first ``m`` pages, ``j <= k``."""
    n = log_alpha.shape[0]
    table = np.full((n + 1, k + 1), _NEG_INF)
    table[:, 0] = 0.0
    for m in range(1, n + 1):
        prev = table[m - 1]
        table[m, 1:] = np.logaddexp(log_alpha[m - 1] + prev[:-1], prev[1:])
    return table


class ProductWeights:
    """Positive page weights ``alpha`` (stored as logs) and a subset size ``k``.

    The induced law on k-subsets is invariant under ``alpha -> c * alpha``.
    """

    def __init__(self, log_alpha, k):
        log_alpha = np.array(log_alpha, dtype=float)
        if log_alpha.ndim != 1 or log_alpha.size == 0:
            raise ValueError("log_alpha must be a non-empty 1-D vector")
        if not np.all(np.isfinite(log_alpha)):
            raise ValueError("weights must be strictly positive and finite")
        if not 1 <= k <= log_alpha.shape[0]:
            raise ValueError(f"k must lie in [1, {log_alpha.shape[0]}], got {k}")
        log_alpha.setflags(write=False)
        self.log_alpha = log_alpha
        self.k = int(k)
        self._table = None

    @classmethod
    def uniform(cls, n, k):
        return cls(np.zeros(n), k)

    @classmethod
    def from_alpha(cls, alpha, k):
        alpha = np.asarray(alpha, dtype=float)
        if np.any(alpha <= 0):
            raise ValueError("weights must be strictly positive")
        return cls(np.log(alpha), k)

    @property
    def n(self):
        return self.log_alpha.shape[0]

    @property
    def table(self):
        if self._table is None:
            self._table = _log_psi_table(self.log_alpha, self.k)
        return self._table

    @property
    def log_partition(self):
        return float(self.table[self.n, self.k])

    def boosted(self, page, eta):
        """Weights with ``alpha_page`` multiplied by ``exp(eta)``."""
        log_alpha = self.log_alpha.copy()
        log_alpha[_index(page, self.n)] += eta
        return ProductWeights(log_alpha, self.k)

    def without(self, page, k=None):
        """Weights over the other ``n - 1`` pages (original order kept)."""
        i = _index(page, self.n)
        return ProductWeights(np.delete(self.log_alpha, i), self.k if k is None else k)


def _index(page, n):
    page = int(page)
    if not 1 <= page <= n:
        raise ValueError(f"page {page} outside [1, {n}]")
    return page - 1


@dataclass(frozen=True)
class CacheConfig:
    """A cache: ``k`` distinct page ids, stored sorted."""

    pages: tuple

    def __post_init__(self):
        pages = tuple(sorted(int(p) for p in self.pages))
        if len(set(pages)) != len(pages):
            raise ValueError("cache pages must be distinct")
        if pages and pages[0] < 1:
            raise ValueError("page ids start at 1")
        object.__setattr__(self, "pages", pages)

    @property
    def k(self):
        return len(self.pages)

    def __contains__(self, page):
        return int(page) in self.pages

    def mask(self, n):
        m = np.zeros(n, dtype=bool)
        m[np.asarray(self.pages, dtype=int) - 1] = True
        return m

    @classmethod
    def from_mask(cls, mask):
        return cls(tuple(int(i) + 1 for i in np.flatnonzero(mask)))


def psi(weights, m, j):
    """``log Psi_{m, j}``: log of the sum over j-subsets of pages ``1..m`` of their weight product."""
    if not 0 <= m <= weights.n:
        raise ValueError(f"m must lie in [0, {weights.n}]")
    if j < 0 or j > m:
        raise ValueError(f"need 0 <= j <= m, got j={j}, m={m}")
    if j <= weights.k:
        return float(weights.table[m, j])
    return float(_log_psi_table(weights.log_alpha[:m], j)[m, j])


def subset_prob(weights, A):
    if not isinstance(A, CacheConfig):
        A = CacheConfig(tuple(A))
    if A.k != weights.k:
        raise ValueError(f"cache has {A.k} pages, expected {weights.k}")
    idx = [_index(p, weights.n) for p in A.pages]
    return float(np.exp(weights.log_alpha[idx].sum() - weights.log_partition))


def _inclusion_table(weights):
    """``q[m, j]``: probability of taking page ``m`` given ``j`` slots left among pages ``1..m``."""
    t = weights.table
    q = np.zeros_like(t)
    la = weights.log_alpha
    for m in range(1, weights.n + 1):
        with np.errstate(invalid="ignore"):
            q[m, 1:] = np.exp(la[m - 1] + t[m - 1, :-1] - t[m, 1:])
    q[~np.isfinite(q)] = 1.0
    return np.clip(q, 0.0, 1.0)


def sample_subset(weights, rng):
    """Exact draw from ``p^k_alpha``, deciding pages from ``n`` down to 1."""
    rng = as_generator(rng)
    q = _inclusion_table(weights)
    j = weights.k
    pages = []
    for m in range(weights.n, 0, -1):
        if j == 0:
            break
        if j == m or rng.random() < q[m, j]:
            pages.append(m)
            j -= 1
    return CacheConfig(tuple(pages))


def sample_subset_batch(weights, size, rng):
    """``size`` independent draws as a boolean matrix of shape (size, n)."""
    rng = as_generator(rng)
    q = _inclusion_table(weights)
    n = weights.n
    out = np.zeros((size, n), dtype=bool)
    j = np.full(size, weights.k)
    for m in range(n, 0, -1):
        take = (j > 0) & ((j == m) | (rng.random(size) < q[m, j]))
        out[:, m - 1] = take
        j -= take
    return out


def inclusion_probability(weights, page):
    """``Pr(page in A) = alpha_page * Psi^{-page}_{k-1} / Psi``."""
    i = _index(page, weights.n)
    if weights.k == weights.n:
        return 1.0
    others = weights.without(page)
    return float(np.exp(weights.log_alpha[i] + others.table[-1, weights.k - 1] - weights.log_partition))


def marginals(weights):
    return np.array([inclusion_probability(weights, p) for p in range(1, weights.n + 1)])


@dataclass(frozen=True)
class BoostStep:
    """Quantities of one single-page boost shared by the samplers.

    ``leave`` is the probability of abandoning a cache without the boosted
    page; ``tv`` the total-variation distance between the two subset laws.
    """

    page: int
    others: ProductWeights
    p_in_old: float
    leave: float
    tv: float


def boost_step(weights, page, eta):
    i = _index(page, weights.n)
    if weights.k == weights.n:
        return BoostStep(page, weights, 1.0, 0.0, 0.0)
    others = weights.without(page)
    log_in = weights.log_alpha[i] + others.table[-1, weights.k - 1]
    log_out = others.table[-1, weights.k]
    log_old = np.logaddexp(log_in, log_out)
    p_in = float(np.exp(log_in - log_old))
    # 1 - Psi_old / Psi_new, in a cancellation-free form
    log_new = np.logaddexp(log_in + eta, log_out)
    leave = float(-np.expm1(log_old - log_new))
    return BoostStep(int(page), others, p_in, leave, (1.0 - p_in) * leave)


def _changed_page(w_old, w_new):
    if w_old.n != w_new.n or w_old.k != w_new.k:
        raise ValueError("weights must share n and k")
    # compare up to the gauge freedom alpha -> c alpha
    diff = w_new.log_alpha - w_old.log_alpha
    diff = diff - np.median(diff) if w_old.n > 2 else diff - diff.min()
    moved = np.flatnonzero(np.abs(diff) > 1e-12)
    if moved.size == 0:
        return None, 0.0
    if moved.size > 1 or diff[moved[0]] < 0:
        raise ValueError("transition needs exactly one page weight increased")
    return int(moved[0]) + 1, float(diff[moved[0]])


def min_switch_transition(A_prev, w_old, w_new, rng):
    """Move ``A_prev ~ p^k_{w_old}`` to a cache ``~ p^k_{w_new}`` with minimal switch probability.

    ``w_new`` must raise exactly one page weight.  A cache holding the
    boosted page stays; any other cache leaves with probability
    ``1 - Psi_old / Psi_new`` and is replaced by the boosted page plus a
    ``(k - 1)``-subset of the remaining pages drawn from their product law.
    """
    if not isinstance(A_prev, CacheConfig):
        A_prev = CacheConfig(tuple(A_prev))
    page, eta = _changed_page(w_old, w_new)
    if page is None or page in A_prev:
        return A_prev
    rng = as_generator(rng)
    step = boost_step(w_old, page, eta)
    if rng.random() >= step.leave:
        return A_prev
    return _with_page(step, rng)


def _with_page(step, rng):
    rest = sample_subset(ProductWeights(step.others.log_alpha, step.others.k - 1), rng) \
        if step.others.k > 1 else CacheConfig(())
    pages = [p if p < step.page else p + 1 for p in rest.pages]
    return CacheConfig(tuple(pages) + (step.page,))


def min_switch_transition_batch(masks, w_old, page, eta, rng):
    """Vectorized :func:`min_switch_transition` over replica caches (bool rows)."""
    rng = as_generator(rng)
    masks = np.array(masks, dtype=bool)
    i = _index(page, w_old.n)
    if eta == 0.0 or w_old.k == w_old.n:
        return masks
    step = boost_step(w_old, page, eta)
    movers = np.flatnonzero(~masks[:, i] & (rng.random(masks.shape[0]) < step.leave))
    if movers.size:
        new = np.zeros((movers.size, w_old.n), dtype=bool)
        if w_old.k > 1:
            rest = sample_subset_batch(ProductWeights(step.others.log_alpha, w_old.k - 1),
                                       movers.size, rng)
            new[:, np.arange(w_old.n) != i] = rest
        new[:, i] = True
        masks[movers] = new
    return masks


def paging_loss(C, page):
    """1 when ``page`` is not cached, else 0 (halved model)."""
    return 0.0 if int(page) in C else 1.0


def cache_distance(C1, C2):
    """Number of pages of ``C1`` missing from ``C2``; each costs 1/2 in the halved model."""
    return len(set(C1.pages) - set(C2.pages))


def paging_mw_eta(n, k, T):
    return math.sqrt(log_comb(n, k) / (k * T))


@dataclass
class PagingMWState:
    """Mutable state of the paging multiplicative-weights policy."""

    weights: ProductWeights
    eta: float
    current_cache: CacheConfig
    T: int
    t: int = 0


def make_paging_mw(n, k, T, rng):
    w = ProductWeights.uniform(n, k)
    return PagingMWState(weights=w, eta=paging_mw_eta(n, k, T), current_cache=sample_subset(w, rng),
                         T=int(T))


def paging_mw_round(state, requested_page, rng):
    """Serve one request, boost its weight and move the cache.

    Returns the cache used this round and whether it missed; ``state`` is
    advanced in place.
    """
    if state.t >= state.T:
        raise ValueError("paging MW ran past its horizon")
    _index(requested_page, state.weights.n)
    rng = as_generator(rng)
    played = state.current_cache
    miss = requested_page not in played
    w_new = state.weights.boosted(requested_page, state.eta)
    if miss:
        step = boost_step(state.weights, requested_page, state.eta)
        if rng.random() < step.leave:
            state.current_cache = _with_page(step, rng)
    state.weights = w_new
    state.t += 1
    return played, miss


class PagingMW(BaseEstimator):
    """Multiplicative weights over all caches, run through product weights.

    Parameters
    ----------
    n, k : int
        Pages and cache size.
    T : int
        Horizon used for the step size ``eta = sqrt(log C(n,k) / (k T))``.
    random_state : int or Generator, optional

    Attributes
    ----------
    misses_ : ndarray of bool, shape (T,)
        Realized misses from ``fit``.
    evictions_ : ndarray of int, shape (T,)
        Pages evicted after each round.
    expected_miss_ : ndarray, shape (T,)
        ``1 - Pr(page in A_t)`` under the exact subset law.
    switch_prob_ : ndarray, shape (T,)
        Total-variation distance between consecutive subset laws.
    """

    def __init__(self, n, k, T, random_state=None):
        self.n = n
        self.k = k
        self.T = T
        self.random_state = random_state

    def _reset(self, rng=None):
        self.rng_ = as_generator(self.random_state if rng is None else rng)
        self.state_ = make_paging_mw(self.n, self.k, self.T, self.rng_)
        self.cache_mask = self.state_.current_cache.mask(self.n)

    def current_cache(self):
        if not hasattr(self, "state_"):
            self._reset()
        return self.state_.current_cache

    def observe(self, page):
        if not hasattr(self, "state_"):
            self._reset()
        _, miss = paging_mw_round(self.state_, page, self.rng_)
        self.cache_mask = self.state_.current_cache.mask(self.n)
        return miss

    def fit(self, requests, y=None):
        requests = check_requests(requests, self.n)
        self._reset()
        T = requests.shape[0]
        misses = np.zeros(T, dtype=bool)
        evictions = np.zeros(T, dtype=int)
        expected = np.zeros(T)
        switch = np.zeros(T)
        for t, page in enumerate(requests):
            step = boost_step(self.state_.weights, page, self.state_.eta)
            expected[t] = 1.0 - step.p_in_old
            switch[t] = step.tv
            before = self.state_.current_cache
            misses[t] = self.observe(page)
            evictions[t] = cache_distance(before, self.state_.current_cache)
        self.misses_ = misses
        self.evictions_ = evictions
        self.expected_miss_ = expected
        self.switch_prob_ = switch
        return self

    def fractional_loss(self):
        """Expected misses plus ``k/2`` per unit of total-variation movement."""
        return float(self.expected_miss_.sum() + 0.5 * self.k * self.switch_prob_.sum())

    def realized_loss(self):
        return float(self.misses_.sum() + 0.5 * self.evictions_.sum())


class RestartingPagingMW:
    """Paging MW restarted from uniform weights every ``period`` rounds.

    A restart draws a fresh cache, and the resulting evictions are charged.
    """

    # a realized cache may jump anywhere: one diameter per step
    declared_slowness = 1.0

    def __init__(self, n, k, period, T, rng):
        self.n, self.k = int(n), int(k)
        self.period = int(period)
        self.T = int(T)
        self.rng = as_generator(rng)
        self.t = 0
        self.state = make_paging_mw(n, k, min(self.period, self.T), self.rng)
        self.cache_mask = self.state.current_cache.mask(self.n)

    def observe(self, page):
        _, miss = paging_mw_round(self.state, page, self.rng)
        self.t += 1
        if self.t % self.period == 0 and self.t < self.T:
            self.state = make_paging_mw(self.n, self.k, min(self.period, self.T - self.t), self.rng)
        self.cache_mask = self.state.current_cache.mask(self.n)
        return miss


class RandomizedMarking:
    """Randomized marking starting from pages ``1..k``.

    On a miss: if every cached page is marked, unmark all; evict a uniform
    unmarked page; cache and mark the request.  Hits mark the page.
    """

    declared_slowness = 1.0

    def __init__(self, n, k, rng):
        if not 1 <= k <= n:
            raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
        self.n, self.k = int(n), int(k)
        self.rng = as_generator(rng)
        self.cache_mask = np.zeros(n, dtype=bool)
        self.cache_mask[:k] = True
        self.marked = np.zeros(n, dtype=bool)

    def current_cache(self):
        return CacheConfig.from_mask(self.cache_mask)

    def observe(self, page):
        i = _index(page, self.n)
        if self.cache_mask[i]:
            self.marked[i] = True
            return False
        unmarked = np.flatnonzero(self.cache_mask & ~self.marked)
        if unmarked.size == 0:
            self.marked[:] = False
            unmarked = np.flatnonzero(self.cache_mask)
        victim = unmarked[self.rng.integers(unmarked.size)]
        self.cache_mask = self.cache_mask.copy()
        self.cache_mask[victim] = False
        self.cache_mask[i] = True
        self.marked[i] = True
        return True


def marking_round(state, requested_page, rng=None):
    """Serve one request with :class:`RandomizedMarking`; returns (cache used, miss)."""
    if rng is not None:
        state.rng = as_generator(rng)
    played = state.current_cache()
    return played, state.observe(requested_page)


def check_requests(requests, n):
    arr = np.asarray(requests)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("requests must be a non-empty 1-D sequence")
    if not np.issubdtype(arr.dtype, np.integer):
        if not np.all(arr == np.round(arr)):
            raise ValueError("page ids must be integers")
        arr = arr.astype(int)
    if arr.min() < 1 or arr.max() > n:
        raise ValueError(f"page ids must lie in [1, {n}]")
    return arr


class PagingSpace:
    """Members hold caches; a prefix follows a member drawn from its weights.

    Costs are in the halved model.  The gate runs with unit switching cost
    on costs divided by ``unit = max(k/2, 1)``, so one member step costs at
    most 2 scaled units and ``M = 1`` keeps scaled losses in [0, 1].
    """

    is_dense = False

    def __init__(self, k):
        self.k = int(k)
        self.unit = max(0.5 * k, 1.0)
        self.gate_D = 1.0

    def read(self, member):
        return member.cache_mask

    def prepare(self, acts_now, acts_next, page):
        now = np.vstack(acts_now)
        nxt = np.vstack(acts_next)
        service = (~now[:, int(page) - 1]).astype(float)
        dist = 0.5 * (now[:, None, :] & ~nxt[None, :, :]).sum(axis=2)
        return service, dist

    def cost(self, prep, w_now, w_next):
        service, dist = prep
        p = w_now.shape[0]
        s = float(service[:p] @ w_now)
        if np.array_equal(w_now, w_next) and np.count_nonzero(w_now) == 1:
            j = int(np.flatnonzero(w_now)[0])
            return s + float(dist[j, j])
        joint = build_coupling(w_now, w_next).joint
        return s + float((joint * dist[:p, :p]).sum())


@dataclass
class PagingRunResult:
    """Per-round record of a paging policy run (halved-model costs)."""

    miss: np.ndarray
    movement: np.ndarray
    expected_loss: np.ndarray = field(default=None)
    base_loss: np.ndarray = field(default=None)


class CompetitiveAdaptivePaging:
    """Marking as the protected base, restarted paging MW at every dyadic scale.

    Level ``u`` restarts paging MW every ``T / 2^u`` rounds, ``u = 0..log2 T``.
    The realized cache follows one member, re-drawn each round through the
    member-level coupling of consecutive weights, so the expected cost per
    round equals the fractional cost the gates are trained on.
    """

    def __init__(self, n, k, T, Z=None, rng=None):
        self.n, self.k = int(n), int(k)
        self.T = check_horizon(T)
        self.Z = default_Z(self.T) if Z is None else float(Z)
        seeds = np.random.SeedSequence(_entropy(rng)).spawn(self.T.bit_length() + 2)
        self.marking = RandomizedMarking(n, k, np.random.default_rng(seeds[0]))
        self.levels = [RestartingPagingMW(n, k, self.T >> u, self.T, np.random.default_rng(seeds[u + 1]))
                       for u in range(self.T.bit_length())]
        self.space = PagingSpace(k)
        self.stack = build_stack(self.marking, self.levels, self.T, D=1.0, Z=self.Z,
                                 space=self.space, M=1.0, check_slowness=False)
        self.rng = np.random.default_rng(seeds[-1])
        self.follow = 0
        self.t = 0

    @property
    def members(self):
        return self.stack.members

    def current_cache(self):
        return CacheConfig.from_mask(self.members[self.follow].cache_mask)

    def observe(self, page):
        """Serve ``page``; returns (realized miss, realized movement, expected cost)."""
        members = self.members
        acts_now = [m.cache_mask for m in members]
        w_now = self.stack.weights()
        self.stack.observe(page)
        acts_next = [m.cache_mask for m in members]
        w_next = self.stack.weights()
        prep = self.space.prepare(acts_now, acts_next, page)
        expected = self.space.cost(prep, w_now, w_next)
        cur = acts_now[self.follow]
        miss = not cur[int(page) - 1]
        self.follow = transition_sample(self.follow, w_now, w_next, self.rng)
        movement = 0.5 * float((cur & ~acts_next[self.follow]).sum())
        self.t += 1
        return miss, movement, expected, float(prep[0][0] + prep[1][0, 0])

    def run(self, requests):
        requests = check_requests(requests, self.n)
        T = requests.shape[0]
        miss = np.zeros(T, dtype=bool)
        movement = np.zeros(T)
        expected = np.zeros(T)
        base = np.zeros(T)
        for t, page in enumerate(requests):
            miss[t], movement[t], expected[t], base[t] = self.observe(page)
        return PagingRunResult(miss=miss, movement=movement, expected_loss=expected, base_loss=base)


def _entropy(rng):
    if isinstance(rng, np.random.Generator):
        return int(rng.integers(2**63))
    return rng


def competitive_adaptive_paging(n, k, T, Z=None, rng=None):
    """Build the marking-protected adaptive paging policy."""
    return CompetitiveAdaptivePaging(n, k, T, Z=Z, rng=rng)
