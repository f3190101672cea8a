"""Interval-regret evaluation, offline comparators and experiment orchestration.

Interval regret follows one convention throughout: on ``I = [a, b]``
(1-based, inclusive) the learner pays ``sum_{t in I} <l_t, x_t>`` plus
``D * TV(x_{t-1}, x_t)`` for ``t in I`` except ``t = a``.
"""

import csv
import itertools
import math
import os
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import adversary as adv
from .combiner import StronglyAdaptiveExperts, default_Z
from .gate import TwoExpertsGate
from .paging import check_requests, competitive_adaptive_paging
from .simplex import fractional_loss, rollout
from .validation import as_generator, check_horizon, check_loss_matrix, check_Z

COMPARATORS = ("best_fixed_expert", "best_fixed_cache", "s_switch_sequence", "base_algorithm")
ADAPTIVE_C = 30.0
ROLLOUTS = 20


@dataclass
class RegretReport:
    interval: tuple
    algorithm_loss: float
    comparator_loss: float
    comparator: str
    regret: float
    bound: float = math.inf
    bound_satisfied: bool = True

    def __post_init__(self):
        if self.comparator not in COMPARATORS:
            raise ValueError(f"unknown comparator {self.comparator!r}")


def _report(interval, alg, comp, comparator, bound):
    regret = alg - comp
    return RegretReport(interval=tuple(interval), algorithm_loss=alg, comparator_loss=comp,
                        comparator=comparator, regret=regret, bound=bound,
                        bound_satisfied=bool(regret <= bound))


def check_interval(I, T):
    a, b = int(I[0]), int(I[1])
    if not 1 <= a <= b <= T:
        raise ValueError(f"interval {I} is not inside [1, {T}]")
    return a, b


def round_costs(plays, losses, D):
    """Per-round service ``<l_t, x_t>`` and movement ``D * TV(x_{t-1}, x_t)`` (zero at t = 1)."""
    X = np.asarray(plays, dtype=float)
    L = np.asarray(losses, dtype=float)
    if X.shape != L.shape:
        raise ValueError(f"plays {X.shape} and losses {L.shape} differ in shape")
    service = np.einsum("ij,ij->i", X, L)
    movement = np.zeros(X.shape[0])
    movement[1:] = D * 0.5 * np.abs(np.diff(X, axis=0)).sum(axis=1)
    return service, movement


class IntervalEvaluator:
    """Prefix sums for O(1) interval losses of a run and of fixed comparators."""

    def __init__(self, service, movement, column_losses=None):
        self.T = len(service)
        self.S = np.concatenate([[0.0], np.cumsum(service)])
        self.Mv = np.concatenate([[0.0], np.cumsum(movement)])
        self.CL = None if column_losses is None else np.vstack(
            [np.zeros(np.shape(column_losses)[1]), np.cumsum(column_losses, axis=0)])

    @classmethod
    def from_plays(cls, plays, losses, D):
        service, movement = round_costs(plays, losses, D)
        return cls(service, movement, losses)

    def algorithm_loss(self, a, b):
        """Loss on ``[a, b]`` (1-based), movement from the second round on."""
        return float(self.S[b] - self.S[a - 1] + self.Mv[b] - self.Mv[a])

    def column_loss(self, a, b):
        return self.CL[b] - self.CL[a - 1]

    def algorithm_losses(self, starts, ends):
        starts, ends = np.asarray(starts), np.asarray(ends)
        return self.S[ends] - self.S[starts - 1] + self.Mv[ends] - self.Mv[starts]

    def column_losses(self, starts, ends):
        return self.CL[np.asarray(ends)] - self.CL[np.asarray(starts) - 1]


def best_fixed_expert(losses, I=None):
    L = np.asarray(losses, dtype=float)
    a, b = (1, L.shape[0]) if I is None else check_interval(I, L.shape[0])
    return float(L[a - 1:b].sum(axis=0).min())


def best_s_switch_comparator(losses, I, s, D):
    """Cheapest expert path on ``I`` with at most ``s`` switches, each costing ``D``."""
    if s < 0:
        raise ValueError("s must be non-negative")
    L = np.asarray(losses, dtype=float)
    a, b = check_interval(I, L.shape[0])
    seg = L[a - 1:b]
    s = min(int(s), seg.shape[0] - 1)
    # f[j, i]: best cost using exactly j switches, currently on expert i
    f = np.full((s + 1, L.shape[1]), np.inf)
    f[0] = seg[0]
    for row in seg[1:]:
        switched = np.full_like(f, np.inf)
        switched[1:] = f[:-1].min(axis=1, keepdims=True) + D
        f = np.minimum(f, switched) + row
    return float(f.min())


def interval_regret(actions, losses, I, D, comparator="best_fixed_expert", bound=math.inf,
                    comparator_actions=None, s=None, expert=None):
    """Regret of fractional plays on interval ``I``.

    ``comparator`` selects the benchmark: the best fixed expert (or the
    fixed ``expert`` when given), the best path with at most ``s``
    switches, or another run ``comparator_actions`` charged by the same
    convention.
    """
    X = np.asarray(actions, dtype=float)
    L = check_loss_matrix(losses)
    a, b = check_interval(I, L.shape[0])
    ev = IntervalEvaluator.from_plays(X, L, D)
    alg = ev.algorithm_loss(a, b)
    if comparator == "best_fixed_expert":
        cols = ev.column_loss(a, b)
        comp = float(cols.min() if expert is None else cols[expert])
    elif comparator == "s_switch_sequence":
        if s is None:
            raise ValueError("the s-switch comparator needs s")
        comp = best_s_switch_comparator(L, (a, b), s, D)
    elif comparator == "base_algorithm":
        if comparator_actions is None:
            raise ValueError("the base comparator needs comparator_actions")
        comp = IntervalEvaluator.from_plays(comparator_actions, L, D).algorithm_loss(a, b)
    else:
        raise ValueError(f"comparator {comparator!r} does not apply to expert runs")
    return _report((a, b), alg, comp, comparator, bound)


def dyadic_intervals(T):
    """All aligned dyadic intervals of ``[1, T]``, longest first: ``2T - 1`` of them."""
    T = check_horizon(T)
    out = []
    length = T
    while length >= 1:
        out.extend((j * length + 1, (j + 1) * length) for j in range(T // length))
        length //= 2
    return out


def dyadic_decomposition(a, b):
    """Split ``[a, b]`` into disjoint aligned dyadic intervals (greedy, fewest pieces)."""
    out = []
    start = a
    while start <= b:
        length = 1
        while (start - 1) % (2 * length) == 0 and start + 2 * length - 1 <= b:
            length *= 2
        out.append((start, start + length - 1))
        start += length
    return out


def chained_bound(I, bound_fn):
    """Bound on ``I`` assembled from its dyadic pieces: ``sum bound_fn(|piece|)``."""
    return float(sum(bound_fn(b - a + 1) for a, b in dyadic_decomposition(*I)))


@dataclass
class RolloutReport:
    fractional_loss: float
    mean: float
    ci_halfwidth: float
    n_rollouts: int


def rollout_report(plays, losses, D, n_rollouts, rng):
    """Integral runs sampled from fractional plays, with a 95% normal confidence interval."""
    if n_rollouts < 2:
        raise ValueError("need at least two rollouts")
    rng = as_generator(rng)
    totals = np.array([rollout(plays, losses, D, rng)[1] for _ in range(n_rollouts)])
    half = 1.96 * totals.std(ddof=1) / math.sqrt(n_rollouts)
    return RolloutReport(fractional_loss(plays, losses, D), float(totals.mean()), float(half), n_rollouts)


def fixed_expert_table(plays, losses, D, intervals, bound_fn=None, expert=None):
    """RegretReports over many intervals against the best (or a given) fixed expert."""
    ev = IntervalEvaluator.from_plays(plays, losses, D)
    starts = np.array([I[0] for I in intervals])
    ends = np.array([I[1] for I in intervals])
    alg = ev.algorithm_losses(starts, ends)
    cols = ev.column_losses(starts, ends)
    comp = cols.min(axis=1) if expert is None else cols[:, expert]
    reports = []
    for I, al, cp in zip(intervals, alg, comp):
        bound = math.inf if bound_fn is None else bound_fn(I[1] - I[0] + 1)
        reports.append(_report(I, float(al), float(cp), "best_fixed_expert", bound))
    return reports


# Bounds for the two-experts learner.

def expert0_bound(T, tau, Z, D, length):
    return min(math.sqrt(D) * T * Z,
               math.sqrt(16.0 * D * tau * math.log(1.0 / Z)) + 2.0 * math.sqrt(D) + math.sqrt(D) * length * Z)


def expert1_bound(tau, Z, D):
    return math.sqrt(64.0 * D * tau * math.log(1.0 / Z)) + 4.0 * math.sqrt(D) + math.sqrt(D) * tau * Z


def fixed_share_bound(tau, N, D):
    return math.sqrt(16.0 * D * tau * math.log(N * tau))


def adaptive_bound(length, N, T, D, C=ADAPTIVE_C):
    return C * math.sqrt(D * length * math.log(N * T))


def paging_adaptive_bound(length, n, k, T, C=ADAPTIVE_C):
    return C * k * math.sqrt(length * math.log(n * T))


# Paging comparators.

def best_fixed_cache(requests, n, k, I=None):
    """Fewest misses of a fixed cache on ``I``: the ``k`` most requested pages stay."""
    r = check_requests(requests, n)
    a, b = (1, r.shape[0]) if I is None else check_interval(I, r.shape[0])
    counts = np.bincount(r[a - 1:b], minlength=n + 1)[1:]
    return float((b - a + 1) - np.sort(counts)[::-1][:k].sum())


def belady_faults(requests, k):
    """Fetches of the farthest-in-future policy, with the first ``k`` distinct pages preloaded free."""
    r = [int(p) for p in requests]
    T = len(r)
    nxt = [T] * T
    last = {}
    for t in range(T - 1, -1, -1):
        nxt[t] = last.get(r[t], T)
        last[r[t]] = t
    cache = {}
    faults = 0
    for t, p in enumerate(r):
        if p in cache:
            cache[p] = nxt[t]
            continue
        if len(cache) >= k:
            victim = max(cache, key=cache.get)
            del cache[victim]
            faults += 1
        cache[p] = nxt[t]
    return faults


def paging_opt_halved(requests, k):
    """Offline optimum in the halved model: 1/2 per fetch, never a miss."""
    return 0.5 * belady_faults(requests, k)


def mts_paging_opt(requests, n, k, max_states=5000):
    """Offline optimum by dynamic programming over all k-subsets (halved costs, free start).

    The state at round ``t`` serves request ``t``: a miss costs 1 and moving
    from ``C`` to ``C'`` costs ``|C - C'| / 2``.
    """
    r = check_requests(requests, n)
    states = list(itertools.combinations(range(1, n + 1), k))
    if len(states) > max_states:
        raise ValueError(f"{len(states)} states exceed the limit of {max_states}")
    masks = np.array([[p in s for p in range(1, n + 1)] for s in states])
    move = 0.5 * (masks[:, None, :] & ~masks[None, :, :]).sum(axis=2)
    cost = (~masks[:, r[0] - 1]).astype(float)
    for p in r[1:]:
        cost = (cost[:, None] + move).min(axis=0) + (~masks[:, p - 1])
    return float(cost.min())


@dataclass
class CompetitiveReport:
    algorithm_loss: float
    offline_opt: float
    ratio: float = None
    additive: bool = False


def competitive_ratio(algorithm_loss, offline_opt):
    """``algorithm_loss / offline_opt``; with a zero optimum only the two losses are reported."""
    if offline_opt < 0:
        raise ValueError("offline optimum must be non-negative")
    if offline_opt == 0:
        return CompetitiveReport(float(algorithm_loss), 0.0, None, True)
    return CompetitiveReport(float(algorithm_loss), float(offline_opt),
                             float(algorithm_loss) / float(offline_opt))


# Experiments.

KINDS = ("two_experts", "adaptive", "paging")
EXPERT_WORKLOADS = ("iid", "piecewise_stationary", "flip_flop", "adversary")
PAGING_WORKLOADS = ("zipf", "phased", "round_robin")


@dataclass
class ExperimentConfig:
    """Flat experiment description; ``load`` reads ``key=value`` lines."""

    kind: str = "two_experts"
    T: int = 1024
    N: int = 2
    n: int = 16
    k: int = 3
    D: float = 1.0
    Z: float = None
    seed: int = 0
    workload: str = "iid"
    segments: int = 4
    block: int = 0
    zipf_s: float = 1.0
    phases: int = 4

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        check_horizon(self.T)
        if self.D < 1:
            raise ValueError("D must be >= 1")
        if self.Z is not None:
            check_Z(self.Z)
        allowed = PAGING_WORKLOADS if self.kind == "paging" else EXPERT_WORKLOADS
        if self.workload not in allowed:
            raise ValueError(f"workload for {self.kind} must be one of {allowed}")
        if self.kind == "two_experts" and self.N != 2:
            raise ValueError("the two-experts run needs N = 2")
        if self.kind == "paging" and not 1 <= self.k <= self.n:
            raise ValueError("need 1 <= k <= n")

    @classmethod
    def load(cls, path, **overrides):
        values = {}
        with open(path) as fh:
            for line in fh:
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                key, sep, value = line.partition("=")
                if not sep:
                    raise ValueError(f"malformed config line {line!r}")
                values[key.strip()] = value.strip()
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_mapping(values)

    @classmethod
    def from_mapping(cls, values):
        types = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for key, value in values.items():
            if key not in types:
                raise ValueError(f"unknown config key {key!r}")
            kwargs[key] = _coerce(value, types[key])
        return cls(**kwargs)

    def resolved_Z(self):
        if self.Z is not None:
            return self.Z
        if self.kind == "two_experts":
            return min(1.0 / (math.sqrt(self.D) * self.T), 1.0 / math.e)
        return default_Z(self.T)


def _coerce(value, typ):
    if not isinstance(value, str):
        return value
    if value.lower() in ("none", ""):
        return None
    if typ in (int, "int"):
        return int(value)
    if typ in (float, "float"):
        return float(value)
    return value


def fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def read_matrix_csv(path, skip_first_column=True):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    data = np.array([[float(v) for v in row] for row in rows[1:]])
    return data[:, 1:] if skip_first_column else data


def expert_workload(cfg, rng):
    T, N = cfg.T, cfg.N
    if cfg.workload == "iid":
        return adv.iid_losses(T, N, rng, kind="uniform")
    if cfg.workload == "piecewise_stationary":
        return adv.piecewise_stationary(T, N, cfg.segments, rng)[0]
    if cfg.workload == "flip_flop":
        block = cfg.block or max(1, round(T ** 0.1))
        return adv.flip_flop(T, block, N)
    raise ValueError(f"workload {cfg.workload!r} is generated against a policy")


def paging_workload(cfg, rng):
    if cfg.workload == "zipf":
        return adv.zipf_trace(cfg.T, cfg.n, rng, s=cfg.zipf_s)
    if cfg.workload == "phased":
        return adv.phased_trace(cfg.T, cfg.n, cfg.phases, rng, s=cfg.zipf_s)[0]
    return adv.round_robin_trace(cfg.T, cfg.n)


def _run_two_experts(cfg, rng):
    Z = cfg.resolved_Z()
    est = TwoExpertsGate(tau=cfg.T, Z=Z, D=cfg.D)
    if cfg.workload == "adversary":
        M = expert1_bound(cfg.T, Z, cfg.D)
        run = adv.lower_bound_adversary(est, cfg.T, M, check_precondition=False)
        losses, g = run.losses, run.weights
    else:
        losses = expert_workload(cfg, rng)
        g = est.fit(losses).weights_
    plays = np.column_stack([1.0 - g, g])
    b0 = lambda n: expert0_bound(cfg.T, cfg.T, Z, cfg.D, n)
    reports = fixed_expert_table(plays, losses, cfg.D, dyadic_intervals(cfg.T), b0, expert=0)
    b1 = expert1_bound(cfg.T, Z, cfg.D)
    reports += fixed_expert_table(plays, losses, cfg.D, [(1, cfg.T)], lambda n: b1, expert=1)
    return plays, losses, reports, {"Z": Z}


def _run_adaptive(cfg, rng):
    Z = cfg.resolved_Z()
    losses = expert_workload(cfg, rng)
    est = StronglyAdaptiveExperts(cfg.N, cfg.T, D=cfg.D, Z=Z).fit(losses)
    bound = lambda n: adaptive_bound(n, cfg.N, cfg.T, cfg.D)
    reports = fixed_expert_table(est.plays_, losses, cfg.D, dyadic_intervals(cfg.T), bound)
    return est.plays_, losses, reports, {"Z": Z}


def run_paging(cfg, requests=None, rng=None):
    """Run the marking-protected adaptive policy; returns (requests, result, reports, extra)."""
    rng = as_generator(cfg.seed if rng is None else rng)
    requests = paging_workload(cfg, rng) if requests is None else check_requests(requests, cfg.n)
    Z = cfg.resolved_Z()
    policy = competitive_adaptive_paging(cfg.n, cfg.k, cfg.T, Z=Z, rng=int(rng.integers(2**63)))
    res = policy.run(requests)
    ev = IntervalEvaluator(res.expected_loss, np.zeros(cfg.T))
    reports = []
    for I in dyadic_intervals(cfg.T):
        alg = ev.algorithm_loss(*I)
        comp = best_fixed_cache(requests, cfg.n, cfg.k, I)
        bound = paging_adaptive_bound(I[1] - I[0] + 1, cfg.n, cfg.k, cfg.T)
        reports.append(_report(I, alg, comp, "best_fixed_cache", bound))
    base_total = float(res.base_loss.sum())
    reports.append(_report((1, cfg.T), float(res.expected_loss.sum()), base_total, "base_algorithm",
                           float(cfg.k)))
    return requests, res, reports, {"Z": Z}


def run_experiment(config, out_dir):
    """Run ``config`` and write ``rounds.csv``, ``intervals.csv`` and ``summary.csv``.

    Output is a deterministic function of the config (including its seed).
    Returns the summary as a dict.
    """
    cfg = config if isinstance(config, ExperimentConfig) else ExperimentConfig.from_mapping(config)
    os.makedirs(out_dir, exist_ok=True)
    rng = np.random.default_rng(cfg.seed)
    if cfg.kind == "paging":
        requests, res, reports, extra = run_paging(cfg, rng=rng)
        cum = np.cumsum(res.expected_loss)
        base_cum = np.cumsum(res.base_loss)
        write_csv(os.path.join(out_dir, "rounds.csv"),
                  ["t", "page", "miss", "movement_cost", "cumulative_loss", "comparator_loss"],
                  ((t + 1, requests[t], res.miss[t], res.movement[t], cum[t], base_cum[t])
                   for t in range(cfg.T)))
        realized = float(res.miss.sum() + res.movement.sum())
        extra.update(realized_loss=realized, base_loss=float(base_cum[-1]))
    else:
        runner = _run_two_experts if cfg.kind == "two_experts" else _run_adaptive
        plays, losses, reports, extra = runner(cfg, rng)
        rolled = rollout_report(plays, losses, cfg.D, ROLLOUTS, rng)
        extra.update(rollout_mean=rolled.mean, rollout_ci_halfwidth=rolled.ci_halfwidth)
        service, movement = round_costs(plays, losses, cfg.D)
        cum = np.cumsum(service + movement)
        header = ["t"] + [f"l_{i}" for i in range(cfg.N)] + [f"x_{i}" for i in range(cfg.N)] + \
            ["service", "movement_cost", "cumulative_loss"]
        write_csv(os.path.join(out_dir, "rounds.csv"), header,
                  ([t + 1, *losses[t], *plays[t], service[t], movement[t], cum[t]] for t in range(cfg.T)))
    write_reports(os.path.join(out_dir, "intervals.csv"), reports)
    summary = dict(asdict(cfg))
    summary.update(extra)
    summary.update(total_loss=float(cum[-1]), n_intervals=len(reports),
                   violations=sum(not r.bound_satisfied for r in reports),
                   max_regret=max(r.regret for r in reports))
    write_csv(os.path.join(out_dir, "summary.csv"), ["key", "value"], sorted(summary.items()))
    return summary


def write_reports(path, reports):
    write_csv(path, ["start", "end", "comparator", "algorithm_loss", "comparator_loss", "regret", "bound",
                     "bound_satisfied"],
              ((r.interval[0], r.interval[1], r.comparator, r.algorithm_loss, r.comparator_loss, r.regret,
                r.bound, r.bound_satisfied) for r in reports))
