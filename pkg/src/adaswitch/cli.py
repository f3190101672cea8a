"""Command-line entry point: ``adaswitch <subcommand> [flags]``."""

import argparse
import os
import sys

import numpy as np

from . import adversary as adv
from .gate import TwoExpertsGate, gate_curve
from .harness import (ExperimentConfig, IntervalEvaluator, expert1_bound, fixed_expert_table,
                      dyadic_intervals, read_matrix_csv, run_experiment, write_csv, write_reports)


def _common(p, kind):
    p.add_argument("--config", help="flat key=value file; flags override it")
    p.add_argument("--T", type=int)
    p.add_argument("--D", type=float)
    p.add_argument("--Z", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--workload")
    p.add_argument("--out-dir", default="results")
    if kind == "paging":
        p.add_argument("--n", type=int)
        p.add_argument("--k", type=int)
        p.add_argument("--phases", type=int)
    else:
        p.add_argument("--N", type=int)
        p.add_argument("--segments", type=int)
        p.add_argument("--block", type=int)


def _config(args, kind):
    keys = ("T", "D", "Z", "seed", "workload", "N", "n", "k", "segments", "block", "phases")
    overrides = {k: getattr(args, k, None) for k in keys}
    overrides["kind"] = kind
    if args.config:
        return ExperimentConfig.load(args.config, **overrides)
    return ExperimentConfig.from_mapping({k: v for k, v in overrides.items() if v is not None})


def _run(kind):
    def handler(args):
        summary = run_experiment(_config(args, kind), args.out_dir)
        print(f"wrote {args.out_dir}: total_loss={summary['total_loss']:.6g} "
              f"violations={summary['violations']}/{summary['n_intervals']}")
        return 0 if summary["violations"] == 0 else 1
    return handler


def _gen_adversary(args):
    T, D = args.T, args.D
    Z = args.Z if args.Z is not None else 1.0 / (np.sqrt(D) * T)
    policy = TwoExpertsGate(tau=T, Z=Z, D=D)
    if args.mode == "composition":
        run = adv.interval_composition_adversary(T, policy)
    else:
        run = adv.lower_bound_adversary(policy, T, expert1_bound(T, Z, D), check_precondition=False)
    _write_losses(args.out, run.losses)
    print(f"wrote {args.out}: learner service loss {run.service:.6g} vs T/2 = {T / 2:g}")
    return 0


def _write_losses(path, losses):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    N = losses.shape[1]
    write_csv(path, ["t"] + [f"l_{i}" for i in range(N)], ([t + 1, *row] for t, row in enumerate(losses)))


def _gen_trace(args):
    rng = np.random.default_rng(args.seed)
    if args.workload == "zipf":
        trace = adv.zipf_trace(args.T, args.n, rng, s=args.s)
    elif args.workload == "phased":
        trace = adv.phased_trace(args.T, args.n, args.phases, rng, s=args.s)[0]
    else:
        trace = adv.round_robin_trace(args.T, args.n)
    os.makedirs(os.path.dirname(os.path.abspath(args.out)), exist_ok=True)
    with open(args.out, "w") as fh:
        fh.write("\n".join(str(int(p)) for p in trace) + "\n")
    print(f"wrote {args.out}: {args.T} requests over {args.n} pages")
    return 0


def _gate_curve(args):
    xs, gs = gate_curve(args.tau, args.Z, samples=args.samples)
    write_csv(args.out, ["x", "g"], zip(xs, gs))
    print(f"wrote {args.out}: {len(xs)} points")
    return 0


def _evaluate(args):
    losses = read_matrix_csv(args.losses)
    plays = read_matrix_csv(args.plays)
    if plays.shape != losses.shape:
        raise SystemExit(f"plays {plays.shape} and losses {losses.shape} differ in shape")
    T = losses.shape[0]
    intervals = dyadic_intervals(T) if T & (T - 1) == 0 else [(1, T)]
    reports = fixed_expert_table(plays, losses, args.D, intervals)
    write_reports(args.out, reports)
    ev = IntervalEvaluator.from_plays(plays, losses, args.D)
    print(f"wrote {args.out}: {len(reports)} intervals, total loss {ev.algorithm_loss(1, T):.6g}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="adaswitch", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    for name, kind in (("run-two-experts", "two_experts"), ("run-adaptive", "adaptive"),
                       ("run-paging", "paging")):
        p = sub.add_parser(name, help=f"run the {kind.replace('_', '-')} experiment")
        _common(p, "paging" if kind == "paging" else "experts")
        p.set_defaults(func=_run(kind))

    p = sub.add_parser("gen-adversary", help="adaptive loss sequence against the two-experts learner")
    p.add_argument("--T", type=int, default=1024)
    p.add_argument("--D", type=float, default=1.0)
    p.add_argument("--Z", type=float)
    p.add_argument("--mode", choices=("single", "composition"), default="single")
    p.add_argument("--out", default="adversary.csv")
    p.set_defaults(func=_gen_adversary)

    p = sub.add_parser("gen-trace", help="paging request trace, one page id per line")
    p.add_argument("--T", type=int, default=8192)
    p.add_argument("--n", type=int, default=16)
    p.add_argument("--workload", choices=("zipf", "phased", "round_robin"), default="zipf")
    p.add_argument("--phases", type=int, default=4)
    p.add_argument("--s", type=float, default=1.0, help="Zipf exponent")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="trace.txt")
    p.set_defaults(func=_gen_trace)

    p = sub.add_parser("gate-curve", help="sample points (x, g(x)) of the gate")
    p.add_argument("--tau", type=float, default=1024.0)
    p.add_argument("--Z", type=float, default=1e-4)
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--out", default="gate_curve.csv")
    p.set_defaults(func=_gate_curve)

    p = sub.add_parser("evaluate", help="interval regret of fractional plays against fixed experts")
    p.add_argument("--losses", required=True, help="CSV t,l_0..l_{N-1}")
    p.add_argument("--plays", required=True, help="CSV t,x_0..x_{N-1}")
    p.add_argument("--D", type=float, default=1.0)
    p.add_argument("--out", default="intervals.csv")
    p.set_defaults(func=_evaluate)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
