"""Command-line entry points: run experiments, emit figures, cache truth."""
from __future__ import annotations

import argparse
import json
import sys

from . import figures, harness


def _add_common(p):
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--seed", type=int, action="append", default=None,
                   help="seed (repeatable); overrides the config list")
    p.add_argument("--verbosity", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="repex",
        description="Sequential replicate-or-explore design for noisy simulators")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a sequential-design experiment")
    run_p.add_argument("--config", required=True,
                       help="JSON experiment configuration file")
    run_p.add_argument("--jobs", type=int, default=None,
                       help="parallel seed workers (default: REPEX_THREADS)")
    run_p.add_argument("--resume", action="store_true",
                       help="continue from per-seed checkpoints")
    _add_common(run_p)

    fig_p = sub.add_parser("figure", help="emit figure data, manifest and PNG")
    fig_p.add_argument("figure_id", choices=figures.FIGURE_IDS)
    fig_p.add_argument("--out", default="figures")
    fig_p.add_argument("--budget", type=int, default=None,
                       help="total-run budget for experiment-backed figures")
    fig_p.add_argument("--seeds", type=int, nargs="+", default=None)

    tc_p = sub.add_parser("truth-cache",
                          help="estimate simulator moments on a grid by brute force")
    tc_p.add_argument("--simulator", default="sir")
    tc_p.add_argument("--sim-params", default="{}",
                      help="JSON dict of simulator parameters")
    tc_p.add_argument("--grid", type=int, default=8, help="points per axis")
    tc_p.add_argument("--reps", type=int, default=1000)
    tc_p.add_argument("--seed", type=int, default=0)
    tc_p.add_argument("--out", default="truth")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        with open(args.config) as fh:
            cfg = harness.ExperimentConfig.from_json(fh.read())
        if args.out is not None:
            cfg.out_dir = args.out
        if args.seed:
            cfg.seeds = args.seed
        if args.verbosity is not None:
            cfg.verbosity = args.verbosity
        summary = harness.run_experiment(cfg, n_jobs=args.jobs, resume=args.resume)
        print(json.dumps({k: v for k, v in summary.items() if k != "config"},
                         indent=2, default=str))
        return 0
    if args.command == "figure":
        kwargs = {}
        if args.budget is not None:
            kwargs["n_max"] = args.budget
        if args.seeds is not None:
            kwargs["seeds"] = tuple(args.seeds)
        if args.figure_id in ("fig1", "fig2", "fig3"):
            kwargs = {}
        out = figures.replicate_figure(args.figure_id, args.out, **kwargs)
        print(json.dumps(out, indent=2, default=str))
        return 0
    if args.command == "truth-cache":
        path = harness.truth_cache(args.simulator, json.loads(args.sim_params),
                                   args.grid, args.reps, args.seed, args.out)
        print(path)
        return 0
    return 1


if __name__ == "__main__":
    sys.exit(main())
