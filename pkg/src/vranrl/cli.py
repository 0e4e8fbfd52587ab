"""Command-line entry point: run scenarios, summarize metrics, compare runs."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

from .domain import KpiTargets
from .harness import (
    ConfigError,
    format_summary,
    parse_scenario,
    run_experiment,
    summarize_csv,
    summarize_rows,
)


def _add_run(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("run", help="run a scenario config and emit a metrics CSV")
    p.add_argument("config", help="scenario config file")
    p.add_argument("--out", required=True, help="metrics CSV output path")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument(
        "--periods", type=int, default=None, help="override the number of periods"
    )
    p.add_argument("--snapshot-in", default=None, help="pre-trained agent snapshot")
    p.add_argument("--snapshot-out", default=None, help="save the agent state here")
    p.add_argument("--summary-json", default=None, help="also write the summary as JSON")
    p.add_argument("--quiet", action="store_true", help="do not print the summary")


def _add_summarize(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("summarize", help="summary statistics of a metrics CSV")
    p.add_argument("csv", help="metrics CSV produced by `run`")
    p.add_argument(
        "--cutoff",
        type=int,
        default=None,
        help="convergence cutoff period (default: moving-average rule)",
    )
    p.add_argument("--loss-target", type=float, default=0.01)
    p.add_argument("--latency-target", type=float, default=0.1)
    p.add_argument("--json", action="store_true", help="print JSON instead of text")


def _add_compare(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("compare", help="side-by-side summaries of metrics CSVs")
    p.add_argument("csvs", nargs="+", help="two or more metrics CSVs")
    p.add_argument("--cutoff", type=int, default=None)
    p.add_argument("--loss-target", type=float, default=0.01)
    p.add_argument("--latency-target", type=float, default=0.1)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="vranrl",
        description="RL-driven radio resource management simulator and harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    _add_run(sub)
    _add_summarize(sub)
    _add_compare(sub)
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "summarize":
            return _cmd_summarize(args)
        return _cmd_compare(args)
    except (ConfigError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


def _cmd_run(args) -> int:
    cfg = parse_scenario(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.periods is not None:
        cfg = replace(cfg, periods=args.periods)
    rows = run_experiment(
        cfg,
        out_csv=args.out,
        snapshot_in=args.snapshot_in,
        snapshot_out=args.snapshot_out,
    )
    summary = summarize_rows(rows, targets=cfg.targets)
    if args.summary_json:
        with open(args.summary_json, "w") as fh:
            json.dump(summary.to_dict(), fh, indent=2)
    if not args.quiet:
        print(format_summary(summary))
    return 0


def _cmd_summarize(args) -> int:
    targets = KpiTargets(loss=args.loss_target, latency_s=args.latency_target)
    summary = summarize_csv(args.csv, cutoff=args.cutoff, targets=targets)
    if args.json:
        print(json.dumps(summary.to_dict(), indent=2))
    else:
        print(format_summary(summary))
    return 0


def _cmd_compare(args) -> int:
    targets = KpiTargets(loss=args.loss_target, latency_s=args.latency_target)
    summaries = [
        (path, summarize_csv(path, cutoff=args.cutoff, targets=targets))
        for path in args.csvs
    ]
    header = f"{'file':<40} {'compliance':>10} {'latency_ms':>11} {'loss':>9} {'reward':>8}"
    print(header)
    for path, s in summaries:
        mean_reward = sum(s.per_mt_mean_reward.values()) / len(s.per_mt_mean_reward)
        print(
            f"{path:<40} {s.compliance:>10.4f} {s.mean_latency_s * 1e3:>11.2f} "
            f"{s.mean_loss:>9.5f} {mean_reward:>8.4f}"
        )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
