"""Command line front end.

Subcommands:
  run       execute the scheduler x seed grid of a config, write CSV reports
  validate  check a config and print diagnostics
  synth     generate a synthetic contact trace file

Exit codes: 0 ok, 1 configuration error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import sys
import traceback
from pathlib import Path

import numpy as np

from . import metrics, sim, traceio
from .config import ConfigError, PRESETS, RunConfig, make_config, validate_config


def _common_flags(parser):
    parser.add_argument("--config", metavar="PATH", default=None,
                        help="key=value config file")
    parser.add_argument("--preset", metavar="NAME", default=None,
                        help=f"built-in preset ({', '.join(sorted(PRESETS))})")
    parser.add_argument("--scheduler", metavar="NAME[,NAME...]", default=None,
                        help="scheduler(s) to run")
    parser.add_argument("--seeds", metavar="N|LIST", default=None,
                        help="seed count (N means 0..N-1) or comma list")
    parser.add_argument("--out", metavar="DIR", default=None,
                        help="output directory")


def _flag_overrides(args) -> dict:
    overrides: dict = {}
    if args.scheduler:
        overrides["schedulers"] = [s.strip() for s in args.scheduler.split(",")
                                   if s.strip()]
    if args.seeds:
        parts = [p for p in args.seeds.split(",") if p.strip()]
        seeds = [int(p) for p in parts]
        if len(seeds) == 1 and "," not in args.seeds:
            seeds = list(range(seeds[0]))
        overrides["seeds"] = seeds
    if args.out:
        overrides["out_dir"] = args.out
    return overrides


def _build_config(args) -> RunConfig:
    return make_config(preset=args.preset, file_path=args.config,
                       overrides=_flag_overrides(args))


def run_experiment(config: RunConfig) -> int:
    """Run schedulers x seeds, one CSV per run plus a mean-over-seeds summary."""
    diags = validate_config(config)
    if diags:
        for d in diags:
            print(f"config error: {d}", file=sys.stderr)
        return 1
    if config.ratings_path is None:
        print("config error: ratings_path is required to run", file=sys.stderr)
        return 1

    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        ground_truth = traceio.parse_ratings(config.ratings_path,
                                             config.binarize_threshold)
        events = None
        if config.trace_path is not None:
            events = traceio.parse_contact_trace(config.trace_path)
    except (traceio.ParseError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1

    summary_rows = []
    for kind in config.schedulers:
        finals = []
        for seed in config.seeds:
            try:
                result = sim.run(config, events, ground_truth, kind, seed)
            except ConfigError as exc:
                for d in exc.diagnostics:
                    print(f"config error: {d}", file=sys.stderr)
                return 1
            except Exception:
                marker = out / "FAILED"
                marker.write_text(
                    f"scheduler={kind} seed={seed}\n{traceback.format_exc()}")
                print(f"run failed ({kind}, seed {seed}); see {marker}",
                      file=sys.stderr)
                return 2
            report = metrics.build_report(result)
            path = out / f"{kind}_seed{seed}.csv"
            metrics.emit_report(report, path)
            result.log.write_csv(out / f"{kind}_seed{seed}_log.csv")
            print(f"wrote {path}")
            last = report.snapshots[-1]
            finals.append((last[1], last[2], last[3], report.precision,
                           report.avg_positive_per_user,
                           report.users_satisfied))
        mean = np.mean(np.array(finals, dtype=float), axis=0)
        summary_rows.append([kind, len(config.seeds)] +
                            [repr(float(v)) for v in mean])

    summary = out / "summary.csv"
    with open(summary, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scheduler", "seeds", "positive_ratings_discovered",
                         "coverage", "fcpp", "precision",
                         "avg_positive_items_per_user",
                         "users_with_useful_item"])
        writer.writerows(summary_rows)
    print(f"wrote {summary}")
    return 0


def _cmd_run(args) -> int:
    try:
        config = _build_config(args)
    except ConfigError as exc:
        for d in exc.diagnostics:
            print(f"config error: {d}", file=sys.stderr)
        return 1
    return run_experiment(config)


def _cmd_validate(args) -> int:
    try:
        config = _build_config(args)
    except ConfigError as exc:
        for d in exc.diagnostics:
            print(f"config error: {d}", file=sys.stderr)
        return 1
    diags = validate_config(config)
    if diags:
        for d in diags:
            print(f"config error: {d}", file=sys.stderr)
        return 1
    print("config ok")
    return 0


def _cmd_synth(args) -> int:
    if min(args.nodes, args.duration, args.mean_intercontact,
           args.mean_contact) <= 0:
        print("config error: synth parameters must be positive", file=sys.stderr)
        return 1
    rng = np.random.default_rng(args.seed)
    events = traceio.synth_trace(args.nodes, args.duration,
                                 args.mean_intercontact, args.mean_contact, rng)
    traceio.serialize_contact_trace(events, args.trace_out)
    print(f"wrote {args.trace_out} ({len(events)} contacts)")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="cofigel",
        description="collaborative-filtering-aware transfer scheduling "
                    "simulator for intermittent device-to-device contacts")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a config")
    _common_flags(p_run)
    p_run.set_defaults(func=_cmd_run)

    p_val = sub.add_parser("validate", help="check a config")
    _common_flags(p_val)
    p_val.set_defaults(func=_cmd_validate)

    p_synth = sub.add_parser("synth", help="emit a synthetic contact trace")
    p_synth.add_argument("--nodes", type=int, required=True)
    p_synth.add_argument("--duration", type=float, required=True,
                         help="trace length in seconds")
    p_synth.add_argument("--mean-intercontact", type=float, required=True,
                         dest="mean_intercontact")
    p_synth.add_argument("--mean-contact", type=float, required=True,
                         dest="mean_contact")
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--trace-out", required=True, dest="trace_out")
    p_synth.set_defaults(func=_cmd_synth)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception:
        traceback.print_exc()
        return 2


if __name__ == "__main__":
    sys.exit(main())
