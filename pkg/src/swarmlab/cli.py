"""Command-line entry points: run, sweep, metrics, serve."""

from __future__ import annotations

import argparse
import csv
import sys

from .eco import CONDITION_NAMES
from .runner import (RunConfig, desk_config, metrics_from_snapshots, run_simulation,
                     sweep, write_metrics_csv)
from .server import serve_session


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x]


def _str_list(text: str) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="swarmlab",
                                     description="swarm ecosystem simulation lab")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute one headless simulation run")
    run_p.add_argument("--config", help="JSON run config (omit for defaults)")
    run_p.add_argument("--condition", choices=CONDITION_NAMES,
                       help="condition preset when no config file is given")
    run_p.add_argument("--seed", type=int, required=True)
    run_p.add_argument("--steps", type=int, required=True)
    run_p.add_argument("--snap-every", type=int, default=500)
    run_p.add_argument("--out", required=True)
    run_p.add_argument("--desk", action="store_true",
                       help="small-world geometry (1,000 particles, 1,500px)")

    sweep_p = sub.add_parser("sweep", help="batch of runs over a condition grid")
    sweep_p.add_argument("--conditions", type=_str_list, required=True)
    sweep_p.add_argument("--seeds", type=_int_list, required=True)
    sweep_p.add_argument("--inits", type=_str_list, default=["random"])
    sweep_p.add_argument("--steps", type=int, default=30_000)
    sweep_p.add_argument("--snap-every", type=int, default=500)
    sweep_p.add_argument("--out", required=True)
    sweep_p.add_argument("--jobs", type=int, default=1)
    sweep_p.add_argument("--recipe", default=None, help="example recipe name for designed inits")
    sweep_p.add_argument("--desk", action="store_true")
    sweep_p.add_argument("--window", type=_int_list, default=[10_000, 30_000],
                         help="summary window, e.g. 10000,30000")

    metrics_p = sub.add_parser("metrics", help="recompute metrics from saved snapshots")
    metrics_p.add_argument("--snapshots", required=True)
    metrics_p.add_argument("--out", default=None, help="CSV path (default: stdout)")

    serve_p = sub.add_parser("serve", help="run the interactive session server")
    serve_p.add_argument("--bind", default="127.0.0.1:7321")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)

    if args.command == "run":
        if args.config:
            config = RunConfig.from_file(args.config)
        elif args.desk:
            config = desk_config(args.condition or "revised-high")
        else:
            from .eco import condition_preset
            name = args.condition or "revised-high"
            config = RunConfig(eco=condition_preset(name), condition=name)
        result = run_simulation(config, args.seed, args.steps,
                                snapshot_interval=args.snap_every, out_dir=args.out)
        print(f"run {result.manifest.run_id}: {len(result.series.steps)} snapshots "
              f"-> {result.manifest.out_dir}")
        return 0

    if args.command == "sweep":
        rows, failures = sweep(args.conditions, args.seeds, args.inits, args.steps,
                               out_dir=args.out, snapshot_interval=args.snap_every,
                               jobs=args.jobs, recipe_name=args.recipe, desk=args.desk,
                               summary_window=tuple(args.window))
        print(f"{len(rows)} runs summarized, {len(failures)} failed -> {args.out}")
        for run_id, _ in failures:
            print(f"  FAILED {run_id}", file=sys.stderr)
        return 1 if failures and not rows else 0

    if args.command == "metrics":
        series = metrics_from_snapshots(args.snapshots)
        if args.out:
            write_metrics_csv(args.out, series)
            print(f"wrote {args.out}")
        else:
            writer = csv.writer(sys.stdout)
            writer.writerow(["step", "new_colors", "kl_divergence"])
            for row in zip(series.steps, series.new_colors, series.kl_divergence):
                writer.writerow(row)
        return 0

    if args.command == "serve":
        serve_session(args.bind)
        return 0

    return 2


if __name__ == "__main__":
    sys.exit(main())
