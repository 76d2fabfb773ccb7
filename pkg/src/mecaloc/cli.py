"""Command-line harness: simulate, fuse (replay), metrics.

Exit codes: 0 success, 1 runtime failure, 2 invalid input.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import ekf, experiment, logio
from .config import ConfigError, load_config
from .logio import LogParseError
from .odometry import Pose2D

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_INVALID = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mecaloc",
        description="Mecanum odometry + beacon positioning + EKF fusion harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one or more seeded experiments")
    sim.add_argument("--config", required=True, help="experiment config file")
    sim.add_argument("--seed", type=int, default=None, help="override the config seed")
    sim.add_argument("--runs", type=int, default=None, help="override the config run count")
    sim.add_argument("--out", required=True, help="output directory")

    fuse = sub.add_parser("fuse", help="re-run the filter on a recorded event stream")
    fuse.add_argument("--input", required=True, help="events file from a simulate run")
    fuse.add_argument("--config", required=True, help="config supplying the filter settings")
    fuse.add_argument("--out", required=True, help="output directory")

    met = sub.add_parser("metrics", help="summarize a trajectory log")
    met.add_argument("--input", required=True, help="trajectory file from a simulate run")
    return parser


def cmd_simulate(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    if args.seed is not None:
        config = _override(config, seed=args.seed)
    if args.runs is not None:
        if args.runs < 1:
            raise ConfigError(f"--runs must be >= 1, got {args.runs}")
        config = _override(config, runs=args.runs)
    os.makedirs(args.out, exist_ok=True)

    results = experiment.monte_carlo(config)
    if len(results) == 1:
        _write_run(args.out, "", results[0])
        table = experiment.summary_table(results[0].summaries)
    else:
        for index, result in enumerate(results):
            _write_run(args.out, f"_{index:03d}", result)
        table = experiment.monte_carlo_table(results)
    with open(os.path.join(args.out, "summary.txt"), "w", encoding="utf-8", newline="\n") as handle:
        handle.write(table)
    sys.stdout.write(table)
    return EXIT_OK


def _write_run(out_dir: str, suffix: str, result) -> None:
    logio.write_trajectory(os.path.join(out_dir, f"trajectory{suffix}.csv"), result.records)
    logio.write_events(os.path.join(out_dir, f"events{suffix}.csv"), result.events)
    for name, series in experiment.record_error_series(result.records).items():
        logio.write_error_series(os.path.join(out_dir, f"errors_{name}{suffix}.csv"), series)


def cmd_fuse(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    events = logio.read_events(args.input)
    trace = ekf.run_filter(
        ekf.initial_state(Pose2D(0.0, 0.0, 0.0), config.p0_diag),
        events,
        config.process_noise,
        config.measurement_noise,
        gate_threshold=config.gate_threshold,
    )
    os.makedirs(args.out, exist_ok=True)
    out_path = os.path.join(args.out, "fused.csv")
    logio.write_fused(out_path, trace.timestamps, trace.poses, trace.covariances)
    sys.stdout.write(f"wrote {len(trace)} rows to {out_path}\n")
    return EXIT_OK


def cmd_metrics(args: argparse.Namespace) -> int:
    records = logio.read_trajectory(args.input)
    if not records:
        raise LogParseError(args.input, 2, "log holds no rows")
    table = experiment.summary_table(experiment.summarize_records(records))
    sys.stdout.write(table)
    return EXIT_OK


def _override(config, **changes):
    from dataclasses import replace

    return replace(config, **changes)


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code not in (0, None) else EXIT_OK
    handlers = {"simulate": cmd_simulate, "fuse": cmd_fuse, "metrics": cmd_metrics}
    try:
        return handlers[args.command](args)
    except (ConfigError, LogParseError, ekf.StreamOrderError, FileNotFoundError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INVALID
    except Exception as exc:  # runtime failure: solver, covariance, I/O mid-run
        sys.stderr.write(f"runtime failure: {exc}\n")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
