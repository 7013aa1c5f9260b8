"""Command-line entry point.

    qitelab run <config.yaml> [--seed N] [--out-dir DIR] [--jobs N]
    qitelab report <record.json> [...] [--out-dir DIR]
    qitelab calibrate <noise-config.yaml> [--seed N] [--out-dir DIR]

Exit code 0 on success; nonzero with a diagnostic on validation or
convergence failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .experiments import (
    ConfigError,
    emit_plot_data,
    run_calibration,
    run_experiment,
)
from .luscher import AmbiguousRootError, FitConvergenceError
from .qite import ConditioningError
from .qlanczos import StabilizationError


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qitelab",
        description="Imaginary-time and Krylov eigensolver experiments "
        "on few-qubit model Hamiltonians",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute an experiment config")
    run.add_argument("config", help="YAML experiment description")
    run.add_argument("--seed", type=int, default=None, help="override the config seed")
    run.add_argument("--out-dir", default=".", help="output directory")
    run.add_argument("--jobs", type=int, default=None, help="worker threads for repeated runs")

    report = sub.add_parser("report", help="regenerate plot CSVs from result records")
    report.add_argument("records", nargs="*", help="result record JSON files")
    report.add_argument("--out-dir", default=".", help="output directory")

    calibrate = sub.add_parser("calibrate", help="run a readout calibration")
    calibrate.add_argument("config", help="YAML noise description")
    calibrate.add_argument("--seed", type=int, default=None)
    calibrate.add_argument("--out-dir", default=".", help="output directory")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            record = run_experiment(
                args.config, out_dir=args.out_dir, seed=args.seed, jobs=args.jobs
            )
            print(f"wrote {record}")
            return 0
        if args.command == "report":
            written = emit_plot_data(args.records, out_dir=args.out_dir)
            for path in written:
                print(f"wrote {path}")
            for record_path in args.records:
                record = json.loads(Path(record_path).read_text(encoding="utf-8"))
                print(
                    f"{record['experiment']}: config {record['config_digest'][:12]} "
                    f"({record['wall_clock_seconds']}s)"
                )
            return 0
        if args.command == "calibrate":
            path = run_calibration(args.config, out_dir=args.out_dir, seed=args.seed)
            print(f"wrote {path}")
            return 0
    except (
        ConfigError,
        ConditioningError,
        StabilizationError,
        FitConvergenceError,
        AmbiguousRootError,
        FileNotFoundError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
