"""Command-line entry point.

    carve-sim <subcommand> --config <path> [--out-dir <path>]
                           [--workers K] [--seed S]

Subcommands: dicke, sweep, ghz, phase-plan, spectrum.  Configs are JSON
following the ExperimentConfig schema (frequencies in MHz; the factor
2*pi is applied internally).  Exit status is nonzero whenever a config or
a model invariant is violated.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .experiments import ConfigError, ExperimentConfig, run_experiment

_SUBCOMMANDS = {
    "dicke": "dicke",
    "sweep": "sweep",
    "ghz": "ghz",
    "phase-plan": "phase_plan",
    "spectrum": "spectrum",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="carve-sim",
        description="Counter-factual carving simulator and analytics")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name, kind in _SUBCOMMANDS.items():
        p = sub.add_parser(name, help=f"run a {kind} experiment")
        p.add_argument("--config", required=True, help="JSON config path")
        p.add_argument("--out-dir", default=".", help="output directory")
        p.add_argument("--workers", type=int, default=1,
                       help="parallel sweep workers")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    kind = _SUBCOMMANDS[args.subcommand]
    try:
        config = ExperimentConfig.from_file(args.config)
        if config.experiment != kind:
            raise ConfigError(
                f"config is for '{config.experiment}', not '{kind}'")
        if args.seed is not None:
            config.raw["seed"] = args.seed
        summary = run_experiment(config, Path(args.out_dir),
                                 workers=max(1, args.workers))
    except Exception as exc:  # surface invariant violations as exit status
        print(f"carve-sim: error: {exc}", file=sys.stderr)
        return 1
    printable = {k: v for k, v in summary.items()
                 if k not in ("points", "curve")}
    print(json.dumps(printable, indent=2, sort_keys=True, default=str))
    return 0


if __name__ == "__main__":
    sys.exit(main())
