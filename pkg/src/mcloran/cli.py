"""Command-line front end.

    mcloran simulate   --out DIR [--seed N]
    mcloran filter     --input TOR.csv --out DIR
    mcloran correct    --ref TOR.csv --rover TOR.csv --calib-ref C.csv --calib-rover C.csv --out DIR
    mcloran solve      --input rover_toa.csv --out DIR
    mcloran evaluate   --input fixes.csv --out DIR
    mcloran experiment --out DIR [--seed N] [--seeds K] [--no-removal]

Every command accepts ``--config`` (JSON experiment config) and
``--network`` (station database JSON).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .config import ConfigError, ExperimentConfig, load_config
from .corrections import CorrectionError
from .io import SchemaError
from .network import NetworkError
from .pipeline import run_experiment, stage_correct, stage_evaluate, stage_filter, stage_simulate, stage_solve
from .solver import SolverError

USER_ERRORS = (ConfigError, SchemaError, NetworkError, CorrectionError, SolverError)


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config, args.network)
    if getattr(args, "seed", None) is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def _seed(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError(f"seed {v} is not an unsigned 64-bit integer")
    return v


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def cmd_simulate(args) -> dict:
    return stage_simulate(_config(args), args.out)


def cmd_filter(args) -> dict:
    return stage_filter(_config(args), args.input, args.out)


def cmd_correct(args) -> dict:
    cfg = _config(args)
    for site in ("ref", "rover"):
        if getattr(args, f"spatial_{site}") is None and getattr(args, f"calib_{site}") is None:
            raise ConfigError(f"correct: give --spatial-{site} or --calib-{site}")
    return stage_correct(
        cfg, args.ref, args.rover, args.out,
        calib_ref_csv=args.calib_ref, calib_rover_csv=args.calib_rover,
        spatial_ref_csv=args.spatial_ref, spatial_rover_csv=args.spatial_rover,
    )


def cmd_solve(args) -> dict:
    return stage_solve(_config(args), args.input, args.out)


def cmd_evaluate(args) -> dict:
    return stage_evaluate(_config(args), args.input, args.out)


def cmd_experiment(args) -> dict:
    cfg = _config(args)
    if args.no_removal:
        cfg = replace(cfg, removal=(False, False))
    n = args.seeds or cfg.n_seeds
    first = cfg.scenario.seed
    seeds = [(first + k) % 2**64 for k in range(n)]
    summary = run_experiment(cfg, seeds, args.out, jobs=args.jobs)
    return {k: summary[k] for k in ("n_seeds", "n_ok", "median")}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="experiment config JSON (defaults if omitted)")
    common.add_argument("--network", type=Path, help="station database JSON (overrides the config)")
    common.add_argument("--out", type=Path, required=True, help="output directory")

    parser = argparse.ArgumentParser(prog="mcloran", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="simulate reference and rover TOR streams")
    p.add_argument("--seed", type=_seed)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("filter", parents=[common], help="remove scaled-MAD outliers from a TOR file")
    p.add_argument("--input", type=Path, required=True)
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("correct", parents=[common], help="build and apply temporal-ASF corrections")
    p.add_argument("--ref", type=Path, required=True, help="reference-station TOR file")
    p.add_argument("--rover", type=Path, required=True, help="rover TOR file")
    p.add_argument("--calib-ref", type=Path, help="calibration TOR file at the reference station")
    p.add_argument("--calib-rover", type=Path, help="calibration TOR file at the rover position")
    p.add_argument("--spatial-ref", type=Path, help="static ASF table for the reference station")
    p.add_argument("--spatial-rover", type=Path, help="static ASF table for the rover")
    p.set_defaults(func=cmd_correct)

    p = sub.add_parser("solve", parents=[common], help="solve per-epoch fixes from corrected TOAs")
    p.add_argument("--input", type=Path, required=True)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("evaluate", parents=[common], help="accuracy report and CDF for a fixes file")
    p.add_argument("--input", type=Path, required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("experiment", parents=[common], help="seeded A/B run: outliers kept vs removed")
    p.add_argument("--seed", type=_seed, help="first seed")
    p.add_argument("--seeds", type=_positive, help="number of consecutive seeds")
    p.add_argument("--no-removal", action="store_true", help="disable removal in both arms")
    p.add_argument("--jobs", type=_positive, default=1, help="worker processes")
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        result = args.func(args)
    except USER_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(json.dumps(result, indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
