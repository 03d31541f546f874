"""Command-line interface: ``dampspec <verb> <config> [options]``.

``<config>`` is a YAML scenario file or the name of a bundled scenario.
Results go to the config's output directory, overridable with ``--out`` or
the ``DAMPSPEC_OUTPUT_DIR`` environment variable.

Exit codes: 0 success, 2 validation mismatch, 3 solver failure, 4 config error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from typing import Sequence

from . import __version__
from .config import EvolutionConfig, bundled_scenarios, load_config
from .errors import ConfigError, DampSpecError
from .pipeline import (
    EXIT_CONFIG,
    EXIT_OK,
    EXIT_SOLVER,
    OUTPUT_ENV,
    PipelineError,
    run_pipeline,
    sweep_alpha,
)
from .writers import to_jsonable

log = logging.getLogger("dampspec")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("config", help="scenario YAML file or bundled scenario name")
    p.add_argument("--out", default=None, help=f"output directory (default: config value or ${OUTPUT_ENV})")
    p.add_argument("--no-figures", action="store_true", help="skip matplotlib figures")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dampspec",
        description="Real spectra and instability thresholds of damped wave operators with indefinite damping.",
        epilog=f"Bundled scenarios: {', '.join(bundled_scenarios())}.  Exit codes: 0 ok, 2 mismatch, 3 solver failure, 4 config error.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("run", help="full pipeline: curves, spectra, cross-validation, evolution")
    _add_common(p)

    p = sub.add_parser("curves", help="eigencurves, thresholds and parabola intersections only")
    _add_common(p)

    p = sub.add_parser("spectrum", help="block-operator spectrum at one alpha (with cross-validation)")
    _add_common(p)
    p.add_argument("--alpha", type=float, required=True)

    p = sub.add_parser("evolve", help="time evolution and growth-rate refinement study")
    _add_common(p)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--T", type=float, default=None, help="final time")
    p.add_argument("--dt", type=float, default=None, help="time step (default min(0.1 eta_alpha, 1e-2))")

    p = sub.add_parser("validate", help="cross-check block spectra against eigencurve predictions")
    _add_common(p)

    p = sub.add_parser("sweep", help="bisect for the smallest alpha with a validated positive real eigenvalue")
    _add_common(p)
    p.add_argument("--alpha-min", type=float, default=None)
    p.add_argument("--alpha-max", type=float, default=None)
    p.add_argument("--bracket", type=float, default=None)

    sub.add_parser("scenarios", help="list bundled scenarios")
    return parser


def _print(payload) -> None:
    print(json.dumps(to_jsonable(payload), indent=2, sort_keys=True))


def _dispatch(args) -> int:
    if args.verb == "scenarios":
        for name in bundled_scenarios():
            print(name)
        return EXIT_OK
    config = load_config(args.config)
    if args.seed is not None:
        config = config.replace(seed=args.seed)
    figures = False if args.no_figures else None
    if args.verb == "sweep":
        result = sweep_alpha(config, args.alpha_min, args.alpha_max, args.bracket, output_dir=args.out)
        _print(result.as_dict())
        return EXIT_OK
    if args.verb == "run":
        manifest = run_pipeline(config, args.out, figures=figures)
    elif args.verb == "curves":
        manifest = run_pipeline(config, args.out, stages=("curves",), figures=figures)
    elif args.verb == "validate":
        manifest = run_pipeline(config, args.out, stages=("validate",), figures=figures)
    elif args.verb == "spectrum":
        manifest = run_pipeline(config, args.out, stages=("validate",), alphas=(args.alpha,), figures=figures)
    elif args.verb == "evolve":
        ev = config.evolution or EvolutionConfig()
        changes = {"alpha": args.alpha}
        if args.T is not None:
            changes["T"] = args.T
        if args.dt is not None:
            changes["dt"] = args.dt
        ev = dataclasses.replace(ev, **changes)
        ev.validate("evolution")
        manifest = run_pipeline(config.replace(evolution=ev), args.out, stages=("evolution",), alphas=(), figures=figures)
    else:  # pragma: no cover - argparse restricts verbs
        raise ConfigError(f"unknown verb {args.verb}")
    _print({"exit_code": manifest.exit_code, "output_dir": manifest.output_dir,
            "warnings": manifest.warnings, "summary": manifest.summary})
    return manifest.exit_code


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return _dispatch(args)
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DampSpecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
