"""Command line front end: fhnctl run <preset|config-path> [options]."""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

from .config import PRESETS, apply_coarse, load_config, make_preset, save_config
from .experiments import run_experiment
from .fhn_solver import NewtonError
from .sparse_linalg import IterativeSolveError, SingularSystemError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fhnctl",
        description="Optimal control experiments for the convective "
                    "FitzHugh-Nagumo system")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a preset or a saved config file")
    run.add_argument("target", help=f"preset name {PRESETS} or config path")
    run.add_argument("--coarse", action="store_true",
                     help="desk-scale resolution for quick runs")
    run.add_argument("--out", default=None, help="output directory")
    run.add_argument("--vmax", type=float, default=None,
                     help="override the peak channel velocity")
    run.add_argument("--mu", type=float, default=None,
                     help="override the sparsity weight")
    run.add_argument("--beta-variant", default=None,
                     help="conjugate direction formula")
    return parser


def _resolve_config(args):
    if os.path.exists(args.target):
        config = load_config(args.target)
    else:
        config = make_preset(args.target)
    if args.coarse:
        config = apply_coarse(config)
    if args.vmax is not None:
        config = replace(config, v_max=args.vmax)
    if args.mu is not None:
        config = replace(config, l1_weight=args.mu)
    if args.beta_variant is not None:
        config = replace(config, beta_variant=args.beta_variant)
    if args.out is not None:
        config = replace(config, output_dir=args.out)
    return config.validate()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = _resolve_config(args)
    except (ValueError, OSError) as err:
        print(f"fhnctl: {err}", file=sys.stderr)
        return 2
    save_config(config, os.path.join(_ensure_out(config), "config.ini"))
    try:
        result = run_experiment(config)
    except (NewtonError, SingularSystemError, IterativeSolveError) as err:
        print(f"fhnctl: solver failure: {err}", file=sys.stderr)
        return 1
    if result.state is not None:
        print(f"{config.preset or 'config'}: J = {result.state.objective:.6e} "
              f"({result.state.iterations} iterations, "
              f"stop: {result.state.stop_reason})")
    else:
        print(f"{config.preset or 'config'}: forward solve written to "
              f"{result.output_dir}")
    return 0


def _ensure_out(config) -> str:
    os.makedirs(config.output_dir, exist_ok=True)
    return config.output_dir


if __name__ == "__main__":
    raise SystemExit(main())
