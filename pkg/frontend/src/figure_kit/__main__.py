"""python -m figure_kit profiles|sweep --in DIR --out DIR"""

from __future__ import annotations

import argparse
import glob
import os
import sys

from .profiles import ProfileFormatError, plot_profiles
from .sweep import plot_sweep


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="figure_kit")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (("profiles", "centerline profile panels"),
                            ("sweep", "regularization error decay plot")):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--in", dest="input_dir", required=True,
                         help="directory with experiment CSV output")
        cmd.add_argument("--out", dest="output_dir", required=True,
                         help="directory for PNG files")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "profiles":
            paths = sorted(glob.glob(os.path.join(args.input_dir, "**",
                                                  "profile_t*.csv"),
                                     recursive=True))
            written = plot_profiles(paths, args.output_dir)
        else:
            table = os.path.join(args.input_dir, "sweep.csv")
            if not os.path.exists(table):
                print(f"figure_kit: no sweep.csv under {args.input_dir}",
                      file=sys.stderr)
                return 2
            written = plot_sweep(table, args.output_dir)
    except (ProfileFormatError, ValueError, OSError) as err:
        print(f"figure_kit: {err}", file=sys.stderr)
        return 2
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
