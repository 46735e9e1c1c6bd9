"""`plots render <spec-file>`: render one figure from a TOML spec."""

from __future__ import annotations

import argparse
import sys

from .figures import FigureSpecError, load_figure_spec, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="plots", description="render figures from curvlab CSV/JSON output")
    sub = parser.add_subparsers(dest="command")
    prender = sub.add_parser("render", help="render a figure from a TOML spec")
    prender.add_argument("spec")
    args = parser.parse_args(argv)
    if args.command != "render":
        parser.print_help()
        return 2
    try:
        result = render(load_figure_spec(args.spec))
    except FigureSpecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0 if result.output.exists() else 1


if __name__ == "__main__":
    sys.exit(main())
