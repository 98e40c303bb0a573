"""Batch figure rendering: one process per figure, no interactivity."""

from __future__ import annotations

import argparse
import sys

from .figures import FIGURE_KINDS, FigureError, FigureSpec, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="hammerplots",
                                     description="Render simulator CSV outputs as figures")
    parser.add_argument("kind", choices=FIGURE_KINDS)
    parser.add_argument("-i", "--input", required=True, help="input CSV path")
    parser.add_argument("-o", "--output", required=True, help="output image (.png or .svg)")
    parser.add_argument("--group-keys", nargs="+", default=["mechanism", "throttler"],
                        help="sweep columns that identify a series")
    parser.add_argument("--title", default="")
    args = parser.parse_args(argv)
    spec = FigureSpec(input_csv=args.input, kind=args.kind, output=args.output,
                      group_keys=tuple(args.group_keys), title=args.title)
    try:
        path = render(spec)
    except (FigureError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(path)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
