"""Command line front end: render one figure from one CSV."""

from __future__ import annotations

import argparse
import sys

from .render import FIGURES, PlotSpec, SchemaError, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eecdma-plots",
        description="Render figure images from eecdma experiment CSVs")
    sub = parser.add_subparsers(dest="command", required=True)
    p_render = sub.add_parser("render", help="render one figure")
    p_render.add_argument("--csv", required=True, help="input CSV path")
    p_render.add_argument("--figure", required=True, choices=FIGURES)
    p_render.add_argument("--out", required=True, help="output image path")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        path = render(PlotSpec(input_csv=args.csv, figure=args.figure,
                               output_image=args.out))
    except (SchemaError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
