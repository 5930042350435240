"""figures CLI: `figures <kind> --in <csv> [--aux regression.json] --out <png/svg>`."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .render import KINDS, FigureJob, RenderError, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="figures",
        description="Render phonon-inverse experiment CSVs into figures",
    )
    sub = parser.add_subparsers(dest="kind", required=True)
    for kind in KINDS:
        p = sub.add_parser(kind)
        p.add_argument("--in", dest="inputs", action="append", required=True,
                       type=Path, help="input CSV (repeat for overlays)")
        p.add_argument("--out", type=Path, required=True,
                       help="output image path (.png or .svg)")
        p.add_argument("--aux", type=Path, default=None,
                       help="auxiliary JSON (regression fit parameters)")
        p.add_argument("--label", dest="labels", action="append", default=[],
                       help="legend label per input (repeatable)")
        if kind == "heatmap":
            p.add_argument("--run-id", default=None,
                           help="run to plot (default: first in the file)")
            p.add_argument("--run-id2", default=None,
                           help="second run; plots the difference")
        if kind == "traces":
            p.add_argument("--no-diff", action="store_true",
                           help="suppress the difference curve for two inputs")
    args = parser.parse_args(argv)

    options = {"labels": args.labels}
    if args.kind == "heatmap":
        options.update(run_id=args.run_id, run_id2=args.run_id2)
    if args.kind == "traces":
        options.update(diff=not args.no_diff)
    try:
        render(FigureJob(kind=args.kind, inputs=args.inputs, out=args.out,
                         aux=args.aux, options=options))
    except RenderError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
