"""render_figs: render raselab result files into SVG figures."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .render import FIGURE_IDS, FigureSpec, SchemaError, render


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="render_figs",
        description="Render publication-style figures from raselab CSV/JSON results.")
    ap.add_argument("--in", dest="indir", required=True,
                    help="directory with figN CSV/JSON results")
    ap.add_argument("--figs", required=True,
                    help=f"comma-separated figure ids from {', '.join(FIGURE_IDS)}")
    ap.add_argument("--out", required=True, help="output directory for SVGs")
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0

    figures = [f.strip() for f in args.figs.split(",") if f.strip()]
    try:
        for figure in figures:
            path = render(FigureSpec(figure_id=figure, input_dir=Path(args.indir)),
                          args.out)
            print(f"wrote {path}")
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
