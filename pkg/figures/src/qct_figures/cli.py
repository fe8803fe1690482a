"""Command-line entry point.

    render --wigner dump.qctw --out fig1.png
    render --traj series.csv --out fig2.png

Exit codes: 0 success, 2 bad input (missing file or format error).
"""

from __future__ import annotations

import argparse
import sys

from .qctw import FormatError
from .render import render_trajectory, render_wigner


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="render",
        description="Render QCTW phase-space dumps and trajectory CSVs "
                    "to PNG images.",
    )
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--wigner", metavar="DUMP",
                        help="QCTW grid dump to render as a heatmap")
    source.add_argument("--traj", metavar="CSV",
                        help="trajectory CSV to render as a line plot")
    parser.add_argument("--out", required=True, metavar="PNG",
                        help="output image path")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.wigner:
            render_wigner(args.wigner, args.out)
        else:
            render_trajectory(args.traj, args.out)
    except (FormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
