"""Script entry point: render one or more summary CSVs to figures.

Exit codes: 0 success, 1 usage error, 2 render error (missing columns,
empty input).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .render import FigureSpec, RenderError, render


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> _Parser:
    p = _Parser(prog="tomofig", description=__doc__)
    p.add_argument("csv", nargs="*", help="summary CSV file(s) to render")
    p.add_argument("--spec", help="JSON file with a full figure spec (overrides flags)")
    p.add_argument("--out", help="output image path (single CSV) or directory")
    p.add_argument("--x", default="L")
    p.add_argument("--y", default="mean_trace_distance")
    p.add_argument("--series", default="scheme")
    p.add_argument("--err", default="stderr", help="error-bar column ('' disables)")
    p.add_argument("--title", default="")
    p.add_argument("--x-label", default="")
    p.add_argument("--y-label", default="")
    p.add_argument("--log-y", action="store_true")
    p.add_argument("--fmt", default="svg", choices=["svg", "png"])
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.spec:
            blob = json.loads(Path(args.spec).read_text())
            report = render(FigureSpec(**blob))
            print(f"{report.out_path}: {len(report.series)} series, {report.n_points} points")
            return 0
        if not args.csv:
            parser.error("provide CSV path(s) or --spec")
        many = len(args.csv) > 1
        out_dir = Path(args.out) if args.out and many else None
        for csv_path in args.csv:
            if out_dir is not None:
                out_path = out_dir / (Path(csv_path).stem + f".{args.fmt}")
            elif args.out and not many:
                out_path = Path(args.out)
            else:
                out_path = Path(csv_path).with_suffix(f".{args.fmt}")
            spec = FigureSpec(
                csv_path=csv_path,
                out_path=str(out_path),
                x_column=args.x,
                y_column=args.y,
                series_column=args.series,
                error_column=args.err or None,
                title=args.title,
                x_label=args.x_label,
                y_label=args.y_label,
                log_y=args.log_y,
                fmt=args.fmt,
            )
            report = render(spec)
            print(f"{report.out_path}: {len(report.series)} series, {report.n_points} points")
        return 0
    except RenderError as exc:
        print(f"render error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
