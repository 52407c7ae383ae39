"""Command-line figure renderer for experiment CSVs."""

import argparse
import sys

from .render import FigureSpec, NoDataError, SchemaError, render


def build_parser():
    parser = argparse.ArgumentParser(
        prog="plot",
        description="Render sweep, distribution, or accuracy figures from "
                    "cfnoma result CSVs",
    )
    parser.add_argument("--kind", required=True, choices=["sweep", "cdf", "error"])
    parser.add_argument("--in", dest="inputs", required=True, action="append",
                        metavar="CSV", help="input CSV (repeatable)")
    parser.add_argument("--out", required=True, metavar="IMG",
                        help="output image path (.png/.pdf/.svg)")
    parser.add_argument("--group", default=None,
                        help="comma-separated grouping columns "
                             "(default: precoder,scheme,sic; error kind: precoder)")
    parser.add_argument("--title", default="")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.group:
        group_keys = tuple(k.strip() for k in args.group.split(",") if k.strip())
    else:
        group_keys = ("precoder",) if args.kind == "error" else \
            ("precoder", "scheme", "sic")
    spec = FigureSpec(inputs=tuple(args.inputs), kind=args.kind, out=args.out,
                      group_keys=group_keys, title=args.title)
    try:
        out = render(spec)
    except (SchemaError, NoDataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
