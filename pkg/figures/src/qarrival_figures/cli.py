"""Command line for figure rendering.

Either point at a spec document or give the three positional fields:

    qarrival-figs render --spec figure.yaml
    qarrival-figs render results/sweep.csv sweep sweep.png
"""
from __future__ import annotations

import argparse
import sys

import yaml

from .render import FigureSpec, SchemaError, render

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_SCHEMA = 3
EXIT_IO = 4


def _spec_from_file(path: str) -> FigureSpec:
    with open(path, "r", encoding="utf-8") as fh:
        doc = yaml.safe_load(fh)
    if not isinstance(doc, dict):
        raise ValueError("figure spec must be a key/value mapping")
    unknown = set(doc) - {"csv", "kind", "out", "title"}
    if unknown:
        raise ValueError(f"unknown figure spec key(s): {', '.join(sorted(unknown))}")
    for key in ("csv", "kind", "out"):
        if key not in doc:
            raise ValueError(f"figure spec is missing {key!r}")
    return FigureSpec(str(doc["csv"]), str(doc["kind"]), str(doc["out"]),
                      doc.get("title"))


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qarrival-figs",
        description="Render figures from qarrival CSV output.",
        epilog="exit codes: 0 success; 2 usage error; 3 schema mismatch; 4 I/O error",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("render", help="render one figure")
    p.add_argument("fields", nargs="*", metavar="csv kind out",
                   help="input CSV, figure kind, output image")
    p.add_argument("--spec", default=None, help="YAML figure spec (csv, kind, out, title)")
    p.add_argument("--title", default=None, help="title override for positional form")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.spec is not None:
            if args.fields:
                print("error: give either --spec or positional fields, not both",
                      file=sys.stderr)
                return EXIT_USAGE
            spec = _spec_from_file(args.spec)
        else:
            if len(args.fields) != 3:
                print("error: positional form needs exactly: csv kind out",
                      file=sys.stderr)
                return EXIT_USAGE
            spec = FigureSpec(args.fields[0], args.fields[1], args.fields[2],
                              args.title)
    except (OSError, ValueError, yaml.YAMLError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    try:
        out = render(spec)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"wrote {out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
