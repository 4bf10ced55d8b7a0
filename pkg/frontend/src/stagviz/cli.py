"""Batch rendering CLI: render-snapshot / render-energy / render-alpha.

Exit codes: 0 on success, 2 on malformed input.
"""

from __future__ import annotations

import argparse
import sys

from .render import MalformedInput, render_alpha, render_energy, render_snapshot


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stagviz", description="Simulator output rendering")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, func in (
        ("render-snapshot", render_snapshot),
        ("render-energy", render_energy),
        ("render-alpha", render_alpha),
    ):
        p = sub.add_parser(name, help=f"{name.replace('-', ' ')} CSV -> PNG")
        p.add_argument("csv")
        p.add_argument("png")
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args.csv, args.png)
    except MalformedInput as err:
        print(f"malformed input: {err}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
