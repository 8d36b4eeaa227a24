"""Standalone plotting script: ``eqlayer-plot KIND INPUT --out IMAGE``.

Reads only the documented file contracts; schema mismatches abort with a
nonzero exit naming the offending column.
"""

from __future__ import annotations

import argparse
import sys

from .io import SchemaError
from .render import PLOT_KINDS, render


def build_parser():
    p = argparse.ArgumentParser(prog="eqlayer-plot", description=__doc__)
    p.add_argument("kind", choices=sorted(PLOT_KINDS))
    p.add_argument("input", help="solver output file (CSV or coordinate dump)")
    p.add_argument("--out", required=True, help="output image path")
    p.add_argument("--title", default=None)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        render(args.kind, args.input, args.out, title=args.title)
    except SchemaError as err:
        print(f"schema error: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"i/o error: {err}", file=sys.stderr)
        return 2
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
