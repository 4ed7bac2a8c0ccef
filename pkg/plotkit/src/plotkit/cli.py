"""Command-line figure generation:

    waves-plot <decay|convergence|profile|scan> --in <paths...> --out <image>

Consumes only the harness's published CSV/JSON outputs; emits PNG or SVG.
"""

from __future__ import annotations

import argparse
import sys

from .figures import KINDS, render
from .schemas import SchemaMismatch


def build_parser():
    p = argparse.ArgumentParser(
        prog="waves-plot",
        description="Render figures from waves harness outputs.")
    p.add_argument("kind", choices=sorted(KINDS))
    p.add_argument("--in", dest="inputs", nargs="+", required=True,
                   help="input CSV/JSON file(s)")
    p.add_argument("--out", required=True, help="output image (.png/.svg)")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        out = render(args.kind, args.inputs, args.out)
    except SchemaMismatch as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
