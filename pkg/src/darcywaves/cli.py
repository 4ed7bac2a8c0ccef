"""Command-line entry point.

    waves <dn-check|tw-solve|evolve|stability|props> --config <path>
          [--output-dir <dir>] [--seed <u64>]

One config file per run; exit status is 0 iff every check in the run passed.
"""

from __future__ import annotations

import argparse
import sys

from .config import EXPERIMENT_KINDS, parse_config
from .errors import WavesError
from .harness import run


def build_parser():
    p = argparse.ArgumentParser(
        prog="waves",
        description="Pseudospectral experiments for gravity-driven Darcy "
                    "free-surface flow on the torus.")
    p.add_argument("kind", choices=EXPERIMENT_KINDS,
                   help="experiment to run (must match the config)")
    p.add_argument("--config", required=True, help="path to the JSON config")
    p.add_argument("--output-dir", default=None,
                   help="override the config's output directory")
    p.add_argument("--seed", type=int, default=None,
                   help="override the config's RNG seed")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        config = parse_config(args.config)
    except WavesError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    if config.experiment["kind"] != args.kind:
        print(f"error: config is for {config.experiment['kind']!r}, "
              f"asked to run {args.kind!r}", file=sys.stderr)
        return 2
    doc = run(config, output_dir=args.output_dir, seed=args.seed)
    failed = [c["name"] for c in doc["reports"].get("checks", [])
              if not c["passed"]]
    print(f"status: {doc['status']}")
    for name in failed:
        print(f"failed check: {name}")
    if doc["error"]:
        print(f"error: {doc['error']}", file=sys.stderr)
    return 0 if doc["status"] == "ok" else 1


if __name__ == "__main__":
    sys.exit(main())
