"""Entry point: report <bundle-dir> [--no-timestamps] [--out DIR]."""

from __future__ import annotations

import argparse
import sys

from .render import ReportBundle, SchemaError, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="report",
                                     description="render figures and markdown "
                                                 "from simulation outputs")
    parser.add_argument("bundle", help="directory holding trace.csv / "
                                       "comparison.csv / carleman.csv / summary.json")
    parser.add_argument("--no-timestamps", action="store_true",
                        help="omit generation timestamps (byte-stable reruns)")
    parser.add_argument("--out", help="output directory (default: the bundle)")
    args = parser.parse_args(argv)
    try:
        bundle = ReportBundle(args.bundle, out_dir=args.out)
        produced = render(bundle, timestamps=not args.no_timestamps)
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 1
    for kind, path in sorted(produced.items()):
        print(f"{kind}: {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
