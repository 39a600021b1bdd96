"""Command-line entry point.

    sch-plots --kind <decay|blowup|lyapunov|measure_ladder>
              --in <paths...> --out <dir>

Reads simulation CSV/JSONL outputs (never modifying them) and writes one
deterministic PNG per invocation into the output directory.  Schema
mismatches exit with status 2 and name the offending column or field.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .figures import RENDERERS
from .schemas import SchemaError


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="sch-plots")
    parser.add_argument("--kind", required=True, choices=sorted(RENDERERS))
    parser.add_argument("--in", dest="inputs", nargs="+", required=True)
    parser.add_argument("--out", required=True)
    args = parser.parse_args(argv)

    for path in args.inputs:
        if not Path(path).is_file():
            print(f"error: input {path!r} does not exist", file=sys.stderr)
            return 2
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        out = RENDERERS[args.kind](args.inputs, out_dir)
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(out)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
