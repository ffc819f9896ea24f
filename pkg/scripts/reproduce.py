"""Tune (k1, b) on the EN dev split, then evaluate the full 18-system grid.

    python scripts/reproduce.py --config path/to/qerank.ini --out results/

Runs offline: knowledge-base subjects come from the configured cache only.
"""

import argparse
import contextlib
import io
import json
import sys

from qerank.cli import main as qerank


def run(argv: list[str]) -> str:
    buf = io.StringIO()
    with contextlib.redirect_stdout(buf):
        code = qerank(argv)
    if code != 0:
        sys.exit(code)
    return buf.getvalue()


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", required=True)
    ap.add_argument("--out", default="qerank-out")
    ap.add_argument("--grid", help="tuning grid, e.g. 'k1=0.8,1.2 b=0.5,0.75'")
    args = ap.parse_args()

    base = ["--offline", "--config", args.config, "--output-dir", args.out]
    tune = base + ["--json", "tune"] + (["--grid", args.grid] if args.grid else [])
    best = json.loads(run(tune))["best"]
    print(f"tuned on EN dev: k1={best['k1']:g} b={best['b']:g}")
    print(run(base + ["--k1", str(best["k1"]), "--b", str(best["b"]), "eval", "--grid"]))


if __name__ == "__main__":
    main()
