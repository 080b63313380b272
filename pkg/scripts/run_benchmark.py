"""Run the shipped case suite under all five configurations.

    python3 scripts/run_benchmark.py [--cases fixtures/cases] [--out results]

Writes per-case CSVs, ledgers, event stores and SVG overlays plus
results/summary.csv, and prints the summary table.
"""

from __future__ import annotations

import argparse
import glob
import os
import time

from osmag_nav.sim import CONFIGS, BenchConfig, load_case, run_case, summarize

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cases", default=os.path.join(ROOT, "fixtures", "cases"))
    ap.add_argument("--out", default=os.path.join(ROOT, "results"))
    ap.add_argument("--configs", default=",".join(CONFIGS))
    args = ap.parse_args()
    cfg = BenchConfig(table_dir=os.path.join(args.out, "tables"))
    t0 = time.perf_counter()
    runs = [run_case(load_case(p), args.configs.split(","), cfg=cfg) for p in sorted(glob.glob(os.path.join(args.cases, "*.yaml")))]
    print(summarize(runs, args.out))
    print(f"\n{len(runs)} cases in {time.perf_counter() - t0:.1f} s; outputs under {args.out}")


if __name__ == "__main__":
    main()
