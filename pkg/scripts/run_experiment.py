"""Run one scenario config and print its fit and any failed assertions.

Usage: python3 scripts/run_experiment.py configs/sharpness_d1.json [--out results/sharpness_d1.csv]
"""

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from pothull.experiments import load_config, run_config


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("config")
    ap.add_argument("--out")
    ap.add_argument("--seed", type=int)
    args = ap.parse_args()
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    out = args.out or cfg.output or f"results/{Path(args.config).stem}.csv"
    res = run_config(replace(cfg, output=out))
    print(f"{cfg.scenario}: {len(res.rows)} rows -> {out} ({res.wall_time:.2f} s)")
    if res.fit is not None:
        print(f"  fitted slope {res.fit.slope:.4f} (R^2 {res.fit.r2:.4f}, {res.fit.used} sizes)")
    for f in res.failures:
        print(f"  FAILED {f}")
    return 0 if res.passed else 4


if __name__ == "__main__":
    sys.exit(main())
