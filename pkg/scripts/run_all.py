"""Run every config in configs/ and write CSV plus metadata JSON into results/."""

import subprocess
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def main() -> int:
    worst = 0
    for cfg in sorted((ROOT / "configs").glob("*.json")):
        out = ROOT / "results" / f"{cfg.stem}.csv"
        code = subprocess.call([sys.executable, str(ROOT / "scripts" / "run_experiment.py"), str(cfg),
                                "--out", str(out)])
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    sys.exit(main())
