#!/usr/bin/env python3
"""Run a config-driven experiment (scenario preset, estimator, or phase
scan) and print the reproducibility manifest.

Usage: python3 scripts/run_scenario.py --config scripts/configs/r6.toml
"""
import argparse
import dataclasses
import json
import sys

from polyrange.errors import BudgetExceeded, ValidationError
from polyrange.exper import run_experiment


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", required=True)
    ap.add_argument("--out-dir", default=None)
    args = ap.parse_args()
    try:
        manifest = run_experiment(args.config, out_dir=args.out_dir)
    except BudgetExceeded as exc:
        print(f"budget refused: {exc}", file=sys.stderr)
        return 3
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 2
    json.dump(dataclasses.asdict(manifest), sys.stdout, indent=1,
              default=float)
    sys.stdout.write("\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
