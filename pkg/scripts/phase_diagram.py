#!/usr/bin/env python3
"""Emit a (zeta, gamma) phase-classification grid as CSV.

Usage: python3 scripts/phase_diagram.py [--d 2] [--alpha 1.5] [--grid 200]
                                        [--out phase.csv]
"""
import argparse
import csv
import sys

import numpy as np

from polyrange.params import ModelParams, classify_region


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--d", type=int, default=2)
    ap.add_argument("--alpha", type=float, default=1.5)
    ap.add_argument("--grid", type=int, default=200)
    ap.add_argument("--zeta-lo", type=float, default=-2.0)
    ap.add_argument("--zeta-hi", type=float, default=2.0)
    ap.add_argument("--gamma-lo", type=float, default=-1.0)
    ap.add_argument("--gamma-hi", type=float, default=2.0)
    ap.add_argument("--out", default=None)
    args = ap.parse_args()

    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    w = csv.writer(fh)
    w.writerow(["zeta", "gamma", "region", "xi", "theorem_tag"])
    for z in np.linspace(args.zeta_lo, args.zeta_hi, args.grid):
        for g in np.linspace(args.gamma_lo, args.gamma_hi, args.grid):
            rep = classify_region(ModelParams(
                d=args.d, alpha=args.alpha, p=0.5, q=0.5, beta_hat=1.0,
                gamma=float(g), h_hat=1.0, zeta=float(z)))
            w.writerow([f"{z:.6g}", f"{g:.6g}", rep.region,
                        "" if rep.xi is None else f"{rep.xi:.6g}",
                        rep.applicable_theorem])
    if fh is not sys.stdout:
        fh.close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
