"""Distribution of selected segment-length ratios behind the calibrated constants.

Usage: python3 scripts/calibration_report.py [--samples 256] [--out results/calibration_ratios.json]
"""

import argparse

import numpy as np

from wildeuler.calibration import load_table, segment_ratios
from wildeuler.io import write_json


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=256)
    ap.add_argument("--seed", type=int, default=2000)
    ap.add_argument("--out", default="results/calibration_ratios.json")
    args = ap.parse_args(argv)
    table = load_table()
    out = {}
    for N in (2, 3):
        r, chi_ok = segment_ratios(N, args.samples, args.seed + N)
        q = np.quantile(r, [0.0, 0.05, 0.5, 0.95, 1.0])
        out[N] = {"quantiles": q.tolist(), "chi0_ok": chi_ok, "shipped_c_seg": table.c_cal(N),
                  "fraction_below_shipped": float(np.mean(r < table.c_cal(N)))}
        print(f"N={N}: ratio quantiles {np.round(q, 4).tolist()}, shipped c_seg {table.c_cal(N):.4f}, "
              f"fraction of fresh samples below it {out[N]['fraction_below_shipped']:.3f}")
    write_json(args.out, out)


if __name__ == "__main__":
    main()
