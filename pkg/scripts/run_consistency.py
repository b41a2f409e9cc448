"""Convergence curves of the plug-in estimator for the shipped fixtures.

    python scripts/run_consistency.py --reps 20 --out curves.csv
"""

import argparse
import csv
import sys

from quadminimax.consistency import run_consistency, shipped_fixtures


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--reps", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--schedule", default="100,1000,10000")
    ap.add_argument("--sampler", choices=["normal", "t"], default="normal")
    ap.add_argument("--out")
    args = ap.parse_args()

    schedule = tuple(int(x) for x in args.schedule.split(","))
    rows = []
    for exp in shipped_fixtures(replications=args.reps, seed=args.seed, schedule=schedule,
                                sampler=args.sampler):
        curve = run_consistency(exp)
        rows.extend(curve.to_rows())
        meds = " ".join(f"{pt.median_distance:.3e}" for pt in curve.points)
        print(f"{exp.name:22s} {meds}  decreasing={curve.strictly_decreasing}", file=sys.stderr)
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    writer = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    if args.out:
        fh.close()


if __name__ == "__main__":
    main()
