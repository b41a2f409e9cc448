"""Compare the solver with the brute-force oracles on random instances.

    python scripts/run_oracle_equivalence.py --n 200 --seed 1
    python scripts/run_oracle_equivalence.py --mixed --max-p 2 --n 50
"""

import argparse
import time

import numpy as np

from quadminimax.instances import random_instance
from quadminimax.oracle import oracle_check
from quadminimax.solver import solve


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--max-p", type=int, default=3)
    ap.add_argument("--mixed", action="store_true", help="include NonPositive rows")
    ap.add_argument("--verbose", action="store_true")
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    t0 = time.perf_counter()
    fails, gaps, dists = 0, [], []
    for t in range(args.n):
        p = int(rng.integers(1, args.max_p + 1))
        lo = 2 if args.mixed else 1
        k, m = int(rng.integers(lo, 5)), int(rng.integers(lo, 5))
        qfs, _, _ = random_instance(rng, p, k, m, mixed=args.mixed)
        rep = solve(qfs)
        chk = oracle_check(qfs, rep.min_value, rep.chosen_betas)
        gaps.append(abs(chk.value_gap) / (1 + abs(rep.min_value)))
        dists.append(chk.set_distance)
        if not chk.passed:
            fails += 1
        if args.verbose or not chk.passed:
            print(f"{t:4d} p={p} k={k} m={m} solver={chk.solver_value:.10g} "
                  f"oracle={chk.oracle_value:.10g} tol={chk.tolerance:.1e} "
                  f"{'ok' if chk.passed else 'FAIL'}")
    print(f"{args.n - fails}/{args.n} agree; max rel gap {max(gaps):.1e}; "
          f"max set distance {max(dists):.1e}; {time.perf_counter() - t0:.1f} s")


if __name__ == "__main__":
    main()
