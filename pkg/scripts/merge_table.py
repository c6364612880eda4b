"""Merge probability at a meeting against the age gap, quadrature next to Monte Carlo.

Writes a CSV table to stdout.  Small gaps approach certain merging; large
gaps approach the limit computed from the exponential integral.
"""

import argparse
import math

from scipy import special

from smflow import analytics, catalog, montecarlo
from smflow.analytics import MergeScenario


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--matrix", default="saturating-two-state", choices=sorted(catalog.MATRICES))
    p.add_argument("--state", type=int, default=1)
    p.add_argument("--n", type=int, default=20_000, help="Monte Carlo replicas per gap (0 to skip)")
    p.add_argument("--seed", type=int, default=1)
    args = p.parse_args()

    m = catalog.MATRICES[args.matrix]()
    print("y,quadrature,quad_error,mc_mean,mc_se,z")
    for y in (1e-3, 1e-2, 1e-1, 1.0, 3.0, 10.0, 100.0, 1e4):
        sc = MergeScenario(args.state, y)
        r = analytics.merge_prob(m, sc)
        if args.n:
            e = montecarlo.estimate_merge_at_meeting(m, sc, args.n, args.seed)
            v = montecarlo.compare(r.value, e)
            print(f"{y:g},{r.value:.8f},{r.error:.1e},{e.mean:.5f},{e.std_error:.5f},{v.z:.2f}")
        else:
            print(f"{y:g},{r.value:.8f},{r.error:.1e},,,")
    if args.matrix == "saturating-two-state":
        limit = 1 - math.e * special.exp1(1.0)
        print(f"# large-gap limit 1 - e*E1(1) = {limit:.6f}; upper bound (1 + 1/e)/2 = {(1 + math.exp(-1)) / 2:.6f}")


if __name__ == "__main__":
    main()
