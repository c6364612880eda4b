"""Empirical law of N, the number of collective transitions until the first meeting,
against the geometric tail bound and the polylogarithm moment bounds."""

import argparse

from smflow import analytics, catalog, montecarlo
from smflow.analytics import MeetScenario


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--matrix", default="three-state-constant", choices=sorted(catalog.MATRICES))
    p.add_argument("--pair", type=int, nargs=2, default=(1, 2))
    p.add_argument("--n", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--jobs", type=int, default=1)
    args = p.parse_args()

    m = catalog.MATRICES[args.matrix]()
    rng = analytics.not_meet_range(m)
    est = montecarlo.estimate_N_moments(m, MeetScenario(*args.pair), args.n, args.seed, r_max=2, tail_n=6,
                                        jobs=args.jobs)
    print(f"sup a' = {rng.sup:.6f} at {rng.argsup}, inf a' = {rng.inf:.6f} at {rng.arginf}")
    print("n,P(N>n),bound")
    for n, e in est.tail.items():
        print(f"{n},{e.mean:.5f},{analytics.never_meet_bound(m, n=n, rng=rng).value:.5f}")
    print("r,E[N^r],se,bound")
    for r, e in est.moments.items():
        print(f"{r},{e.mean:.4f},{e.std_error:.4f},{analytics.moment_bound(m, r=r, rng=rng).value:.4f}")
    if est.censored:
        print(f"# {est.censored} censored replicas")


if __name__ == "__main__":
    main()
