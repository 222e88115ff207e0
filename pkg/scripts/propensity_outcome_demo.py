"""Coverage under adversarial propensity-ranked outcomes, with and without covariate trimming."""

import argparse

from bestchoice.design import make_rng
from bestchoice.population import FinitePopulation, trim
from bestchoice.simulation import SimConfig, heavy_tailed_covariates, propensity_outcomes, run_replications


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=200)
    ap.add_argument("--n1", type=int, default=40)
    ap.add_argument("--Kmax", type=int, default=20)
    ap.add_argument("--designs", default="2:10,20:10,20:1000", help="comma list of K:T")
    ap.add_argument("--reps", type=int, default=1000)
    args = ap.parse_args()
    designs = [tuple(map(int, d.split(":"))) for d in args.designs.split(",")]
    x = heavy_tailed_covariates(args.n, args.Kmax, make_rng(21))
    y, p = propensity_outcomes(x, args.n1, [designs[0], designs[-1]], 2000, make_rng(22))
    print(f"average propensity range [{p.min():.3f}, {p.max():.3f}] (nominal {args.n1 / args.n:.3f})")
    raw = FinitePopulation(x, y1=y, y0=y)
    print(f"{'K':>3} {'T':>5} {'hc':<4} {'raw':>7} {'trimmed':>8}")
    for K, T in designs:
        res = {}
        for label, pop in (("raw", raw), ("trimmed", trim(raw))):
            cfg = SimConfig(pop=pop, n1=args.n1, K_used=K, T=T, reps=args.reps, methods=("constrained",),
                            hc_variants=("HC0", "HC2"), master_seed=3, cre_baseline=False)
            res[label] = run_replications(cfg)
        for hc in ("HC0", "HC2"):
            a = res["raw"].cell("best-choice", "constrained", hc)["coverage"]
            b = res["trimmed"].cell("best-choice", "constrained", hc)["coverage"]
            print(f"{K:>3} {T:>5} {hc:<4} {a:>7.3f} {b:>8.3f}")


if __name__ == "__main__":
    main()
