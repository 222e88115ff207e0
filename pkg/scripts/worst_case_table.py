"""Worst-case bias and RMSE relative to complete randomization, raw vs trimmed heavy-tailed covariates."""

import argparse

from bestchoice.design import make_rng
from bestchoice.population import FinitePopulation, trim
from bestchoice.simulation import heavy_tailed_covariates, worst_case_mse


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=100)
    ap.add_argument("--n1", type=int, default=30)
    ap.add_argument("--K", default="2,10")
    ap.add_argument("--T", default="1,10,100,1000")
    ap.add_argument("--reps", type=int, default=20_000)
    args = ap.parse_args()
    Ks = list(map(int, args.K.split(",")))
    x = heavy_tailed_covariates(args.n, max(Ks), make_rng(7))
    xt = trim(FinitePopulation(x)).covariates
    print(f"{'K':>3} {'T':>5} {'bias raw':>9} {'bias trim':>9} {'rmse raw':>9} {'rmse trim':>9}")
    for K in Ks:
        for T in map(int, args.T.split(",")):
            a = worst_case_mse(x[:, :K], args.n1, T, args.reps, make_rng(2, K, T))
            b = worst_case_mse(xt[:, :K], args.n1, T, args.reps, make_rng(2, K, T))
            print(f"{K:>3} {T:>5} {a['worst_bias']:>9.3f} {b['worst_bias']:>9.3f} "
                  f"{a['worst_rmse']:>9.3f} {b['worst_rmse']:>9.3f}")


if __name__ == "__main__":
    main()
