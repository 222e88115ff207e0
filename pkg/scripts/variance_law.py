"""Empirical Var(tau_hat)/V against 1 - (1 - v_{K,T}) R^2 over a range of T."""

import argparse
import math

from bestchoice.asymptotics import variance_vKT
from bestchoice.design import make_rng
from bestchoice.simulation import SimConfig, compute_truth, linear_population, run_replications


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=1000)
    ap.add_argument("--K", type=int, default=2)
    ap.add_argument("--r2", type=float, default=0.5)
    ap.add_argument("--T", default="1,10,100")
    ap.add_argument("--reps", type=int, default=5000)
    args = ap.parse_args()
    pop = linear_population(args.n, args.K, args.r2, make_rng(11))
    truth = compute_truth(pop, args.n // 2)
    print(f"R2={truth.R2:.3f}  Vtt={truth.Vtt:.5f}")
    print(f"{'T':>6} {'empirical':>10} {'se':>7} {'theory':>8}")
    for T in map(int, args.T.split(",")):
        cfg = SimConfig(pop=pop, n1=args.n // 2, K_used=args.K, T=T, reps=args.reps,
                        methods=("neyman",), cre_baseline=False, master_seed=5)
        err = run_replications(cfg).tau_hat["best-choice"] - truth.tau
        ratio = err.var(ddof=1) / truth.Vtt
        se = ratio * math.sqrt(2 / (err.size - 1))
        theory = 1 - (1 - variance_vKT(args.K, T).value) * truth.R2
        print(f"{T:>6} {ratio:>10.4f} {se:>7.4f} {theory:>8.4f}")


if __name__ == "__main__":
    main()
