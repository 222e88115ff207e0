"""Grid of v_{K,T} with its quadrature cross-check and the regime label."""

import argparse

import numpy as np
from scipy import integrate, stats

from bestchoice.asymptotics import McConfig, regime_classify


def quadrature(K, T):
    val, _ = integrate.quad(lambda x: stats.chi2.sf(x, K) ** T, 0, np.inf, limit=400)
    return val / K


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--K", default="1,2,5,10,20,40")
    ap.add_argument("--T", default="1,10,100,1000,10000")
    ap.add_argument("--draws", type=int, default=200_000)
    args = ap.parse_args()
    mc = McConfig(draws=args.draws)
    print(f"{'K':>4} {'T':>6} {'log(T)/K':>9} {'v (MC)':>9} {'se':>8} {'v (quad)':>9}  regime")
    for K in map(int, args.K.split(",")):
        for T in map(int, args.T.split(",")):
            r = regime_classify(K, T, mc)
            print(f"{K:>4} {T:>6} {r['ratio']:>9.3f} {r['v_estimate']:>9.4f} {r['v_se']:>8.4f} "
                  f"{quadrature(K, T):>9.4f}  {r['regime']}")


if __name__ == "__main__":
    main()
