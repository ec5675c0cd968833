"""Return probabilities and decay exponents across epsilon.

For each epsilon: the fitted exponent of q_00^(n) = p_00^(2n), the verdict
for each fold count, and a Monte Carlo spot check at a few n.
"""

import argparse

import numpy as np

from rankone import markov as mk


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--eps", default="0,0.1,0.2,0.3,0.4,0.6,0.8")
    ap.add_argument("--steps", type=int, default=4000)
    ap.add_argument("--folds", default="1,2,3,4")
    ap.add_argument("--paths", type=int, default=10**6)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    folds = [int(k) for k in args.folds.split(",")]
    print("eps,beta_hat,fit_residual," + ",".join(f"verdict_k{k}" for k in folds) + ",mc_max_z")
    for eps in (float(e) for e in args.eps.split(",")):
        spec = mk.MarkovChainSpec(eps, 2 * args.steps + 10, squared=True)
        reps = [mk.product_conservativity_diagnostic(spec, k, args.steps) for k in folds]
        walk = mk.MarkovChainSpec(eps, 1010)
        exact = mk.return_probabilities(walk, 1000).p00
        hits, _ = mk.monte_carlo_returns(walk, 1000, args.paths, seed=args.seed)
        idx = np.array([10, 100, 1000]) - 1
        se = mk.standard_error(exact[idx], args.paths)
        z = np.max(np.abs(hits[idx] / args.paths - exact[idx]) / se)
        print(f"{eps},{reps[0].beta_hat:.4f},{reps[0].fit_residual:.2e}," + ",".join(r.verdict for r in reps) + f",{z:.2f}")


if __name__ == "__main__":
    main()
