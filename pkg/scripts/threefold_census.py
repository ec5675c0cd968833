"""Exploratory census for three-fold products T^a x T^b x T^c.

No bound is known here; the script only tabulates satisfied fractions.
"""

import argparse

from rankone.descendants import certify_general_product
from rankone.heights import build_family


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--stages", type=int, default=2)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    spec = build_family([1] * args.stages)
    print("alphas,bs,j,fraction")
    for alphas in [(1, 1, 1), (1, 1, -1), (1, -1, 2)]:
        for b in range(3):
            bs = (b, 0, 0)
            for j in range(1, args.stages + 1):
                rep = certify_general_product(spec, 0, j, alphas, bs, threads=args.threads)
                print(f"\"{alphas}\",\"{bs}\",{j},{float(rep.fraction):.6f}")


if __name__ == "__main__":
    main()
