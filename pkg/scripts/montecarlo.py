"""Random-clasp Monte Carlo: image-diameter quantiles by depth (no shrink claim)."""

import argparse

from bingshrink.experiments import QUANTILES, monte_carlo_random


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=10_000)
    ap.add_argument("--depth", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--every", type=int, default=20, help="print every k-th depth")
    args = ap.parse_args()

    rep = monte_carlo_random(args.trials, args.depth, args.seed, workers=args.workers)
    print(rep.label)
    print("depth " + " ".join(f"q{round(q * 100):02d}".rjust(10) for q in QUANTILES) + "       mean")
    for k in range(0, args.depth + 1, args.every):
        print(f"{k:5d} " + " ".join(f"{v:10.3e}" for v in rep.quantiles[k]) + f" {rep.mean[k]:10.3e}")


if __name__ == "__main__":
    main()
