"""Stages to a diameter target for the 1952, small-displacement and 1988 strategies."""

import argparse
from fractions import Fraction

from bingshrink.experiments import RunConfig, compare_strategies
from bingshrink.strategies import Bing1952, Bing1988, SmallDisplacement


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--target", type=Fraction, default=Fraction(1, 5))
    args = ap.parse_args()
    t = (args.target,)
    rows = compare_strategies([
        RunConfig(Bing1952(), "full", 10, t),
        RunConfig(SmallDisplacement(), "extremal", 10**9, t, engine="fast", until_targets=True),
        RunConfig(Bing1988(), "full", 10, t),
    ])
    for r in rows:
        st = r.stages_to_target[args.target]
        label = " (interpretive)" if r.interpretive else ""
        print(f"{r.strategy + label:<28} stages<{args.target}: {'not reached' if st is None else st:>8}  "
              f"max displacement {float(r.max_displacement):.4g}  max length {float(r.max_length):.4g}")


if __name__ == "__main__":
    main()
