"""Small-displacement gate: extremal path plus sampled paths through several phases."""

import argparse
import time
from fractions import Fraction

from bingshrink.experiments import RunConfig, run_shrink, verify_fast
from bingshrink.geometry import EpsSchedule
from bingshrink.strategies import SmallDisplacement, from_grid


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--eps", type=float, default=0.05)
    ap.add_argument("--eps-L", type=float, default=0.25)
    ap.add_argument("--paths", type=int, default=1000)
    ap.add_argument("--phases", type=int, default=4)
    ap.add_argument("--seed", type=int, default=5)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    sd = SmallDisplacement(args.eps_L, EpsSchedule.constant(args.eps), args.eps)
    runs = {
        "extremal": RunConfig(sd, "extremal", 10**9, stop_after_phases=args.phases, engine="fast"),
        "sampled": RunConfig(sd, "sampled", 10**9, seed=args.seed, count=args.paths,
                             stop_after_phases=args.phases, workers=args.workers, engine="fast"),
    }
    bound = Fraction(2 * args.eps) / 2 ** (args.phases - 1)
    for name, cfg in runs.items():
        t = time.perf_counter()
        rep = run_shrink(cfg)
        ex = rep.extras
        last = [from_grid(e.diameter) for e in ex["phase_ends"] if e.phase == args.phases]
        print(f"{name}: {len(ex['depths'])} paths, max depth {max(ex['depths'])}, "
              f"{time.perf_counter() - t:.1f}s")
        for c in verify_fast(rep):
            print(f"  {'PASS' if c.ok else 'FAIL'} {c.name} {c.detail}")
        print(f"  max contraction {ex['max_contraction']:.5f}; "
              f"max phase-{args.phases} end diameter {float(max(last)):.5g} (bound {float(bound):.5g})")


if __name__ == "__main__":
    main()
