"""Stage counts S(eps) on extremal paths, a log-log fit and the extrapolation to eps = 0.001."""

import argparse
import json
from fractions import Fraction

from bingshrink.experiments import TARGET_BAND, scaling_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--eps", type=float, nargs="+", default=[0.04, 0.02, 0.01])
    ap.add_argument("--target", type=Fraction, default=Fraction(1, 2))
    ap.add_argument("--eps-L", type=float, default=0.25)
    ap.add_argument("--regime", type=float, default=0.001)
    ap.add_argument("--json", help="write the report here")
    args = ap.parse_args()

    rep = scaling_experiment(args.eps, args.target, args.eps_L, args.regime)
    for e, s, r in zip(rep.eps_values, rep.stages, rep.regime_stages):
        print(f"eps {e:<6} S to {rep.target}: {s:>10}   S to {rep.regime_target}: {r:>12}")
    print(f"slope {rep.fit.slope:.3f} (regime {rep.regime_fit.slope:.3f}); increasing {rep.increasing}; "
          f"S(eps/2) >= 2 S(eps): {rep.superlinear}")
    print(f"extrapolated stages at eps = {args.regime}: {rep.extrapolated:.3g}; band {TARGET_BAND}: {rep.in_band}")
    if args.json:
        out = {"eps": rep.eps_values, "stages": rep.stages, "regime_stages": rep.regime_stages,
               "slope": rep.fit.slope, "regime_slope": rep.regime_fit.slope,
               "extrapolated": rep.extrapolated, "in_band": rep.in_band, "label": rep.label}
        with open(args.json, "w") as fh:
            json.dump(out, fh, indent=1, sort_keys=True)


if __name__ == "__main__":
    main()
