"""Print the length-versus-separation table of an exponent family.

    python scripts/scan_exponent.py egg2 --family tangential --j-max 6
"""

import argparse

import numpy as np

from catlin_gh import MetricField, load_domain
from catlin_gh.experiments import ScaleFamily, degenerate_point, exponent_regression
from catlin_gh.geodesics import REAL_SLICE, GeodesicBudget

if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("domain")
    ap.add_argument("--family", choices=("tangential", "normal"), default="tangential")
    ap.add_argument("--j-max", type=int, default=6)
    ap.add_argument("--h", type=float, default=0.1)
    args = ap.parse_args()

    dom = load_domain(args.domain)
    metric = MetricField("catlin_patched", dom)
    fam = ScaleFamily(degenerate_point(dom), j_max=args.j_max, normal=args.family == "normal")
    expected = 1.0 if fam.normal else 1.0 / dom.type_m
    rep = exponent_regression(dom, metric, fam, GeodesicBudget(h=args.h, frame=REAL_SLICE), expected=expected)
    print(f"{'separation':>12s} {'length':>12s} {'length/sep':>12s}")
    for s, L in zip(rep.scales, rep.lengths):
        print(f"{s:12.5f} {L:12.5f} {L / s:12.4f}")
    print(f"slope {rep.slope:.4f} (1/m = {expected:.4f}), r^2 {rep.r_squared:.4f}")
    print("local slopes", np.round(np.diff(np.log(rep.lengths)) / np.diff(np.log(rep.scales)), 3).tolist())
