"""Choose r0 so a quadrupole pump bundle gives a target gamma_p, and write a raysim config.

    python scripts/calibrate_raysim.py --gamma-p 1.7e12 --out configs/raysim_quadrupole.json
"""

import argparse
import json
import math

from dyntunnel.rays import CavityGeometry, RayBundle, bundle_stats, length_for_decay_rate


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--gamma-p", type=float, default=1.7e12)
    ap.add_argument("--eta", type=float, default=0.16)
    ap.add_argument("--m", type=float, default=1.361)
    ap.add_argument("--theta0", type=float, default=0.0)
    ap.add_argument("--chi0", type=float, default=0.6)
    ap.add_argument("--sigma", type=float, default=0.02)
    ap.add_argument("--count", type=int, default=20000)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--out", default="configs/raysim_quadrupole.json")
    args = ap.parse_args()

    unit = CavityGeometry.quadrupole(1.0, args.eta, args.m)
    bundle = RayBundle(args.theta0, args.chi0, args.sigma, args.sigma, args.count, args.seed)
    stats = bundle_stats(unit, bundle, 5000)
    target = length_for_decay_rate(args.gamma_p, args.m)
    r0 = target / stats.L_p
    print(f"L_p / r0 = {stats.L_p:.6g} +- {stats.sem:.2g}  (escaped {stats.n_escaped}, confined {stats.n_confined})")
    print(f"target L_p = {target * 1e6:.4g} um  ->  r0 = {r0 * 1e6:.4g} um")

    cfg = {
        "command": "raysim",
        "geometry": {"r0": float(f"{r0:.6g}"), "deformation": [[2, args.eta]], "m": args.m},
        "bundle": {
            "theta0": args.theta0,
            "chi0": args.chi0,
            "sigma_theta": args.sigma,
            "sigma_chi": args.sigma,
            "count": args.count,
        },
        "max_bounces": 5000,
    }
    with open(args.out, "w") as fh:
        json.dump(cfg, fh, indent=2)
        fh.write("\n")
    print("wrote", args.out, "| chi_c =", f"{math.degrees(math.asin(1 / args.m)):.2f} deg")


if __name__ == "__main__":
    main()
