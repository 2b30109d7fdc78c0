"""Two-sided dilatation bounds on the conformal module of a distorted annulus,
compared with the grid solver.  Prints CSV suitable for plotting."""

import argparse
import csv
import sys

import numpy as np

from pmodulus import oracle, planar


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--map", default="affine", choices=("affine", "angular_shear", "radial_bump"))
    ap.add_argument("--param", default="k")
    ap.add_argument("--values", type=float, nargs="+", default=[1.0, 1.5, 2.0, 3.0])
    ap.add_argument("--b", type=float, default=2.0)
    ap.add_argument("--n", type=int, default=120, help="cells across the bounding box")
    args = ap.parse_args(argv)

    w = csv.writer(sys.stdout)
    w.writerow(["parameter", "value", "lower_bound", "upper_bound"])
    for v in args.values:
        params = {args.param: v}
        bd = planar.ring_module_bounds(planar.RingDomainSpec(args.b, planar.make_map(args.map,
                                                                                     **params)))
        inv, radius = planar.ring_image_inverse(args.map, args.b, **params)
        grid = oracle.build_grid(oracle.ring_image_domain(inv, args.b, radius),
                                 2 * radius / args.n)
        val = oracle.separating_module_2d(grid, 2.0, oracle.OracleOptions(stencil=48)).value
        w.writerow([v, f"{val:.6f}", f"{bd.lower:.6f}", f"{bd.upper:.6f}"])
    print(f"# identity value log(b)/2pi = {np.log(args.b) / (2 * np.pi):.6f}", file=sys.stderr)


if __name__ == "__main__":
    main()
