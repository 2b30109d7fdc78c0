"""Solve for the discrete extremal density of a parallelogram and compare the
resulting separating module with its analytic bracket."""

import math

import numpy as np

from pmodulus import oracle, planar


def main(theta=math.pi / 3, h=1.0, n=60):
    grid = oracle.build_grid(oracle.parallelogram_domain(theta, h), 1.0 / n)
    res = oracle.solve_modulus(grid, oracle.DiscreteFamily.connecting(), 2.0,
                                oracle.OracleOptions(stencil=48))
    rep = planar.parallelogram_bounds(theta, h)
    lo, hi = rep.sigma_bracket
    print(f"{grid.n_cells} cells, {res.active_constraints} active curves, "
          f"{res.iterations} rounds, {res.runtime:.1f} s")
    print(f"connecting module {res.value:.5f} (upper estimate {res.upper:.5f})")
    print(f"separating module {1 / res.value:.5f} in [{lo:.5f}, {hi:.5f}]")
    _, _, values = res.rho.grid
    inner = values[grid.mask]
    print(f"density on cells {inner.min():.4f} .. {inner.max():.4f}, median {np.median(inner):.4f}")


if __name__ == "__main__":
    main()
