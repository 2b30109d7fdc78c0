"""Rectangle, annulus and logarithmic spirals: exact value, quadrature and grid solver."""

import math

from pmodulus import euclidean, oracle, planar


def main():
    a, b = 1.0, 2.0
    quad = planar.rodin2d_module(lambda x, t: x + 1j * t, (0.0, a, 0.0, b)).value
    grid = oracle.build_grid(oracle.rectangle_domain(a, b), a / 100)
    res = oracle.solve_modulus(grid, oracle.DiscreteFamily.connecting(), 2.0)
    print(f"rectangle {a}x{b}:  exact {a / b:.6f}  quadrature {quad:.12f}  grid {res.value:.6f}")

    for p in (1.5, 3.0):
        cond, fmap = euclidean.build_scenario("cylinder", {"n": 2, "width": a, "b": b})
        val = euclidean.module_connecting(cond, fmap, p).value
        print(f"  p={p}: a/b^(p-1) = {a / b ** (p - 1):.6f}, fibre quadrature {val:.12f}")

    ring = planar.RingDomainSpec(2.0, planar.make_map("identity"))
    conn = planar.annulus_radial_image_module(ring).value
    sep = planar.annulus_circle_image_module(ring).value
    print(f"annulus 1<|z|<2:  radial {conn:.10f}  circles {sep:.10f}  product {conn * sep:.12f}")

    print("log spirals  beta  exact       dilatation   rectangle")
    for beta in (0.0, 0.5, 1.0, 2.0):
        exact = 2 * math.pi / ((1 + beta ** 2) * math.log(2.0))
        d = planar.log_spiral_image_module(ring, beta).value
        r = planar.log_spiral_module_via_rectangle(ring, beta).value
        print(f"            {beta:4.1f}  {exact:.8f}  {d:.8f}   {r:.8f}")


if __name__ == "__main__":
    main()
