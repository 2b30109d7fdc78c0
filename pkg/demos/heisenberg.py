"""Spherical rings in the Heisenberg group: sphere constants, ring modules,
the radial flow and the twisted curve family."""

import math

import numpy as np

from pmodulus import carnot


def main():
    H = carnot.get_group("heisenberg")
    print(f"unit sphere area {carnot.sphere_area(H):.12f} "
          f"(4 sqrt(2pi) Gamma(3/4)^2 = {4 * math.sqrt(2 * math.pi) * math.gamma(0.75) ** 2:.12f})")
    for p in (2.0, 3.0, 4.0, 6.0):
        rc = carnot.ring_constants(H, p, 1.0, math.e)
        m = carnot.module_connecting_ring(H, p, 1.0, math.e).value
        ms = carnot.module_separating_ring(H, rc.q, 1.0, math.e).value
        print(f"p={p:g}: C_S1 {rc.C_S1:.10f} vs Gamma form {carnot.heisenberg_constant(p):.10f}; "
              f"M_p {m:.8f}; M_p^(1/p) M_q^(1/q) = {m ** (1 / p) * ms ** (1 / rc.q):.12f}")
    print(f"M_4 at b = e is pi^2 = {math.pi ** 2:.10f}")

    th, al = 0.3, 0.7
    tr = carnot.radial_flow(H, carnot.SpherePoint(H, (th, al)), 3.0)
    err = np.max(np.abs(tr.final - carnot.heisenberg_flow_closed_form(th, al, 3.0)))
    print(f"radial flow to N = 3 from (theta, alpha) = ({th}, {al}): endpoint error {err:.2e}")

    cap = carnot.capacity_check(H, 4.0, 1.0, 2.0)
    print(f"capacity {cap.cap_value:.10f} vs module {cap.module_value:.10f}")

    b = 1 + math.pi / 4
    for p in (2.0, 4.0):
        m = carnot.heisenberg_twist_module(p, b)
        print(f"twisted family p={p:g}: {m.value:.6f} <= untwisted {m.details['untwisted']:.6f}")

    for name in ("htype:4,1", "htype:4,2", "htype:6,1"):
        G = carnot.get_group(name)
        k, l = G.k, G.l
        print(f"{name}: C_S1(3) quadrature {carnot.ring_constants(G, 3.0, 1.0, 2.0).C_S1:.10f}, "
              f"Beta form {carnot.htype_constant_derived(k, l, 3.0):.10f}")


if __name__ == "__main__":
    main()
