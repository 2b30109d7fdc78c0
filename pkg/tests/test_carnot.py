import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pmodulus import carnot
from pmodulus.numerics import integrate_1d

H = carnot.get_group("heisenberg")
GROUPS = ["heisenberg", "euclidean:3", "htype:2,1", "htype:4,1", "htype:4,2", "htype:4,3",
          "htype:6,1"]


def random_point(group, seed):
    rng = np.random.default_rng(seed)
    return rng.normal(size=group.dim)


# --------------------------------------------------------------- norms and frames


@pytest.mark.parametrize("name", GROUPS)
@settings(max_examples=100)
@given(seed=st.integers(0, 10 ** 6), s=st.floats(0.05, 20.0))
def test_norm_is_homogeneous(name, seed, s):
    G = carnot.get_group(name)
    g = random_point(G, seed)
    assert G.norm(G.dilate(g, s)) == pytest.approx(s * G.norm(g), rel=1e-10)


def test_norm_values():
    assert carnot.homogeneous_norm(H, [1.0, 0.0, 0.0]) == 1.0
    assert carnot.homogeneous_norm(H, [0.0, 0.0, 1.0]) == 1.0
    assert carnot.homogeneous_norm(H, [1.0, 1.0, 2.0]) == pytest.approx(8 ** 0.25)
    K = carnot.get_group("htype:4,2")
    assert carnot.homogeneous_norm(K, [0, 0, 0, 0, 0.25, 0]) == pytest.approx(1.0)


@pytest.mark.parametrize("name", ["htype:2,1", "htype:4,1", "htype:4,2", "htype:4,3",
                                  "htype:6,1"])
def test_structure_matrices_anticommute(name):
    J = carnot.get_group(name).J
    k = J[0].shape[0]
    for i, Ji in enumerate(J):
        assert np.allclose(Ji.T, -Ji)
        for j, Jj in enumerate(J):
            target = -2 * np.eye(k) if i == j else np.zeros((k, k))
            assert np.allclose(Ji @ Jj + Jj @ Ji, target)


def test_unregistered_groups():
    with pytest.raises(KeyError):
        carnot.get_group("engel")
    with pytest.raises(ValueError):
        carnot.get_group("htype:3,1")
    with pytest.raises(ValueError):
        carnot.get_group("euclidean:1")


@pytest.mark.parametrize("name", GROUPS)
def test_fd_horizontal_gradient_matches_analytic(name):
    G = carnot.get_group(name)
    g = random_point(G, 3)
    fd = carnot.horizontal_gradient_norm(G, G.norm, g)
    assert fd == pytest.approx(float(carnot.norm_gradient_norm(G, g)), rel=1e-8)


def test_heisenberg_horizontal_gradient_of_coordinates():
    g = np.array([0.3, -0.7, 0.2])
    t = lambda pts: pts[..., 2]
    assert carnot.horizontal_gradient_norm(H, t, g) == pytest.approx(2 * math.hypot(0.3, 0.7))
    assert carnot.horizontal_gradient_norm(H, lambda pts: pts[..., 0], g) == pytest.approx(1.0)


@settings(max_examples=50)
@given(st.floats(-math.pi, math.pi), st.floats(-1.5, 1.5))
def test_lambda_is_root_cosine(theta, alpha):
    pt = carnot.SpherePoint(H, (theta, alpha))
    assert H.norm(pt.point) == pytest.approx(1.0, rel=1e-13)
    assert pt.lam == pytest.approx(math.sqrt(math.cos(alpha)), rel=1e-10, abs=1e-14)
    assert carnot.sphere_lambda(H, alpha) == pytest.approx(math.sqrt(math.cos(alpha)))


def test_htype_2_1_is_heisenberg_with_rescaled_centre():
    K = carnot.get_group("htype:2,1")
    rng = np.random.default_rng(11)
    for _ in range(10):
        x1, x2, t = rng.normal(size=3)
        hk = np.array([x1, x2, t / 4])
        assert K.norm(hk) == pytest.approx(H.norm([x1, x2, t]), rel=1e-13)
        assert carnot.norm_gradient_norm(K, hk) == pytest.approx(
            carnot.norm_gradient_norm(H, np.array([x1, x2, t])), rel=1e-12)
        # X_i t computed through the frame of each model
        FK, FH = K.frame(hk), H.frame(np.array([x1, x2, t]))
        assert np.allclose(4 * FK[:, 2], FH[:, 2])


def test_htype_2_1_ring_is_quarter_of_heisenberg_ring():
    K = carnot.get_group("htype:2,1")
    for p in (2.0, 4.0):
        mk = carnot.module_connecting_ring(K, p, 1.0, 2.0).value
        mh = carnot.module_connecting_ring(H, p, 1.0, 2.0).value
        assert mk == pytest.approx(mh / 4, rel=1e-9)


# --------------------------------------------------------------- radial flow


@pytest.mark.parametrize("theta,alpha", [(0.3, 0.7), (2.0, -1.2), (-1.0, 0.0), (0.5, 1.45)])
def test_heisenberg_flow_matches_closed_form(theta, alpha):
    tr = carnot.radial_flow(H, carnot.SpherePoint(H, (theta, alpha)), 3.0)
    exact = carnot.heisenberg_flow_closed_form(theta, alpha, 3.0)
    assert np.max(np.abs(tr.final - exact)) <= 1e-9
    assert np.max(np.abs(H.norm(tr.states) - tr.samples)) <= 1e-8
    speeds = np.array([carnot.horizontal_speed(H, s, y) for s, y in zip(tr.samples, tr.states)])
    assert np.max(np.abs(speeds * math.sqrt(math.cos(alpha)) - 1)) <= 1e-9


def test_flow_runs_inward():
    tr = carnot.radial_flow(H, carnot.SpherePoint(H, (0.1, 0.4)), 0.5)
    assert np.allclose(tr.final, carnot.heisenberg_flow_closed_form(0.1, 0.4, 0.5), atol=1e-9)


def test_euclidean_flow_is_radial():
    E = carnot.get_group("euclidean:3")
    xi = np.array([1.0, 2.0, -2.0]) / 3.0
    tr = carnot.radial_flow(E, xi, 3.0)
    assert np.allclose(tr.final, 3 * xi, atol=1e-10)


@pytest.mark.parametrize("name", ["htype:4,2", "htype:6,1"])
def test_htype_flow_scales_the_norm(name):
    G = carnot.get_group(name)
    rng = np.random.default_rng(5)
    omega = rng.normal(size=G.k)
    eta = rng.normal(size=G.l)
    xi = G.sphere_embed((0.6, omega, eta))
    tr = carnot.radial_flow(G, xi, 2.5)
    assert np.max(np.abs(G.norm(tr.states) - tr.samples)) <= 1e-8
    assert G.norm(G.dilate(xi, 2.5)) == pytest.approx(2.5)


# --------------------------------------------------------------- sphere constants


def test_heisenberg_sphere_area():
    assert carnot.sphere_area(H) == pytest.approx(
        4 * math.sqrt(2 * math.pi) * math.gamma(0.75) ** 2, rel=1e-8)
    assert carnot.sphere_area(carnot.get_group("euclidean:3")) == pytest.approx(4 * math.pi)


@pytest.mark.parametrize("p", [2.0, 3.0, 4.0, 6.0])
def test_heisenberg_sphere_constant(p):
    assert carnot.ring_constants(H, p, 1.0, 2.0).C_S1 == pytest.approx(
        carnot.heisenberg_constant(p), rel=1e-8)


@pytest.mark.parametrize("k,l", [(2, 1), (4, 1), (4, 2), (4, 3), (6, 1)])
@pytest.mark.parametrize("p", [2.0, 3.5])
def test_htype_sphere_constant_beta_form(k, l, p):
    G = carnot.get_group(f"htype:{k},{l}")
    assert carnot.ring_constants(G, p, 1.0, 2.0).C_S1 == pytest.approx(
        carnot.htype_constant_derived(k, l, p), rel=1e-8)


def test_alternative_htype_normalization_disagrees_with_quadrature():
    G = carnot.get_group("htype:4,2")
    quad = carnot.ring_constants(G, 3.0, 1.0, 2.0).C_S1
    assert abs(carnot.htype_constant_printed(4, 2, 3.0) / quad - 1) > 1.0


@pytest.mark.parametrize("name", ["heisenberg", "htype:4,1", "euclidean:3"])
def test_ring_volume_two_ways(name):
    amb, sph = carnot.ring_volume(carnot.get_group(name), 1.0, 2.0)
    assert amb == pytest.approx(sph, rel=1e-8)


# --------------------------------------------------------------- ring modules


def test_heisenberg_fourth_module():
    for b in (math.e, 2.0, 5.0):
        m = carnot.module_connecting_ring(H, 4.0, 1.0, b).value
        assert m == pytest.approx(math.pi ** 2 / math.log(b) ** 3, rel=1e-8)


@pytest.mark.parametrize("p", [2.0, 3.0, 6.0])
def test_heisenberg_module_off_critical_exponent(p):
    e = (p - 4) / (p - 1)
    b = 2.0
    exact = carnot.heisenberg_constant(p) * (abs(b ** e - 1) / abs(e)) ** (1 - p)
    assert carnot.module_connecting_ring(H, p, 1.0, b).value == pytest.approx(exact, rel=1e-8)


def test_module_continuous_through_homogeneous_dimension():
    at = carnot.module_connecting_ring(H, 4.0, 1.0, 2.0).value
    near = carnot.module_connecting_ring(H, 4.0 + 1e-6, 1.0, 2.0).value
    assert near == pytest.approx(at, rel=1e-4)


def test_euclidean_ring_module():
    E = carnot.get_group("euclidean:3")
    assert carnot.module_connecting_ring(E, 3.0, 1.0, math.e).value == pytest.approx(4 * math.pi)


@pytest.mark.parametrize("name,p", [("heisenberg", 2.0), ("heisenberg", 4.0), ("heisenberg", 5.0),
                                    ("htype:4,2", 2.5), ("euclidean:3", 3.0)])
def test_conjugate_constants_and_duality(name, p):
    G = carnot.get_group(name)
    rc = carnot.ring_constants(G, p, 1.0, 2.0)
    assert rc.C_ab == pytest.approx(rc.K_ab, rel=1e-10)
    assert rc.C_S1 == pytest.approx(rc.K_S1, rel=1e-10)
    mp = carnot.module_connecting_ring(G, p, 1.0, 2.0).value
    mq = carnot.module_separating_ring(G, rc.q, 1.0, 2.0).value
    assert mp ** (1 / p) * mq ** (1 / rc.q) == pytest.approx(1.0, abs=1e-10)


def test_pointwise_extremal_relation():
    p = 3.0
    conn = carnot.extremal_density_ring(H, p, 1.0, 2.0, "connecting")
    sep = carnot.extremal_density_ring(H, p, 1.0, 2.0, "separating")
    rc = conn.constants
    rng = np.random.default_rng(1)
    pts = rng.uniform(-1.3, 1.3, size=(400, 3))
    N = H.norm(pts)
    pts = pts[(N > 1.02) & (N < 1.98)]
    rhs = rc.C_ab ** (p - 1) / rc.C_S1 * conn(pts) ** (p - 1)
    assert np.max(np.abs(sep(pts) / rhs - 1)) <= 1e-8


@pytest.mark.parametrize("alpha", [0.0, 0.9, -1.3])
def test_connecting_extremal_integrates_to_one_along_flow(alpha):
    p, b = 3.0, 2.0
    ex = carnot.extremal_density_ring(H, p, 1.0, b)
    lam = math.sqrt(math.cos(alpha))
    # horizontal speed along the flow is 1/lambda
    val = integrate_1d(lambda s: ex.along_flow(s, lam) / lam, 1.0, b, 1e-13).value
    assert val == pytest.approx(1.0, rel=1e-10)
    end = carnot.heisenberg_flow_closed_form(0.4, alpha, 1.5)
    assert float(ex(end[None, :])[0]) == pytest.approx(float(ex.along_flow(1.5, lam)), rel=1e-10)


@pytest.mark.parametrize("name,p", [("euclidean:3", 2.0), ("euclidean:3", 3.0),
                                    ("heisenberg", 2.0), ("heisenberg", 4.0)])
def test_capacity_equals_module(name, p):
    rep = carnot.capacity_check(carnot.get_group(name), p, 1.0, 2.0)
    assert rep.rel_diff <= 1e-8
    assert rep.cap_value == pytest.approx(rep.module_value, rel=1e-8)


def test_bad_ring_arguments():
    with pytest.raises(ValueError):
        carnot.extremal_density_ring(H, 2.0, 1.0, 2.0, "diagonal")


# --------------------------------------------------------------- twisted curves


B_TWIST = 1 + math.pi / 4


@pytest.mark.parametrize("p", [2.0, 4.0])
def test_twisted_module_below_ring_module(p):
    m = carnot.heisenberg_twist_module(p, B_TWIST)
    ring = carnot.module_connecting_ring(H, p, 1.0, B_TWIST).value
    assert m.details["untwisted"] == pytest.approx(ring, rel=1e-8)
    assert m.value < ring


def test_untwisted_option_reproduces_ring_module():
    m = carnot.heisenberg_twist_module(3.0, B_TWIST, twisted=False)
    ring = carnot.module_connecting_ring(H, 3.0, 1.0, B_TWIST).value
    assert m.value == pytest.approx(ring, rel=1e-7)


def test_other_volume_convention_gives_other_value():
    a = carnot.heisenberg_twist_module(2.0, B_TWIST).value
    b = carnot.heisenberg_twist_module(2.0, B_TWIST, convention="printed").value
    assert abs(a / b - 1) > 1e-3


@pytest.mark.parametrize("theta,alpha", [(0.3, 0.2), (1.7, -0.9), (-2.0, -0.1)])
def test_twisted_curves_are_horizontal(theta, alpha):
    assert carnot.twist_horizontality_residual(theta, alpha, B_TWIST) <= 1e-9


def test_twisted_curves_stay_on_norm_spheres():
    c = carnot.twist_curve(0.4, 0.1)
    for r in (1.0, 1.3, B_TWIST):
        assert H.norm(np.asarray(c(r))) == pytest.approx(r, rel=1e-9)


@pytest.mark.parametrize("p", [2.0, 4.0])
@pytest.mark.parametrize("alpha", [-1.1, -0.3, 0.4])
def test_twist_extremal_density_integrates_to_one(p, alpha):
    assert carnot.twist_density_line_integral(p, B_TWIST, 0.3, alpha) == pytest.approx(
        1.0, abs=1e-6)
