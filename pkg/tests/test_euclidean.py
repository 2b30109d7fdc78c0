import math

import numpy as np
import pytest

from pmodulus import core, euclidean as eu


def quad_vs_closed(name, params, p):
    cond, fmap = eu.build_scenario(name, params)
    val = eu.module_connecting(cond, fmap, p).value
    ref = eu.closed_form_reference(name, dict(params, p=p)).value
    return val, ref


@pytest.mark.parametrize("name,params,p", [
    ("cylinder", {"n": 2, "width": 1.5, "a": 0.0, "b": 2.0}, 2.0),
    ("cylinder", {"n": 3, "width": 0.7, "a": 0.5, "b": 2.0}, 3.5),
    ("shear_cylinder", {"n": 2, "beta": 1.0, "r": 1.5}, 2.0),
    ("shear_cylinder", {"n": 3, "beta": 0.4, "r": 2.0}, 1.5),
    ("spherical_ring", {"n": 2, "a": 1.0, "b": 3.0}, 2.0),
    ("spherical_ring", {"n": 3, "a": 1.0, "b": 2.0}, 2.0),
    ("spherical_ring", {"n": 3, "a": 0.5, "b": 2.0}, 3.0),
    ("spherical_ring", {"n": 3, "a": 1.0, "b": math.e}, 4.0),
    ("sphere_log_twist", {"n": 2, "beta": 1.0, "r": math.e}, 2.0),
    ("sphere_log_twist", {"n": 2, "beta": 0.5, "r": 2.0}, 3.0),
    ("sphere_twist", {"n": 2, "r": 2.0}, 2.0),
])
def test_fibre_module_matches_closed_form(name, params, p):
    val, ref = quad_vs_closed(name, params, p)
    assert val == pytest.approx(ref, rel=1e-8)


def test_spherical_ring_closed_forms():
    # M_n = |S^{n-1}| (log b/a)^{1-n}
    ref = eu.closed_form_reference("spherical_ring", {"n": 3, "a": 1.0, "b": math.e, "p": 3.0})
    assert ref.value == pytest.approx(4 * math.pi, rel=1e-14)
    assert eu.sphere_area(3) == pytest.approx(4 * math.pi, rel=1e-14)
    assert eu.sphere_area(2) == pytest.approx(2 * math.pi, rel=1e-14)


def test_twist_references_need_planar_rings():
    with pytest.raises(ValueError):
        eu.closed_form_reference("sphere_twist", {"n": 3, "p": 2.0})


@pytest.mark.parametrize("beta,p", [(1.0, 2.0), (0.5, 3.0), (2.0, 1.5)])
def test_shear_duality_product(beta, p):
    cond, fmap = eu.build_scenario("shear_cylinder", {"n": 2, "beta": beta, "r": 1.3})
    q = p / (p - 1)
    mp = eu.module_connecting(cond, fmap, p).value
    mq = eu.module_separating(cond, fmap, q).value
    prod = mp ** q * mq ** p
    assert prod == pytest.approx((1 + beta ** 2) ** (-p * q / 2), rel=1e-8)
    assert abs(prod - 1) > 1e-3


@pytest.mark.parametrize("name,params,p", [("cylinder", {"n": 3, "a": 0.0, "b": 2.0}, 2.5),
                                           ("spherical_ring", {"n": 3, "a": 1.0, "b": 2.0}, 2.0),
                                           ("spherical_ring", {"n": 2, "a": 1.0, "b": 2.0}, 3.0)])
def test_unsheared_duality_product_is_one(name, params, p):
    cond, fmap = eu.build_scenario(name, params)
    q = p / (p - 1)
    mp = eu.module_connecting(cond, fmap, p).value
    mq = eu.module_separating(cond, fmap, q).value
    assert mp ** (1 / p) * mq ** (1 / q) == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("p", [2.0, 3.0])
@pytest.mark.parametrize("n", [2, 3])
@pytest.mark.parametrize("r", [2.0, math.e, 3.0])
def test_twist_length_inequality(p, n, r):
    lhs, rhs = eu.twist_inequality(p, n, r)
    assert rhs > 0
    assert lhs >= rhs


def test_absolute_value_variant_of_twist_inequality_goes_negative():
    _, rhs = eu.twist_inequality(2.0, 3, 2.0, corrected=False)
    assert rhs < 0


def test_connecting_extremal_integrates_to_one_on_fibres():
    cond, fmap = eu.build_scenario("shear_cylinder", {"n": 2, "beta": 0.8, "r": 1.5})
    ex = eu.extremal_density_connecting(cond, fmap, 3.0)
    for x in (0.2, 0.5, 0.85):
        curve = core.ParametricCurve(
            lambda t, x=x: fmap.f(cond.embed(np.full((np.size(t), 1), x), np.atleast_1d(t))),
            cond.a, cond.b)
        val = core.line_integral(ex.field, curve, rtol=1e-9)
        assert val == pytest.approx(1.0, abs=1e-7)


def test_connecting_extremal_energy_equals_module():
    p = 3.0
    cond, fmap = eu.build_scenario("cylinder", {"n": 2, "width": 1.0, "a": 0.0, "b": 2.0})
    ex = eu.extremal_density_connecting(cond, fmap, p)
    e = core.energy(ex.field, p, core.rectangle(0.0, 1.0, 0.0, 2.0), 1e-9)
    assert e == pytest.approx(eu.module_connecting(cond, fmap, p).value, rel=1e-7)


def test_ring_extremal_density_is_radial():
    p, n = 2.0, 2
    cond, fmap = eu.build_scenario("spherical_ring", {"n": n, "a": 1.0, "b": 2.0})
    ex = eu.extremal_density_connecting(cond, fmap, p)
    vals = ex.in_coordinates([[0.3]], [1.0, 1.5, 2.0])
    r = np.array([1.0, 1.5, 2.0])
    assert np.allclose(vals, 1 / (r * math.log(2.0)), rtol=1e-8)


@pytest.mark.parametrize("name,params", [("shear_cylinder", {"n": 2, "beta": 1.0, "r": 1.0}),
                                         ("spherical_ring", {"n": 3, "a": 1.0, "b": 2.0})])
def test_separating_extremal_slices_integrate_to_one(name, params):
    cond, fmap = eu.build_scenario(name, params)
    sep = eu.extremal_density_separating(cond, fmap, 2.5)
    for t in (cond.a + 0.25 * (cond.b - cond.a), 0.5 * (cond.a + cond.b)):
        assert sep.slice_integral(t) == pytest.approx(1.0, abs=1e-7)


def test_surface_jacobian_of_sphere():
    from pmodulus.numerics import integrate_2d
    cond, fmap = eu.build_scenario("spherical_ring", {"n": 3, "a": 1.0, "b": 2.0})
    t = 1.5
    x = np.array([0.7, 0.3])
    w = cond.weight(x[None, :])[0]
    assert eu.surface_jacobian(cond, fmap, x, t) * w == pytest.approx(t * t * math.sin(0.3),
                                                                       rel=1e-7)
    area = integrate_2d(lambda a, b: eu.surface_jacobian(cond, fmap, np.array([a, b]), t)
                        * cond.weight(np.array([[a, b]]))[0], cond.base_box, 1e-7)
    assert area.value == pytest.approx(4 * math.pi * t * t, rel=1e-6)


def test_conical_cylinder_planar_sector():
    cond, fmap = eu.build_scenario("conical_cylinder",
                                   {"n": 2, "width": 1.0, "a": 1.0, "b": 2.0, "beta": 1.0})
    val = eu.module_connecting(cond, fmap, 2.0).value
    assert val == pytest.approx(math.atan(1.0) / math.log(2.0), rel=1e-8)


def test_negative_jacobian_is_rejected():
    cond, _ = eu.build_scenario("cylinder", {"n": 2})
    bad = eu.CondenserMap(lambda y: y, J_f=lambda y: -np.ones(np.shape(y)[0]))
    with pytest.raises(eu.DegenerateParametrizationError):
        eu.module_connecting(cond, bad, 2.0)


def test_invalid_configurations():
    with pytest.raises(ValueError):
        eu.cylinder([(0, 1)], 2.0, 1.0)
    with pytest.raises(ValueError):
        eu.spherical_ring(1, 1.0, 2.0)
    with pytest.raises(KeyError):
        eu.build_scenario("torus", {})
    cond, fmap = eu.build_scenario("cylinder", {"n": 2})
    with pytest.raises(ValueError):
        eu.module_connecting(cond, fmap, 1.0)


def test_extremal_density_examples():
    cond, fmap = eu.build_scenario("cylinder", {"n": 2, "a": 0.5, "b": 2.0})
    ex = eu.extremal_density_connecting(cond, fmap, 3.0)
    assert np.allclose(ex(np.array([[0.3, 1.0], [0.9, 1.7]])), 1 / 1.5, rtol=1e-9)
    beta, r = 0.7, 1.3
    cond, fmap = eu.build_scenario("shear_cylinder", {"n": 2, "beta": beta, "r": r})
    ex = eu.extremal_density_connecting(cond, fmap, 2.0)
    assert np.allclose(ex.in_coordinates([[0.4]], [0.2, 1.1]), 1 / (r * math.sqrt(1 + beta ** 2)),
                       rtol=1e-9)


def test_extremal_density_admissible_on_sampled_fibres():
    cond, fmap = eu.build_scenario("shear_cylinder", {"n": 2, "beta": 0.7, "r": 1.3})
    ex = eu.extremal_density_connecting(cond, fmap, 2.0)
    fam = core.CurveFamilySampler(
        lambda x: core.Polyline(fmap.f(cond.embed(np.array([[x], [x]]), np.array([0.0, 1.3])))),
        [cond.base_box[0]])
    rep = core.check_admissible(ex.field, fam, 100)
    assert rep.admissible
    assert max(abs(v - 1) for v in rep.integrals) <= 1e-8


def test_ambient_density_without_inverse_is_a_configuration_error():
    cond, fmap = eu.build_scenario("shear_cylinder", {"n": 2})
    no_inverse = eu.CondenserMap(fmap.f, name="shear without inverse")
    ex = eu.extremal_density_connecting(cond, no_inverse, 2.0)
    assert ex.field is None
    with pytest.raises(eu.ConfigurationError):
        ex(np.array([[0.5, 0.5]]))
    assert ex.in_coordinates([[0.5]], [0.5])[0] > 0


def test_fibre_lengths():
    cond, fmap = eu.build_scenario("cylinder", {"n": 3, "a": 0.5, "b": 2.0})
    assert eu.ell_connecting(cond, fmap, np.array([0.2, 0.3]), 2.0) == pytest.approx(1.5)
    beta, r = 0.6, 1.4
    cond, fmap = eu.build_scenario("shear_cylinder", {"n": 2, "beta": beta, "r": r})
    assert eu.ell_connecting(cond, fmap, np.array([0.5]), 2.0) == pytest.approx(
        (1 + beta ** 2) * r, rel=1e-10)
    prof = eu.connecting_profile(cond, fmap, 3.0)
    assert prof.q == pytest.approx(1.5)
    assert prof.ell(np.array([0.5])) == pytest.approx((1 + beta ** 2) ** 0.75 * r, rel=1e-10)


@pytest.mark.parametrize("name", ["shear_cylinder", "sphere_twist", "sphere_log_twist"])
def test_registered_maps_invert(name):
    _, fmap = eu.build_scenario(name, {"n": 3, "beta": 0.8})
    y = np.random.default_rng(2).uniform(0.5, 1.5, size=(20, 3))
    assert np.allclose(fmap.f(fmap.f_inverse(y)), y, atol=1e-8)
    assert np.allclose(fmap.f_inverse(fmap.f(y)), y, atol=1e-8)
