"""Connecting-curve and separating-set modules of condensers in R^n.

A condenser is described by an embedding ``u(x, t)`` of ``D x [a, b]`` where
``x`` ranges over a parameter box for the base ``D`` (with surface weight
``w(x)``) and ``t`` over ``[a, b]``.  A smooth map ``f`` carries the straight
fibres ``t -> u(x, t)`` to curves ``c_x`` and the slices ``sigma_t`` to
hypersurfaces.  With ``I = J_u J_f`` (``J_u`` taken relative to the measure
``w(x) dx dt``) and conjugate exponents ``1/p + 1/q = 1``:

* the fibre family has p-module ``int_D ell(x)^(1-p) dH``, where
  ``ell(x) = int_a^b (|c_x'| / I)^q I dt``;
* the slice family has q-module ``int_a^b ell(t)^(1-q) dt``, where
  ``ell(t) = int_D |grad t|^p I dH`` and ``grad t`` is the gradient of the
  fibre coordinate ``t`` pulled back through ``f``.

All array callables are vectorized: ``x`` has shape ``(m, n-1)``, ``t`` shape
``(m,)`` and points shape ``(m, n)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from .core import DensityField, ModuleEstimate
from .numerics import gamma_fn, integrate_1d

__all__ = [
    "DegenerateParametrizationError",
    "ConfigurationError",
    "Condenser",
    "CondenserMap",
    "RodinProfile",
    "ConnectingExtremal",
    "SeparatingExtremal",
    "cylinder",
    "spherical_ring",
    "conical_cylinder",
    "identity_map",
    "shear_map",
    "sphere_twist_map",
    "ell_connecting",
    "connecting_profile",
    "extremal_density_connecting",
    "module_connecting",
    "surface_jacobian",
    "ell_separating",
    "separating_profile",
    "extremal_density_separating",
    "module_separating",
    "sphere_area",
    "closed_form_reference",
    "build_scenario",
    "SCENARIOS",
    "twist_inequality",
]

ELL_TOL = 1e-11


class DegenerateParametrizationError(ArithmeticError):
    """The weight ``I = J_u J_f`` vanished or the Jacobian became singular."""


class ConfigurationError(ValueError):
    """A computation needs data (an inverse map, say) that was not supplied."""


@dataclass(frozen=True)
class Condenser:
    """Embedding ``u: D x [a, b] -> R^n`` of a condenser.

    ``J_u`` is the volume density of ``u`` with respect to ``weight(x) dx dt``;
    ``u_inverse`` (optional) maps points back to ``(x, t)``.
    """

    n: int
    base_box: tuple
    a: float
    b: float
    embed: Callable
    J_u: Callable
    weight: Callable = None
    u_inverse: Callable | None = None
    name: str = "condenser"

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError(f"condenser needs a < b, got [{self.a}, {self.b}]")
        if len(self.base_box) != self.n - 1:
            raise ValueError("base box must have n-1 parameter ranges")
        if self.weight is None:
            object.__setattr__(self, "weight", lambda x: np.ones(np.shape(x)[0]))

    def base_measure(self, tol: float = 1e-12) -> float:
        return _integrate_box(lambda x: self.weight(x[None, :])[0], self.base_box, tol)


@dataclass(frozen=True)
class CondenserMap:
    """Smooth orientation-preserving map ``f`` of the condenser.

    ``J_f`` defaults to one (volume preserving maps are all that the
    registered scenarios need); ``velocity(x, t)``, if given, returns
    ``d/dt f(u(x, t))`` analytically, otherwise a central difference is used.
    """

    f: Callable
    J_f: Callable | None = None
    f_inverse: Callable | None = None
    velocity: Callable | None = None
    name: str = "map"

    def jacobian_det(self, y) -> np.ndarray:
        if self.J_f is None:
            return np.ones(np.shape(y)[0])
        return np.asarray(self.J_f(y), dtype=float)


@dataclass(frozen=True)
class RodinProfile:
    """Length profile ``ell`` of a fibration together with its exponents."""

    ell: Callable[[object], float]
    p: float
    q: float = field(init=False)

    def __post_init__(self):
        if not self.p > 1:
            raise ValueError("p must exceed 1")
        object.__setattr__(self, "q", self.p / (self.p - 1))


def _integrate_box(func, box, tol):
    """Nested adaptive quadrature of scalar ``func(x)`` over a parameter box."""
    box = list(box)
    if not box:
        return float(func(np.zeros(0)))

    def level(prefix, k):
        lo, hi = box[k]
        if k == len(box) - 1:
            return integrate_1d(lambda s: func(np.array(prefix + [s])), lo, hi,
                                tol, rtol=tol).value
        return integrate_1d(lambda s: level(prefix + [s], k + 1), lo, hi,
                            tol, rtol=tol).value

    return level([], 0)


# --------------------------------------------------------------------------
# geometry of the fibres


def _composite(cond: Condenser, fmap: CondenserMap, x, t):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    t = np.atleast_1d(np.asarray(t, dtype=float))
    x = np.broadcast_to(x, (t.shape[0], x.shape[1])) if x.shape[0] == 1 else x
    return fmap.f(cond.embed(x, t))


def _velocity(cond, fmap, x, t):
    if fmap.velocity is not None:
        x = np.broadcast_to(np.atleast_2d(x), (np.size(t), cond.n - 1))
        return np.asarray(fmap.velocity(x, np.atleast_1d(t)), dtype=float)
    # five-point stencil: truncation O(h^4) and roundoff eps/h both near 1e-13
    h = (cond.b - cond.a) * 1e-3
    t = np.atleast_1d(np.asarray(t, dtype=float))
    F = lambda s: _composite(cond, fmap, x, t + s)
    return (8 * (F(h) - F(-h)) - (F(2 * h) - F(-2 * h))) / (12 * h)


def _weight_I(cond, fmap, x, t):
    x2 = np.broadcast_to(np.atleast_2d(x), (np.size(t), cond.n - 1))
    t1 = np.atleast_1d(t)
    ju = np.asarray(cond.J_u(x2, t1), dtype=float)
    jf = fmap.jacobian_det(cond.embed(x2, t1))
    I = ju * jf
    if np.any(~(I > 0)):
        raise DegenerateParametrizationError("I_f = J_u J_f is not positive")
    return I


def ell_connecting(cond: Condenser, fmap: CondenserMap, x, p: float) -> float:
    """``ell(x) = int_a^b (|c_x'| / I)^q I dt`` for the image of fibre ``x``."""
    if not p > 1:
        raise ValueError("p must exceed 1")
    q = p / (p - 1)
    xv = np.atleast_1d(np.asarray(x, dtype=float))

    def integrand(t):
        speed = np.linalg.norm(_velocity(cond, fmap, xv, t), axis=-1)
        I = _weight_I(cond, fmap, xv, t)
        return (speed / I) ** q * I

    return integrate_1d(integrand, cond.a, cond.b, ELL_TOL, rtol=ELL_TOL,
                        vectorized=True).value


def connecting_profile(cond, fmap, p) -> RodinProfile:
    return RodinProfile(lambda x: ell_connecting(cond, fmap, x, p), p)


def module_connecting(cond: Condenser, fmap: CondenserMap, p: float,
                      tol: float = 1e-11, scenario: str | None = None,
                      params: dict | None = None) -> ModuleEstimate:
    """p-module of the image fibre family, ``int_D ell^(1-p) dH``.

    If ``scenario`` names a registered closed form, that value is attached to
    ``details`` together with the relative discrepancy.
    """
    def outer(x):
        return ell_connecting(cond, fmap, x, p) ** (1 - p) * cond.weight(x[None, :])[0]

    val = _integrate_box(outer, cond.base_box, tol)
    details = {}
    if scenario is not None:
        ref = closed_form_reference(scenario, params or {})
        details = {"closed_form": ref.value,
                   "rel_diff": abs(val - ref.value) / abs(ref.value)}
    return ModuleEstimate(val, "quadrature", tol * max(1.0, abs(val)), p, details)


@dataclass(frozen=True)
class ConnectingExtremal:
    """Extremal density of the fibre family.

    ``in_coordinates(x, t)`` evaluates it at ``f(u(x, t))``; ``field`` is an
    ambient :class:`DensityField` when both inverses are available.
    """

    cond: Condenser
    fmap: CondenserMap
    p: float
    field: DensityField | None

    def in_coordinates(self, x, t) -> np.ndarray:
        return _rho0_connecting(self.cond, self.fmap, self.p, x, t, None)

    def __call__(self, y) -> np.ndarray:
        if self.field is None:
            raise ConfigurationError("ambient evaluation needs inverses of u and f; "
                                     "use in_coordinates instead")
        return self.field(y)


def _rho0_connecting(cond, fmap, p, x, t, ell_cache):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    t = np.atleast_1d(np.asarray(t, dtype=float))
    x = np.broadcast_to(x, (t.shape[0], cond.n - 1))
    ell = np.array([ell_cache(tuple(row)) if ell_cache else ell_connecting(cond, fmap, row, p)
                    for row in x])
    speed = np.array([np.linalg.norm(_velocity(cond, fmap, row, [ti]), axis=-1)[0]
                      for row, ti in zip(x, t)])
    I = _weight_I(cond, fmap, x, t)
    return (speed / I) ** (1.0 / (p - 1)) / ell


def extremal_density_connecting(cond: Condenser, fmap: CondenserMap, p: float,
                                support=None) -> ConnectingExtremal:
    """``rho0 = ell(x)^-1 (|c_x'| / I)^(1/(p-1))`` pushed forward by ``f``."""
    field_ = None
    if cond.u_inverse is not None and fmap.f_inverse is not None:
        @lru_cache(maxsize=4096)
        def ell_cached(key):
            return ell_connecting(cond, fmap, np.array(key), p)

        def func(y):
            y = np.asarray(y, dtype=float)
            shape = y.shape[:-1]
            flat = y.reshape(-1, cond.n)
            x, t = cond.u_inverse(fmap.f_inverse(flat))
            keyed = np.round(x, 11)
            return _rho0_connecting(cond, fmap, p, keyed, t, ell_cached).reshape(shape)

        if support is None:
            support = (tuple([-np.inf] * cond.n), tuple([np.inf] * cond.n))
        field_ = DensityField(func, support, p)
    return ConnectingExtremal(cond, fmap, p, field_)


# --------------------------------------------------------------------------
# separating slices


def _composite_jacobian(cond, fmap, x, t, h=None):
    """Jacobian of ``(x, t) -> f(u(x, t))``, columns ordered ``(x_1.., t)``."""
    z0 = np.concatenate([np.atleast_1d(np.asarray(x, dtype=float)), [float(t)]])
    n = cond.n
    J = np.empty((n, n))
    for j in range(n):
        step = (np.finfo(float).eps ** (1 / 3)) * max(1.0, abs(z0[j])) if h is None else h
        zp, zm = z0.copy(), z0.copy()
        zp[j] += step
        zm[j] -= step
        fp = _composite(cond, fmap, zp[None, :-1], zp[-1:])[0]
        fm = _composite(cond, fmap, zm[None, :-1], zm[-1:])[0]
        J[:, j] = (fp - fm) / (2 * step)
    return J


def surface_jacobian(cond: Condenser, fmap: CondenserMap, x, t) -> float:
    """``|grad (t o f^-1)| * I`` at ``f(u(x, t))``.

    The gradient is the last row of the inverse Jacobian of ``f o u``, so
    ``f^-1`` is never differentiated.
    """
    J = _composite_jacobian(cond, fmap, x, t)
    if abs(np.linalg.det(J)) < 1e-300 or np.linalg.cond(J) > 1e13:
        raise DegenerateParametrizationError(f"singular Jacobian at x={x}, t={t}")
    grad_t = np.linalg.solve(J.T, np.eye(cond.n)[-1])
    return float(np.linalg.norm(grad_t) * _weight_I(cond, fmap, x, [t])[0])


def _grad_t_norm(cond, fmap, x, t):
    J = _composite_jacobian(cond, fmap, x, t)
    try:
        grad_t = np.linalg.solve(J.T, np.eye(cond.n)[-1])
    except np.linalg.LinAlgError as exc:
        raise DegenerateParametrizationError(f"singular Jacobian at x={x}, t={t}") from exc
    return float(np.linalg.norm(grad_t))


def ell_separating(cond: Condenser, fmap: CondenserMap, t: float, p: float,
                   tol: float = 1e-11) -> float:
    """``ell(t) = int_D |grad t|^p I dH`` over the slice ``sigma_t``."""
    if not cond.a <= t <= cond.b:
        raise ValueError(f"t={t} outside [{cond.a}, {cond.b}]")
    if not p > 1:
        raise ValueError("p must exceed 1")

    def integrand(x):
        g = _grad_t_norm(cond, fmap, x, t)
        I = _weight_I(cond, fmap, x, [t])[0]
        return g ** p * I * cond.weight(x[None, :])[0]

    return _integrate_box(integrand, cond.base_box, tol)


def separating_profile(cond, fmap, q) -> RodinProfile:
    p = q / (q - 1)
    return RodinProfile(lambda t: ell_separating(cond, fmap, t, p), p)


def module_separating(cond: Condenser, fmap: CondenserMap, q: float,
                      tol: float = 1e-10) -> ModuleEstimate:
    """q-module of the image slice family, ``int_a^b ell(t)^(1-q) dt``."""
    if not q > 1:
        raise ValueError("q must exceed 1")
    p = q / (q - 1)
    val = integrate_1d(lambda t: ell_separating(cond, fmap, t, p, tol / 10) ** (1 - q),
                       cond.a, cond.b, tol, rtol=tol).value
    return ModuleEstimate(val, "quadrature", tol * max(1.0, val), q)


@dataclass(frozen=True)
class SeparatingExtremal:
    cond: Condenser
    fmap: CondenserMap
    q: float

    def in_coordinates(self, x, t) -> float:
        """``rho0 = |grad t|^(1/(q-1)) / ell(t)`` at ``f(u(x, t))``."""
        p = self.q / (self.q - 1)
        g = _grad_t_norm(self.cond, self.fmap, x, t)
        return g ** (1.0 / (self.q - 1)) / ell_separating(self.cond, self.fmap, t, p)

    def slice_integral(self, t: float) -> float:
        """Integral of ``rho0`` over the image slice; one for an extremal density."""
        def integrand(x):
            g = _grad_t_norm(self.cond, self.fmap, x, t)
            I = _weight_I(self.cond, self.fmap, x, [t])[0]
            return self.in_coordinates(x, t) * g * I * self.cond.weight(x[None, :])[0]
        return _integrate_box(integrand, self.cond.base_box, 1e-10)


def extremal_density_separating(cond, fmap, q) -> SeparatingExtremal:
    return SeparatingExtremal(cond, fmap, q)


# --------------------------------------------------------------------------
# registered condensers and maps


def cylinder(base_box, a: float, b: float) -> Condenser:
    """Straight cylinder ``D x [a, b]`` with ``D`` a box in R^(n-1)."""
    base_box = tuple(tuple(map(float, r)) for r in base_box)
    n = len(base_box) + 1

    def embed(x, t):
        return np.column_stack([x, t])

    def inv(y):
        return y[:, :-1], y[:, -1]

    return Condenser(n, base_box, a, b, embed, lambda x, t: np.ones(np.shape(t)),
                     u_inverse=inv, name="cylinder")


def _sphere_embed(angles, t):
    """Spherical coordinates: ``x1 = t sin th1 sin th2 ..., x2 = t cos th1 sin th2 ...``."""
    angles = np.asarray(angles, dtype=float)
    m, k = angles.shape
    n = k + 1
    out = np.empty((m, n))
    # tail[j] = prod_{i>=j} sin(theta_i) for 0-based angle index j
    sins = np.sin(angles)
    tail = np.ones((m, k + 1))
    for j in range(k - 1, -1, -1):
        tail[:, j] = tail[:, j + 1] * sins[:, j]
    out[:, 0] = t * np.sin(angles[:, 0]) * tail[:, 1]
    out[:, 1] = t * np.cos(angles[:, 0]) * tail[:, 1]
    for i in range(2, n):
        out[:, i] = t * np.cos(angles[:, i - 1]) * tail[:, i]
    return out


def _sphere_inverse(y):
    y = np.asarray(y, dtype=float)
    m, n = y.shape
    t = np.linalg.norm(y, axis=1)
    angles = np.empty((m, n - 1))
    for k in range(n, 2, -1):
        rk = np.linalg.norm(y[:, :k], axis=1)
        angles[:, k - 2] = np.arccos(np.clip(y[:, k - 1] / np.where(rk > 0, rk, 1.0), -1, 1))
    angles[:, 0] = np.mod(np.arctan2(y[:, 0], y[:, 1]), 2 * math.pi)
    return angles, t


def _sphere_weight(angles):
    angles = np.asarray(angles, dtype=float)
    w = np.ones(angles.shape[0])
    for j in range(1, angles.shape[1]):
        w = w * np.sin(angles[:, j]) ** j
    return w


def spherical_ring(n: int, a: float, b: float) -> Condenser:
    """Ring ``a <= |y| <= b`` in R^n, fibred by radial segments."""
    if n < 2:
        raise ValueError("spherical ring needs n >= 2")
    box = ((0.0, 2 * math.pi),) + ((0.0, math.pi),) * (n - 2)
    return Condenser(n, box, a, b, _sphere_embed,
                     lambda x, t: np.asarray(t, dtype=float) ** (n - 1),
                     weight=_sphere_weight, u_inverse=_sphere_inverse,
                     name=f"spherical_ring(n={n})")


def conical_cylinder(base_box, a: float, b: float, beta: float) -> Condenser:
    """Cone ``{(beta t x, t)}`` over a base box; fibres are rays through 0."""
    base_box = tuple(tuple(map(float, r)) for r in base_box)
    n = len(base_box) + 1
    if not (beta > 0 and a > 0):
        raise ValueError("conical cylinder needs beta > 0 and a > 0")

    def embed(x, t):
        t = np.asarray(t, dtype=float)
        return np.column_stack([beta * t[:, None] * x, t])

    def inv(y):
        t = y[:, -1]
        return y[:, :-1] / (beta * t[:, None]), t

    return Condenser(n, base_box, a, b, embed,
                     lambda x, t: (beta * np.asarray(t, dtype=float)) ** (n - 1),
                     u_inverse=inv, name="conical_cylinder")


def identity_map() -> CondenserMap:
    return CondenserMap(lambda y: np.asarray(y, dtype=float), f_inverse=lambda y: y,
                        name="identity")


def shear_map(beta: float) -> CondenserMap:
    """``(x_1, ..., x_{n-1}, t) -> (x_1 + beta t, x_2, ..., t)``."""
    def f(y):
        y = np.array(y, dtype=float)
        y[:, 0] += beta * y[:, -1]
        return y

    def finv(y):
        y = np.array(y, dtype=float)
        y[:, 0] -= beta * y[:, -1]
        return y

    return CondenserMap(f, f_inverse=finv, name=f"shear(beta={beta})")


def sphere_twist_map(angle_of_radius: Callable, name: str = "twist") -> CondenserMap:
    """Rotate the sphere of radius ``s`` in the (y1, y2) plane by ``angle_of_radius(s)``.

    In the spherical coordinates of :func:`spherical_ring` this is
    ``theta_1 -> theta_1 + angle_of_radius(t)``; it preserves volume.
    """
    def rotate(y, sign):
        y = np.array(y, dtype=float)
        s = sign * angle_of_radius(np.linalg.norm(y, axis=1))
        c, sn = np.cos(s), np.sin(s)
        y1 = y[:, 0] * c + y[:, 1] * sn
        y2 = y[:, 1] * c - y[:, 0] * sn
        y[:, 0], y[:, 1] = y1, y2
        return y

    return CondenserMap(lambda y: rotate(y, 1.0), f_inverse=lambda y: rotate(y, -1.0),
                        name=name)


def sphere_area(n: int) -> float:
    """Surface measure of the unit sphere in R^n."""
    return 2 * math.pi ** (n / 2) / gamma_fn(n / 2)


def _base_measure_of_box(box):
    return math.prod(hi - lo for lo, hi in box)


def _box_from_params(params, n):
    width = float(params.get("width", 1.0))
    return tuple((0.0, width) for _ in range(n - 1))


def build_scenario(name: str, params: dict):
    """``(condenser, map)`` for a registered scenario.

    Parameters (all optional): ``n`` dimension, ``a``, ``b`` (``r`` for the
    shear cylinder on ``[0, r]``), ``beta``, ``width`` of the base box.
    """
    n = int(params.get("n", 2))
    if name == "cylinder":
        cond = cylinder(_box_from_params(params, n), params.get("a", 0.0), params.get("b", 1.0))
        return cond, identity_map()
    if name == "shear_cylinder":
        cond = cylinder(_box_from_params(params, n), 0.0, params.get("r", 1.0))
        return cond, shear_map(params.get("beta", 1.0))
    if name == "spherical_ring":
        return spherical_ring(n, params.get("a", 1.0), params.get("b", math.e)), identity_map()
    if name == "sphere_twist":
        return (spherical_ring(n, 1.0, params.get("r", 2.0)),
                sphere_twist_map(lambda s: s - 1.0, "sphere_twist"))
    if name == "sphere_log_twist":
        beta = params.get("beta", 1.0)
        return (spherical_ring(n, 1.0, params.get("r", math.e)),
                sphere_twist_map(lambda s: beta * np.log(s), f"sphere_log_twist(beta={beta})"))
    if name == "conical_cylinder":
        return (conical_cylinder(_box_from_params(params, n), params.get("a", 1.0),
                                 params.get("b", 2.0), params.get("beta", 1.0)),
                identity_map())
    raise KeyError(f"unknown condenser scenario {name!r}; known: {sorted(SCENARIOS)}")


SCENARIOS = ("cylinder", "shear_cylinder", "spherical_ring", "sphere_twist",
             "sphere_log_twist", "conical_cylinder")


def _ring_closed_form(p, n, a, b):
    if abs(p - n) < 1e-12:
        return math.log(b / a) ** (1 - n) * sphere_area(n)
    e = (p - n) / (p - 1)
    return (abs(p - n) / (p - 1)) ** (p - 1) * abs(b ** e - a ** e) ** (1 - p) * sphere_area(n)


def closed_form_reference(scenario: str, params: dict) -> ModuleEstimate:
    """Exact p-module of the fibre family for a registered scenario.

    ``sphere_twist`` has no elementary antiderivative; its length constant
    ``K = int_1^r (1+t^2)^(q/2) t^((n-1)(1-q)) dt`` is computed by quadrature.
    The speed ``sqrt(1+t^2)`` behind that constant, and the constant speed
    ``sqrt(1+beta^2)`` of the logarithmic twist, are exact only for n = 2
    (in higher dimension the rotation radius shrinks toward the axis), so
    both twist references require ``n = 2``.
    """
    p = float(params.get("p", 2.0))
    n = int(params.get("n", 2))
    if scenario == "cylinder":
        box = _box_from_params(params, n)
        a, b = params.get("a", 0.0), params.get("b", 1.0)
        val = _base_measure_of_box(box) / (b - a) ** (p - 1)
    elif scenario == "shear_cylinder":
        box = _box_from_params(params, n)
        beta, r = params.get("beta", 1.0), params.get("r", 1.0)
        val = _base_measure_of_box(box) / ((1 + beta ** 2) ** (p / 2) * r ** (p - 1))
    elif scenario == "spherical_ring":
        val = _ring_closed_form(p, n, params.get("a", 1.0), params.get("b", math.e))
    elif scenario in ("sphere_twist", "sphere_log_twist"):
        if n != 2:
            raise ValueError(f"{scenario} closed form holds only for n = 2")
        r = params.get("r", 2.0 if scenario == "sphere_twist" else math.e)
        q = p / (p - 1)
        if scenario == "sphere_twist":
            K = integrate_1d(lambda t: (1 + t * t) ** (q / 2) * t ** ((n - 1) * (1 - q)),
                             1.0, r, 1e-13, rtol=1e-13).value
            val = K ** (1 - p) * sphere_area(n)
        else:
            beta = params.get("beta", 1.0)
            val = _ring_closed_form(p, n, 1.0, r) / (1 + beta ** 2) ** (p / 2)
    else:
        raise KeyError(f"no closed form registered for {scenario!r}")
    return ModuleEstimate(val, "closed_form", 0.0, p)


def twist_inequality(p: float, n: int, r: float, *, corrected: bool = True):
    """Both sides of the length inequality implied by the radial twist.

    Returns ``(lhs, rhs)`` with ``lhs = int_1^r (1+t^2)^(p/(2(p-1))) t^((n-1)/(1-p)) dt``
    and ``rhs`` the untwisted length ``int_1^r t^((n-1)/(1-p)) dt`` (``log r``
    when ``p = n``).  With ``corrected=False`` the right side is taken with an
    absolute value in the denominator, which makes it negative for ``p < n``.
    """
    if abs(p - n) < 1e-12:
        lhs = integrate_1d(lambda t: (1 + t * t) ** (n / (2 * (n - 1))) / t, 1.0, r,
                           1e-12).value
        return lhs, math.log(r)
    lhs = integrate_1d(lambda t: (1 + t * t) ** (p / (2 * (p - 1))) * t ** ((n - 1) / (1 - p)),
                       1.0, r, 1e-12).value
    e = (p - n) / (p - 1)
    denom = (p - n) if corrected else abs(p - n)
    return lhs, (p - 1) / denom * (r ** e - 1)
