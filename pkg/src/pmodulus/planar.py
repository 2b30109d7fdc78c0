"""Planar module formulas: Rodin's rectangle formula, directional
dilatations, annulus images, logarithmic spirals and parallelograms.

Maps act on complex arrays.  Wirtinger derivatives come from the real
Jacobian ``[[a, b], [c, d]]`` as ``f_z = ((a+d) + i(c-b))/2`` and
``f_zbar = ((a-d) + i(c+b))/2``; the complex dilatation is ``mu = f_zbar/f_z``
and the directional dilatation in direction ``alpha`` is
``|1 + exp(-2i alpha) mu|^2 / (1 - |mu|^2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import DensityField, ModuleEstimate
from .numerics import integrate_1d

__all__ = [
    "OrientationError",
    "PlanarMapSpec",
    "RingDomainSpec",
    "RingBounds",
    "ParallelogramReport",
    "directional_dilatation",
    "rodin2d_module",
    "rodin2d_extremal",
    "annulus_radial_image_module",
    "annulus_radial_extremal",
    "annulus_circle_image_module",
    "ring_module_bounds",
    "log_spiral_image_module",
    "log_spiral_module_via_rectangle",
    "parallelogram_bounds",
    "parallelogram_rate",
    "shear_max_dilatation",
    "TEST_MAPS",
    "make_map",
]

REGULARITY_FLOOR = 1e-12
TWO_PI = 2 * math.pi


class OrientationError(ValueError):
    """``|mu| >= 1``: the map is not orientation preserving at the point."""


def _fd_step(z):
    return 1e-3 * np.maximum(1.0, np.abs(z))


def _d5(F, z, direction, h):
    return (8 * (F(z + h * direction) - F(z - h * direction))
            - (F(z + 2 * h * direction) - F(z - 2 * h * direction))) / (12 * h)


@dataclass(frozen=True)
class PlanarMapSpec:
    """Orientation-preserving planar map ``f`` acting on complex arrays.

    ``derivatives(z)``, when supplied, returns ``(f_z, f_zbar)`` exactly;
    otherwise both come from five-point differences of ``f``.
    """

    f: Callable[[np.ndarray], np.ndarray]
    name: str = "map"
    derivatives: Callable | None = None
    conformal: bool = False
    params: dict = field(default_factory=dict)

    def __call__(self, z):
        return self.f(np.asarray(z, dtype=complex))

    def wirtinger(self, z):
        z = np.asarray(z, dtype=complex)
        if self.derivatives is not None:
            fz, fzb = self.derivatives(z)
            return np.asarray(fz, dtype=complex), np.asarray(fzb, dtype=complex)
        h = _fd_step(z)
        dx = _d5(self.f, z, 1.0, h)
        dy = _d5(self.f, z, 1j, h)
        # dx = a + i c, dy = b + i d
        return 0.5 * (dx - 1j * dy), 0.5 * (dx + 1j * dy)

    def mu(self, z):
        fz, fzb = self.wirtinger(z)
        mu = fzb / fz
        if np.any(1 - np.abs(mu) ** 2 < REGULARITY_FLOOR):
            raise OrientationError(f"{self.name}: |mu| too close to 1 (irregular point)")
        return mu

    def jacobian(self, z):
        fz, fzb = self.wirtinger(z)
        J = np.abs(fz) ** 2 - np.abs(fzb) ** 2
        if np.any(~(J > 0)):
            raise OrientationError(f"{self.name}: nonpositive Jacobian")
        return J

    def dilatation(self, z, alpha):
        return directional_dilatation(self.mu(z), alpha)


def directional_dilatation(mu, alpha):
    """``|1 + e^{-2 i alpha} mu|^2 / (1 - |mu|^2)``; periodic with period pi."""
    mu = np.asarray(mu, dtype=complex)
    denom = 1 - np.abs(mu) ** 2
    if np.any(denom <= 0):
        raise OrientationError("directional dilatation needs |mu| < 1")
    val = np.abs(1 + np.exp(-2j * np.asarray(alpha, dtype=float)) * mu) ** 2 / denom
    return float(val) if val.ndim == 0 else val


@dataclass(frozen=True)
class RingDomainSpec:
    """Annulus ``1 <= |z| <= b`` together with the map applied to it."""

    b: float
    map: PlanarMapSpec

    def __post_init__(self):
        if not self.b > 1:
            raise ValueError(f"outer radius must exceed 1, got {self.b}")


# --------------------------------------------------------------------------
# rectangle formula


def _rect_partials(F, x, t, hx, ht):
    """``(F_x, F_t)`` by five-point differences; F maps real (x, t) to complex."""
    Fx = (8 * (F(x + hx, t) - F(x - hx, t)) - (F(x + 2 * hx, t) - F(x - 2 * hx, t))) / (12 * hx)
    Ft = (8 * (F(x, t + ht) - F(x, t - ht)) - (F(x, t + 2 * ht) - F(x, t - 2 * ht))) / (12 * ht)
    return Fx, Ft


def _rect_ell_integrand(F, rect, partials):
    x0, x1, t0, t1 = rect
    hx, ht = 1e-3 * (x1 - x0), 1e-3 * (t1 - t0)

    def parts(x, t):
        if partials is not None:
            return partials(x, t)
        return _rect_partials(F, x, t, hx, ht)

    def integrand(x, t):
        Fx, Ft = parts(np.full_like(t, x), t)
        J = Fx.real * Ft.imag - Fx.imag * Ft.real
        if np.any(~(J > 0)):
            raise OrientationError("rectangle map has nonpositive Jacobian")
        return np.abs(Ft) ** 2 / J, np.abs(Ft), J

    return integrand


def rodin2d_module(F: Callable, rect=(0.0, 1.0, 0.0, 1.0), *, partials: Callable | None = None,
                   tol: float = 1e-11) -> ModuleEstimate:
    """2-module of the images of the vertical segments of a rectangle.

    ``F(x, t)`` maps real arrays to complex points; the segments are
    ``t -> (x, t)`` for ``x0 <= x <= x1``, ``t0 <= t <= t1``.  The module is
    ``int ell(x)^-1 dx`` with ``ell(x) = int |F_t|^2 / J dt``.
    """
    x0, x1, t0, t1 = rect
    ig = _rect_ell_integrand(F, rect, partials)

    def ell(x):
        return integrate_1d(lambda t: ig(x, t)[0], t0, t1, tol, rtol=tol,
                            vectorized=True).value

    val = integrate_1d(lambda x: 1.0 / ell(x), x0, x1, tol, rtol=tol).value
    return ModuleEstimate(val, "quadrature", 10 * tol * max(1.0, val), 2.0,
                          {"rect": tuple(rect)})


@dataclass(frozen=True)
class Rodin2DExtremal:
    F: Callable
    rect: tuple
    field: DensityField | None

    def in_coordinates(self, x, t):
        """``rho0(F(x, t)) = |F_t| / (J ell(x))``."""
        ig = _rect_ell_integrand(self.F, self.rect, None)
        t = np.atleast_1d(np.asarray(t, dtype=float))
        ell = integrate_1d(lambda s: ig(x, s)[0], self.rect[2], self.rect[3], 1e-12,
                           vectorized=True).value
        _, speed, J = ig(x, t)
        return speed / J / ell


def rodin2d_extremal(F, rect, inverse: Callable | None = None, support=None) -> Rodin2DExtremal:
    """Extremal density of the rectangle formula; ambient if ``inverse`` is given."""
    field_ = None
    if inverse is not None:
        holder = {}

        def func(pts):
            pts = np.asarray(pts, dtype=float)
            shape = pts.shape[:-1]
            w = (pts[..., 0] + 1j * pts[..., 1]).ravel()
            x, t = inverse(w)
            out = np.empty(w.shape)
            for k, (xk, tk) in enumerate(zip(np.atleast_1d(x), np.atleast_1d(t))):
                out[k] = holder["ex"].in_coordinates(float(xk), [float(tk)])[0]
            return out.reshape(shape)

        if support is None:
            support = ((-np.inf, -np.inf), (np.inf, np.inf))
        field_ = DensityField(func, support, 2.0)
        ex = Rodin2DExtremal(F, tuple(rect), field_)
        holder["ex"] = ex
        return ex
    return Rodin2DExtremal(F, tuple(rect), field_)


# --------------------------------------------------------------------------
# annuli


def _polar(r, theta):
    return r * np.exp(1j * theta)


def annulus_radial_image_module(ring: RingDomainSpec, tol: float = 1e-10) -> ModuleEstimate:
    """2-module of the images of the radial segments:
    ``int_0^{2pi} (int_1^b D_{f,theta} dr / r)^-1 dtheta``."""
    fm = ring.map

    def inner(theta):
        return integrate_1d(lambda r: fm.dilatation(_polar(r, theta), theta) / r,
                            1.0, ring.b, tol / 10, rtol=tol / 10, vectorized=True).value

    val = integrate_1d(lambda th: 1.0 / inner(th), 0.0, TWO_PI, tol, rtol=tol).value
    return ModuleEstimate(val, "quadrature", tol * max(1.0, val), 2.0)


def annulus_radial_extremal(ring: RingDomainSpec):
    """``rho0`` of the radial image family, as a function of ``(r, theta)``:
    ``(D_{f,theta}/r) / (|f_r| int_1^b D_{f,theta} dr/r)``."""
    fm = ring.map

    def rho(r, theta):
        r = np.atleast_1d(np.asarray(r, dtype=float))
        norm = integrate_1d(lambda s: fm.dilatation(_polar(s, theta), theta) / s,
                            1.0, ring.b, 1e-12, vectorized=True).value
        z = _polar(r, theta)
        fz, fzb = fm.wirtinger(z)
        e = np.exp(1j * theta)
        fr = e * (fz + np.exp(-2j * theta) * fzb)
        return fm.dilatation(z, theta) / r / (np.abs(fr) * norm)

    return rho


def annulus_circle_image_module(ring: RingDomainSpec, tol: float = 1e-10) -> ModuleEstimate:
    """2-module of the images of the concentric circles:
    ``int_1^b (int_0^{2pi} D_{f,theta+pi/2} dtheta)^-1 dr / r``."""
    fm = ring.map

    def inner(r):
        return integrate_1d(lambda th: fm.dilatation(_polar(r, th), th + math.pi / 2),
                            0.0, TWO_PI, tol / 10, rtol=tol / 10, vectorized=True).value

    val = integrate_1d(lambda r: 1.0 / (inner(r) * r), 1.0, ring.b, tol, rtol=tol).value
    return ModuleEstimate(val, "quadrature", tol * max(1.0, val), 2.0)


@dataclass(frozen=True)
class RingBounds:
    lower: float
    upper: float
    cauchy_schwarz_upper: float


def ring_module_bounds(ring: RingDomainSpec, tol: float = 1e-10) -> RingBounds:
    """Two-sided bounds on the conformal module of the image ring.

    ``lower`` is the circle-image module, ``upper`` the reciprocal of the
    radial-image module, and the weaker ``(2pi)^-2 int D_{f,theta} / |z|^2 dm``
    is reported alongside.
    """
    lower = annulus_circle_image_module(ring, tol).value
    upper = 1.0 / annulus_radial_image_module(ring, tol).value
    fm = ring.map

    def inner(theta):
        return integrate_1d(lambda r: fm.dilatation(_polar(r, theta), theta) / r,
                            1.0, ring.b, tol / 10, rtol=tol / 10, vectorized=True).value

    cs = integrate_1d(inner, 0.0, TWO_PI, tol, rtol=tol).value / TWO_PI ** 2
    return RingBounds(lower, upper, cs)


def log_spiral_image_module(ring: RingDomainSpec, beta: float, *, tol: float = 1e-10,
                            phase_sign: float = -1.0) -> ModuleEstimate:
    """2-module of the ``f``-images of the logarithmic spirals
    ``r -> r exp(i(theta - beta log r))``:
    ``int_0^{2pi} (int_1^b (1+beta^2) D_{f,theta0} dr / r)^-1 dtheta``
    with ``theta0 = theta - beta log r + phase_sign * arctan(beta)``.

    The default ``phase_sign=-1`` is the value that follows from
    differentiating the spiral; ``+1`` is offered for comparison.
    """
    fm = ring.map
    shift = phase_sign * math.atan(beta)

    def inner(theta):
        def g(r):
            phi = theta - beta * np.log(r)
            return (1 + beta ** 2) * fm.dilatation(_polar(r, phi), phi + shift) / r
        return integrate_1d(g, 1.0, ring.b, tol / 10, rtol=tol / 10, vectorized=True).value

    val = integrate_1d(lambda th: 1.0 / inner(th), 0.0, TWO_PI, tol, rtol=tol).value
    return ModuleEstimate(val, "quadrature", tol * max(1.0, val), 2.0,
                          {"beta": beta, "phase_sign": phase_sign})


def log_spiral_module_via_rectangle(ring: RingDomainSpec, beta: float,
                                    tol: float = 1e-11) -> ModuleEstimate:
    """Same module by the rectangle formula applied to
    ``g(x, r) = f(r exp(i(-x - beta log r)))`` on ``[0, 2pi] x [1, b]``.

    The angle runs as ``theta = -x`` so that ``g`` preserves orientation.
    """
    fm = ring.map

    def G(x, r):
        return fm(_polar(r, -x - beta * np.log(r)))

    return rodin2d_module(G, (0.0, TWO_PI, 1.0, ring.b), tol=tol)


# --------------------------------------------------------------------------
# parallelograms


@dataclass(frozen=True)
class ParallelogramReport:
    slant_module: float
    product: float
    sigma_bound: float
    sigma0_module: float

    @property
    def sigma_bracket(self):
        """Interval that must contain the module of all separating curves."""
        return self.sigma0_module, self.sigma0_module + self.sigma_bound


def parallelogram_bounds(theta: float, h: float) -> ParallelogramReport:
    """Module data of the parallelogram with vertices 0, 1, 1 + h e^{i theta}, h e^{i theta}.

    ``slant_module`` is the 2-module of the segments parallel to the slanted
    sides, ``sigma0_module`` that of the horizontal segments, and
    ``sigma_bound`` bounds how far the full separating module can exceed it.
    """
    if not (0 < theta <= math.pi / 2 + 1e-15):
        raise ValueError(f"theta must lie in (0, pi/2], got {theta}")
    if not h > 0:
        raise ValueError("h must be positive")
    s, c = math.sin(theta), math.cos(theta)
    if theta >= math.pi / 2:
        c = 0.0
    return ParallelogramReport(s / h, s * s, h * c * c / s, h * s)


def parallelogram_rate(eps: float, b: float) -> float:
    """Bound ``eps^2 / b`` on ``|M(P(eps)) - M(Q_1b)|`` for the sheared rectangle."""
    if eps < 0 or not b > 0:
        raise ValueError("need eps >= 0 and b > 0")
    return eps * eps / b


def shear_max_dilatation(theta: float) -> float:
    """Maximal dilatation of ``(x, t) -> (x + t cot theta, t)``."""
    c = 1.0 / math.tan(theta)
    return 1 + 0.5 * c * c + 0.5 * c * math.sqrt(4 + c * c)


# --------------------------------------------------------------------------
# registered test maps


def _identity(**_):
    return PlanarMapSpec(lambda z: z, "identity",
                         lambda z: (np.ones_like(z), np.zeros_like(z)), True)


def _scale(c=2.0, **_):
    c = complex(c)
    return PlanarMapSpec(lambda z: c * z, "scale",
                         lambda z: (np.full_like(z, c), np.zeros_like(z)), True, {"c": c})


def _square(**_):
    return PlanarMapSpec(lambda z: z * z, "square",
                         lambda z: (2 * z, np.zeros_like(z)), True)


def _radial_stretch(kappa=2.0, **_):
    def f(z):
        r = np.abs(z)
        return r ** kappa * np.exp(1j * np.angle(z))

    def der(z):
        # f = z^{(k+1)/2} zbar^{(k-1)/2}
        r = np.abs(z)
        u = z / r
        return (0.5 * (kappa + 1) * r ** (kappa - 1) * np.ones_like(z),
                0.5 * (kappa - 1) * r ** (kappa - 1) * u * u)

    return PlanarMapSpec(f, "radial_stretch", der, kappa == 1.0, {"kappa": kappa})


def _log_spiral(beta=1.0, **_):
    return PlanarMapSpec(lambda z: z * np.exp(-1j * beta * np.log(np.abs(z))),
                         "log_spiral", None, beta == 0.0, {"beta": beta})


def _angular_shear(beta=0.5, **_):
    return PlanarMapSpec(lambda z: z * np.exp(1j * beta * (np.abs(z) - 1.0)),
                         "angular_shear", None, beta == 0.0, {"beta": beta})


def _affine(k=2.0, **_):
    return PlanarMapSpec(lambda z: k * z.real + 1j * z.imag, "affine",
                         lambda z: (np.full_like(z, 0.5 * (k + 1)), np.full_like(z, 0.5 * (k - 1))),
                         k == 1.0, {"k": k})


def _shear(theta=math.pi / 3, **_):
    cot = 1.0 / math.tan(theta)
    return PlanarMapSpec(lambda z: z + cot * z.imag, "shear",
                         lambda z: (np.full_like(z, 1 - 0.5j * cot), np.full_like(z, 0.5j * cot)),
                         False, {"theta": theta})


def _radial_bump(eps=0.3, **_):
    return PlanarMapSpec(lambda z: z * (1 + eps * np.cos(np.angle(z))), "radial_bump",
                         None, eps == 0.0, {"eps": eps})


TEST_MAPS = {
    "identity": _identity,
    "scale": _scale,
    "square": _square,
    "radial_stretch": _radial_stretch,
    "log_spiral": _log_spiral,
    "angular_shear": _angular_shear,
    "affine": _affine,
    "shear": _shear,
    "radial_bump": _radial_bump,
}


def make_map(name: str, **params) -> PlanarMapSpec:
    try:
        return TEST_MAPS[name](**params)
    except KeyError:
        raise KeyError(f"unknown planar map {name!r}; known: {sorted(TEST_MAPS)}") from None


def ring_image_inverse(name: str, b: float, **params):
    """Inverse of a registered map and a radius bounding the image of ``1 < |z| < b``."""
    if name == "identity":
        return (lambda w: w), b
    if name == "scale":
        c = complex(params.get("c", 2.0))
        return (lambda w: w / c), abs(c) * b
    if name == "affine":
        k = float(params.get("k", 2.0))
        return (lambda w: w.real / k + 1j * w.imag), b * max(k, 1.0)
    if name == "angular_shear":
        beta = float(params.get("beta", 0.5))
        return (lambda w: w * np.exp(-1j * beta * (np.abs(w) - 1.0))), b
    if name == "radial_bump":
        eps = float(params.get("eps", 0.3))
        return (lambda w: w / (1 + eps * np.cos(np.angle(w)))), b * (1 + abs(eps))
    if name == "radial_stretch":
        kappa = float(params.get("kappa", 2.0))
        return (lambda w: np.abs(w) ** (1 / kappa) * np.exp(1j * np.angle(w))), b ** kappa
    if name == "log_spiral":
        beta = float(params.get("beta", 1.0))
        return (lambda w: w * np.exp(1j * beta * np.log(np.abs(w)))), b
    raise KeyError(f"no inverse registered for map {name!r}")
