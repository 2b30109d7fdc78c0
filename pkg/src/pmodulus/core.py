"""Module primitives shared by the rest of the package.

A *density* is a nonnegative Borel function ``rho`` together with the exponent
``p`` of the energy it is measured in.  The p-module of a curve family is the
infimum of ``energy(rho, p)`` over densities whose integral along every curve
is at least one; the helpers here evaluate energies, line integrals, and
sample-based admissibility and extremality certificates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .numerics import QuadratureError, integrate_1d, integrate_2d

__all__ = [
    "DivergentEnergyError",
    "InvalidCurveError",
    "DensityField",
    "Polyline",
    "ParametricCurve",
    "CurveFamilySampler",
    "ModuleEstimate",
    "Region",
    "rectangle",
    "annulus",
    "energy",
    "curve_integral",
    "line_integral",
    "grid_segment_lengths",
    "AdmissibilityReport",
    "PerturbationResult",
    "ExtremalityReport",
    "check_admissible",
    "check_extremality",
]

GAUSS8_NODES, GAUSS8_WEIGHTS = np.polynomial.legendre.leggauss(8)


class DivergentEnergyError(QuadratureError):
    """The energy integral did not settle, typically a non-integrable singularity."""


class InvalidCurveError(ValueError):
    """A curve was empty, degenerate, or otherwise unusable."""


# --------------------------------------------------------------------------
# densities


@dataclass(frozen=True)
class DensityField:
    """Nonnegative density ``rho`` with its energy exponent ``p``.

    ``func`` maps an ``(..., n)`` array of points to an ``(...)`` array of
    values.  ``support`` is ``(lower_corner, upper_corner)``.  Grid densities
    are piecewise constant on square cells and carry ``grid`` metadata
    ``(origin, h, values)`` so line integrals can be computed cell-exactly.
    """

    func: Callable[[np.ndarray], np.ndarray]
    support: tuple
    exponent_p: float
    kind: str = "closed_form"
    grid: tuple | None = None

    def __post_init__(self):
        if not self.exponent_p > 1:
            raise ValueError(f"exponent p must exceed 1, got {self.exponent_p}")
        if self.kind not in ("closed_form", "grid"):
            raise ValueError(f"unknown density kind {self.kind!r}")

    def __call__(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        vals = np.asarray(self.func(pts), dtype=float)
        if np.any(vals < 0):
            raise ValueError("density evaluated to a negative value")
        return vals

    eval = __call__

    def scaled(self, c: float) -> "DensityField":
        if c < 0:
            raise ValueError("densities can only be scaled by c >= 0")
        grid = None
        if self.grid is not None:
            origin, h, values = self.grid
            grid = (origin, h, c * values)
        return DensityField(lambda x, f=self.func: c * f(x), self.support,
                            self.exponent_p, self.kind, grid)

    @classmethod
    def constant(cls, value: float, support, p: float = 2.0) -> "DensityField":
        if value < 0:
            raise ValueError("constant density must be >= 0")
        return cls(lambda x: np.full(np.shape(x)[:-1], float(value)), _box(support), p)

    @classmethod
    def from_function(cls, func, support, p: float = 2.0) -> "DensityField":
        return cls(func, _box(support), p)

    @classmethod
    def from_grid(cls, values, origin, h: float, p: float = 2.0) -> "DensityField":
        """Piecewise-constant density; ``values[i, j]`` lives on cell
        ``[x0 + i h, x0 + (i+1) h) x [y0 + j h, y0 + (j+1) h)``."""
        vals = np.array(values, dtype=float)
        if vals.ndim != 2:
            raise ValueError("grid densities are two-dimensional")
        if np.any(vals < 0):
            raise ValueError("grid density has negative cells")
        x0, y0 = map(float, origin)
        nx, ny = vals.shape

        def func(pts):
            pts = np.asarray(pts, dtype=float)
            i = np.floor((pts[..., 0] - x0) / h).astype(int)
            j = np.floor((pts[..., 1] - y0) / h).astype(int)
            inside = (i >= 0) & (i < nx) & (j >= 0) & (j < ny)
            out = np.zeros(pts.shape[:-1])
            out[inside] = vals[i[inside], j[inside]]
            return out

        support = ((x0, y0), (x0 + nx * h, y0 + ny * h))
        return cls(func, support, p, "grid", ((x0, y0), float(h), vals))


def _box(support):
    lo, hi = support
    return (tuple(map(float, np.atleast_1d(lo))), tuple(map(float, np.atleast_1d(hi))))


# --------------------------------------------------------------------------
# curves


@dataclass(frozen=True)
class Polyline:
    vertices: np.ndarray

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[0] < 2:
            raise InvalidCurveError("a polyline needs at least two vertices")
        seg = np.linalg.norm(np.diff(v, axis=0), axis=1)
        if np.any(seg == 0):
            raise InvalidCurveError("consecutive polyline vertices coincide")
        object.__setattr__(self, "vertices", v)

    @property
    def segment_lengths(self) -> np.ndarray:
        return np.linalg.norm(np.diff(self.vertices, axis=0), axis=1)

    @property
    def length(self) -> float:
        return float(math.fsum(self.segment_lengths))

    @property
    def dimension(self) -> int:
        return self.vertices.shape[1]

    def concat(self, other: "Polyline") -> "Polyline":
        if not np.allclose(self.vertices[-1], other.vertices[0], rtol=0, atol=1e-14):
            raise InvalidCurveError("polylines do not share an endpoint")
        return Polyline(np.vstack([self.vertices, other.vertices[1:]]))

    @classmethod
    def segment(cls, start, end) -> "Polyline":
        return cls(np.array([start, end], dtype=float))


@dataclass(frozen=True)
class ParametricCurve:
    """Smooth curve ``c: [t0, t1] -> R^n`` with speed ``|c'(t)|``.

    ``speed`` may be omitted, in which case it is taken from a central
    difference of ``c``.
    """

    c: Callable[[np.ndarray], np.ndarray]
    t0: float
    t1: float
    speed: Callable[[np.ndarray], np.ndarray] | None = None
    breakpoints: tuple = ()

    def __post_init__(self):
        if not self.t0 < self.t1:
            raise InvalidCurveError("parametric curve needs t0 < t1")

    def points(self, t) -> np.ndarray:
        return np.asarray(self.c(np.asarray(t, dtype=float)), dtype=float)

    def speeds(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.speed is not None:
            return np.asarray(self.speed(t), dtype=float)
        h = (self.t1 - self.t0) * 1e-6
        d = (self.points(t + h) - self.points(t - h)) / (2 * h)
        return np.linalg.norm(d, axis=-1)


def grid_segment_lengths(start, end, origin, h: float, shape):
    """Cells crossed by the segment ``start -> end`` and the length inside each.

    Returns ``(i, j, lengths)`` for the cells of a grid with lower-left corner
    ``origin`` and spacing ``h``; cells outside ``shape`` are dropped.
    """
    p0 = np.asarray(start, dtype=float)
    p1 = np.asarray(end, dtype=float)
    d = p1 - p0
    length = float(np.hypot(*d))
    if length == 0:
        return np.zeros(0, int), np.zeros(0, int), np.zeros(0)
    x0, y0 = origin
    ts = [np.array([0.0, 1.0])]
    for axis, o in ((0, x0), (1, y0)):
        if d[axis] != 0:
            a, b = sorted(((p0[axis] - o) / h, (p1[axis] - o) / h))
            lines = np.arange(math.ceil(a), math.floor(b) + 1)
            ts.append((o + lines * h - p0[axis]) / d[axis])
    t = np.unique(np.clip(np.concatenate(ts), 0.0, 1.0))
    mid = 0.5 * (t[:-1] + t[1:])
    dt = np.diff(t)
    keep = dt > 0
    pts = p0 + mid[keep, None] * d
    i = np.floor((pts[:, 0] - x0) / h).astype(int)
    j = np.floor((pts[:, 1] - y0) / h).astype(int)
    inside = (i >= 0) & (i < shape[0]) & (j >= 0) & (j < shape[1])
    return i[inside], j[inside], dt[keep][inside] * length


def _segment_gauss(func, a, b, pieces):
    """Composite 8-point Gauss-Legendre of ``func`` along segment a->b."""
    d = b - a
    seg_len = float(np.linalg.norm(d))
    edges = np.linspace(0.0, 1.0, pieces + 1)
    half = 0.5 * np.diff(edges)
    mids = 0.5 * (edges[:-1] + edges[1:])
    s = (mids[:, None] + half[:, None] * GAUSS8_NODES[None, :]).ravel()
    pts = a + s[:, None] * d
    vals = np.asarray(func(pts), dtype=float).reshape(pieces, 8)
    w = half[:, None] * GAUSS8_WEIGHTS[None, :]
    return seg_len * float(np.sum(w * vals)), seg_len * float(np.sum(w * np.abs(vals)))


def line_integral(func, curve, *, rtol: float = 1e-10, max_halvings: int = 16) -> float:
    """``int_curve func ds`` for a signed or nonnegative point function."""
    if isinstance(curve, ParametricCurve):
        def integrand(t):
            return np.asarray(func(curve.points(t)), dtype=float) * curve.speeds(t)
        return integrate_1d(integrand, curve.t0, curve.t1, 1e-12, rtol=rtol,
                            vectorized=True, breakpoints=curve.breakpoints).value
    if not isinstance(curve, Polyline):
        raise InvalidCurveError(f"cannot integrate along {type(curve).__name__}")
    total = []
    for a, b in zip(curve.vertices[:-1], curve.vertices[1:]):
        pieces = 1
        prev, _ = _segment_gauss(func, a, b, pieces)
        for _ in range(max_halvings):
            pieces *= 2
            cur, mass = _segment_gauss(func, a, b, pieces)
            # the floor on |f| keeps cancelling integrands from stalling
            if abs(cur - prev) <= rtol * max(abs(cur), 1e-3 * mass, 1e-300) or cur == prev:
                prev = cur
                break
            prev = cur
        else:
            raise QuadratureError("segment integral did not settle under halving",
                                  value=prev)
        total.append(prev)
    return math.fsum(total)


def curve_integral(rho: DensityField, gamma) -> float:
    """``int_gamma rho ds``; grid densities are integrated cell-exactly."""
    if gamma is None:
        raise InvalidCurveError("empty curve")
    if rho.kind == "grid" and isinstance(gamma, Polyline):
        origin, h, values = rho.grid
        parts = []
        for a, b in zip(gamma.vertices[:-1], gamma.vertices[1:]):
            i, j, w = grid_segment_lengths(a, b, origin, h, values.shape)
            parts.append(float(np.dot(values[i, j], w)))
        return math.fsum(parts)
    return line_integral(rho, gamma)


# --------------------------------------------------------------------------
# regions and energies


@dataclass(frozen=True)
class Region:
    """Bounded planar region given as the image of a parameter rectangle.

    ``embed(u, v)`` returns points of shape ``(..., 2)`` and ``weight(u, v)``
    the area element, so ``int_region F dm = int int F(embed) weight du dv``.
    """

    param_rect: tuple
    embed: Callable
    weight: Callable
    name: str = "region"

    def integrate(self, func, tol: float = 1e-10) -> float:
        a, b, c, d = self.param_rect

        def integrand(u, v):
            u_arr = np.full_like(v, u)
            pts = self.embed(u_arr, v)
            return np.asarray(func(pts), dtype=float) * self.weight(u_arr, v)

        return integrate_2d(integrand, (a, b, c, d), tol, vectorized=True).value


def rectangle(x0: float, x1: float, y0: float, y1: float) -> Region:
    return Region((x0, x1, y0, y1),
                  lambda u, v: np.stack([u, v], axis=-1),
                  lambda u, v: np.ones_like(v),
                  f"rectangle[{x0},{x1}]x[{y0},{y1}]")


def annulus(r0: float, r1: float, center=(0.0, 0.0)) -> Region:
    """Annulus ``r0 <= |z - center| <= r1`` in polar coordinates ``(theta, r)``."""
    cx, cy = center
    return Region((0.0, 2 * math.pi, r0, r1),
                  lambda th, r: np.stack([cx + r * np.cos(th), cy + r * np.sin(th)], axis=-1),
                  lambda th, r: r,
                  f"annulus[{r0},{r1}]")


def energy(rho: DensityField, p: float | None, domain: Region, tol: float = 1e-10) -> float:
    """``int_domain rho^p dm``; raises DivergentEnergyError if it will not settle."""
    p = rho.exponent_p if p is None else p
    if not p > 1:
        raise ValueError(f"energy exponent must exceed 1, got {p}")
    try:
        return domain.integrate(lambda pts: rho(pts) ** p, tol)
    except QuadratureError as exc:
        raise DivergentEnergyError(f"energy did not converge: {exc}",
                                   value=exc.value, abs_error=exc.abs_error) from exc


@dataclass(frozen=True)
class ModuleEstimate:
    value: float
    method: str
    abs_error: float
    p: float
    details: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.method not in ("closed_form", "quadrature", "oracle"):
            raise ValueError(f"unknown method {self.method!r}")
        if not self.value >= 0:
            raise ValueError(f"module value must be >= 0, got {self.value}")
        if not self.abs_error >= 0:
            raise ValueError("abs_error must be >= 0")

    def __float__(self):
        return float(self.value)


# --------------------------------------------------------------------------
# curve families and certificates


@dataclass(frozen=True)
class CurveFamilySampler:
    """A curve family parametrized by a box of parameters.

    ``sample(param)`` returns a Polyline or ParametricCurve; ``param_box`` is
    a list of ``(lo, hi)`` pairs.  Sampling uses a midpoint grid, so the
    same ``n`` always yields the same curves.
    """

    sample: Callable
    param_box: Sequence[tuple]
    domain: str = ""
    count_hint: int = 64

    def parameters(self, n: int) -> list:
        if n < 1:
            raise ValueError("need at least one sample")
        dim = len(self.param_box)
        per_axis = max(1, math.ceil(n ** (1.0 / dim) - 1e-9))
        axes = []
        for lo, hi in self.param_box:
            axes.append(lo + (np.arange(per_axis) + 0.5) * (hi - lo) / per_axis)
        mesh = np.meshgrid(*axes, indexing="ij")
        flat = np.stack([m.ravel() for m in mesh], axis=-1)[:n]
        return [float(row[0]) if dim == 1 else tuple(map(float, row)) for row in flat]


@dataclass(frozen=True)
class AdmissibilityReport:
    min_integral: float
    admissible: bool
    violating_params: list
    sampled_params: list
    integrals: list


def check_admissible(rho: DensityField, family: CurveFamilySampler,
                     n_samples: int = 64, tol: float = 1e-8) -> AdmissibilityReport:
    """Evaluate ``int_gamma rho`` on sampled curves; admissible iff all >= 1 - tol."""
    params = family.parameters(n_samples)
    vals = [curve_integral(rho, family.sample(prm)) for prm in params]
    bad = [prm for prm, v in zip(params, vals) if v < 1 - tol]
    return AdmissibilityReport(min(vals), not bad, bad, params, vals)


@dataclass(frozen=True)
class PerturbationResult:
    name: str
    curve_min: float
    skipped: bool
    weighted_integral: float
    passed: bool
    note: str = ""


@dataclass(frozen=True)
class ExtremalityReport:
    results: list

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results if not r.skipped)

    @property
    def any_failed(self) -> bool:
        return any((not r.passed) for r in self.results if not r.skipped)


def check_extremality(rho0: DensityField, family0: CurveFamilySampler,
                      perturbations: Iterable, p: float | None = None, *,
                      region: Region, n_samples: int = 32,
                      tol: float = 1e-8) -> ExtremalityReport:
    """Perturbation test for extremality of ``rho0``.

    Each perturbation ``g`` (a signed point function, optionally given as a
    ``(name, g)`` pair) must have ``int_gamma g >= 0`` on every sampled curve
    of ``family0``; those that do not are skipped.  The remaining ones pass
    when ``int g rho0^(p-1) dm >= -tol``.
    """
    p = rho0.exponent_p if p is None else p
    params = family0.parameters(n_samples)
    curves = [family0.sample(prm) for prm in params]
    out = []
    for k, item in enumerate(perturbations):
        name, g = item if isinstance(item, tuple) else (f"g{k}", item)
        cmin = min(line_integral(g, c) for c in curves)
        if cmin < -tol:
            out.append(PerturbationResult(name, cmin, True, float("nan"), False,
                                          "negative integral along a sampled curve"))
            continue
        w = region.integrate(lambda pts: np.asarray(g(pts)) * rho0(pts) ** (p - 1), 1e-11)
        out.append(PerturbationResult(name, cmin, False, w, w >= -tol))
    return ExtremalityReport(out)
