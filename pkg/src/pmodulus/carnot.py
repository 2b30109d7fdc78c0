"""Ring condensers in polarizable Carnot groups.

Three group families are registered:

``euclidean:n``
    R^n with the Euclidean norm; the horizontal frame is the coordinate frame.
``heisenberg``
    Coordinates ``(x1, x2, t)``, frame ``X1 = d/dx1 + 2 x2 d/dt``,
    ``X2 = d/dx2 - 2 x1 d/dt`` and norm ``((x1^2 + x2^2)^2 + t^2)^(1/4)``.
    Unit-sphere points are written ``(sqrt(cos a) cos th, sqrt(cos a) sin th, sin a)``
    and the radial flow has the closed form
    ``x(r) = r sqrt(cos a) exp(i(th - tan a log r))``, ``t(r) = r^2 sin a``.
``htype:k,l``
    H-type group with ``u in R^k``, ``z in R^l``, frame
    ``X_i = d/du_i + 1/2 sum_j <J_j u, e_i> d/dz_j`` and norm
    ``(|u|^4 + 16 |z|^2)^(1/4)``.  ``htype:2,1`` is the Heisenberg group with
    ``t = 4 z``.

For every group ``lambda = ||grad_0 N||`` is the reciprocal speed of the
radial flow, and ``dv`` is the measure on the unit sphere with
``dx = s^(Q-1) ds dv`` along the flow.  In the Heisenberg polar coordinates
``dv = da dth``; for H-type groups ``dv`` is written in ``(a, omega, eta)``
with ``u = sqrt(cos a) omega`` and ``z = sin(a) eta / 4``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import ModuleEstimate
from .numerics import (OdeTrajectory, QuadratureError, gamma_fn, integrate_1d,
                       integrate_2d, solve_ode)

__all__ = [
    "GroupSpec",
    "SpherePoint",
    "RingConstants",
    "RingExtremal",
    "CapacityReport",
    "get_group",
    "homogeneous_norm",
    "horizontal_gradient_norm",
    "norm_gradient_norm",
    "sphere_lambda",
    "radial_flow",
    "horizontal_speed",
    "heisenberg_flow_closed_form",
    "sphere_integral",
    "sphere_area",
    "ring_constants",
    "module_connecting_ring",
    "module_separating_ring",
    "extremal_density_ring",
    "capacity_check",
    "ambient_integral",
    "ring_volume",
    "heisenberg_twist_module",
    "heisenberg_twist_ell",
    "twist_curve",
    "twist_horizontality_residual",
    "twist_extremal_density",
    "twist_density_line_integral",
    "htype_constant_derived",
    "htype_constant_printed",
    "heisenberg_constant",
]

Q_BRANCH_TOL = 1e-12


def _unit_sphere_area(dim: int) -> float:
    """Surface measure of the unit sphere S^(dim-1) in R^dim (2 for dim = 1)."""
    return 2 * math.pi ** (dim / 2) / gamma_fn(dim / 2)


# --------------------------------------------------------------------------
# H-type structure matrices


def _complex_structures(k: int, l: int):
    """Skew matrices ``J_1..J_l`` on R^k with ``J_i J_j + J_j J_i = -2 delta_ij``."""
    if l == 1:
        if k % 2:
            raise ValueError("htype with l = 1 needs even k")
        J = np.zeros((k, k))
        for m in range(0, k, 2):
            J[m, m + 1] = 1.0
            J[m + 1, m] = -1.0
        return [J]
    if k == 4 and l <= 3:
        J1 = np.array([[0, -1, 0, 0], [1, 0, 0, 0], [0, 0, 0, -1], [0, 0, 1, 0]], float)
        J2 = np.array([[0, 0, -1, 0], [0, 0, 0, 1], [1, 0, 0, 0], [0, -1, 0, 0]], float)
        J3 = np.array([[0, 0, 0, -1], [0, 0, -1, 0], [0, 1, 0, 0], [1, 0, 0, 0]], float)
        return [J1, J2, J3][:l]
    raise ValueError(f"no H-type structure registered for k={k}, l={l}")


# --------------------------------------------------------------------------
# groups


@dataclass(frozen=True)
class GroupSpec:
    """Polarizable Carnot group: layer dimensions, norm and horizontal frame."""

    kind: str
    k: int
    l: int
    name: str
    J: tuple = field(default=(), repr=False)

    @property
    def Q(self) -> int:
        return self.k + 2 * self.l

    @property
    def dim(self) -> int:
        return self.k + self.l

    # ---- norm and dilations
    def norm(self, g) -> np.ndarray:
        g = np.asarray(g, dtype=float)
        if self.kind == "euclidean":
            return np.linalg.norm(g, axis=-1)
        u, z = g[..., : self.k], g[..., self.k:]
        u2 = np.sum(u * u, axis=-1)
        z2 = np.sum(z * z, axis=-1)
        c = 1.0 if self.kind == "heisenberg" else 16.0
        return (u2 * u2 + c * z2) ** 0.25

    def dilate(self, g, s) -> np.ndarray:
        g = np.array(g, dtype=float)
        s = np.asarray(s, dtype=float)[..., None] if np.ndim(s) else float(s)
        if self.kind == "euclidean":
            return s * g
        out = g.copy()
        out[..., : self.k] = s * g[..., : self.k]
        out[..., self.k:] = s * s * g[..., self.k:]
        return out

    def norm_gradient(self, g) -> np.ndarray:
        """Euclidean gradient of N (analytic)."""
        g = np.asarray(g, dtype=float)
        N = self.norm(g)[..., None]
        if self.kind == "euclidean":
            return g / N
        u, z = g[..., : self.k], g[..., self.k:]
        u2 = np.sum(u * u, axis=-1, keepdims=True)
        c = 1.0 if self.kind == "heisenberg" else 16.0
        return np.concatenate([u2 * u / N ** 3, 0.5 * c * z / N ** 3], axis=-1)

    # ---- horizontal frame
    def frame(self, g) -> np.ndarray:
        """Coefficients of ``X_1..X_k`` in the coordinate frame: shape ``(..., k, dim)``."""
        g = np.asarray(g, dtype=float)
        shape = g.shape[:-1]
        F = np.zeros(shape + (self.k, self.dim))
        F[..., np.arange(self.k), np.arange(self.k)] = 1.0
        if self.kind == "euclidean":
            return F
        u = g[..., : self.k]
        if self.kind == "heisenberg":
            F[..., 0, 2] = 2 * u[..., 1]
            F[..., 1, 2] = -2 * u[..., 0]
            return F
        for j, Jj in enumerate(self.J):
            Ju = u @ Jj.T
            F[..., :, self.k + j] = 0.5 * Ju
        return F

    # ---- unit sphere
    def sphere_embed(self, coords) -> np.ndarray:
        """Point of the unit sphere for the given sphere coordinates.

        euclidean: the ``n-1`` standard angles; heisenberg: ``(theta, alpha)``;
        htype: ``(alpha, omega, eta)`` with unit vectors ``omega`` in R^k and
        ``eta`` in R^l (``eta`` may be omitted when ``l = 1``).
        """
        if self.kind == "euclidean":
            from .euclidean import _sphere_embed
            ang = np.atleast_2d(np.asarray(coords, dtype=float))
            return _sphere_embed(ang, np.ones(ang.shape[0]))
        if self.kind == "heisenberg":
            th, al = (np.asarray(c, dtype=float) for c in coords)
            sc = np.sqrt(np.cos(al))
            return np.stack([sc * np.cos(th), sc * np.sin(th), np.sin(al)], axis=-1)
        al = float(coords[0])
        omega = np.asarray(coords[1], dtype=float)
        eta = np.asarray(coords[2], dtype=float) if len(coords) > 2 else np.ones(1)
        omega = omega / np.linalg.norm(omega)
        eta = eta / np.linalg.norm(eta)
        return np.concatenate([math.sqrt(math.cos(al)) * omega, 0.25 * math.sin(al) * eta])


def get_group(name: str) -> GroupSpec:
    """Registry lookup: ``euclidean:n``, ``heisenberg`` or ``htype:k,l``."""
    key = name.strip().lower()
    if key == "heisenberg":
        return GroupSpec("heisenberg", 2, 1, "heisenberg")
    if key.startswith("euclidean:"):
        n = int(key.split(":", 1)[1])
        if n < 2:
            raise ValueError("euclidean groups need n >= 2")
        return GroupSpec("euclidean", n, 0, key)
    if key.startswith("htype:"):
        k, l = (int(v) for v in key.split(":", 1)[1].split(","))
        return GroupSpec("htype", k, l, key, tuple(_complex_structures(k, l)))
    raise KeyError(f"unknown group {name!r}")


def homogeneous_norm(group: GroupSpec, g) -> float | np.ndarray:
    val = group.norm(g)
    return float(val) if np.ndim(val) == 0 else val


def horizontal_gradient_norm(group: GroupSpec, F: Callable, g, h: float | None = None):
    """``sqrt(sum_i (X_i F)^2)`` with coordinate partials of ``F`` by five-point
    differences; ``F`` is vectorized over points of shape ``(..., dim)``."""
    g = np.asarray(g, dtype=float)
    if h is None:
        h = 1e-3 * max(1.0, float(np.max(np.abs(g))))
    grads = []
    for j in range(group.dim):
        e = np.zeros(group.dim)
        e[j] = h
        d = (8 * (F(g + e) - F(g - e)) - (F(g + 2 * e) - F(g - 2 * e))) / (12 * h)
        grads.append(np.asarray(d, dtype=float))
    grad = np.stack(grads, axis=-1)
    Xf = np.einsum("...ij,...j->...i", group.frame(g), grad)
    val = np.linalg.norm(Xf, axis=-1)
    return float(val) if val.ndim == 0 else val


def norm_gradient_norm(group: GroupSpec, g):
    """``||grad_0 N||`` from the analytic gradient of the norm."""
    g = np.asarray(g, dtype=float)
    Xf = np.einsum("...ij,...j->...i", group.frame(g), group.norm_gradient(g))
    return np.linalg.norm(Xf, axis=-1)


@dataclass(frozen=True)
class SpherePoint:
    group: GroupSpec
    coords: tuple

    @property
    def point(self) -> np.ndarray:
        return self.group.sphere_embed(self.coords).reshape(-1)

    @property
    def lam(self) -> float:
        return float(norm_gradient_norm(self.group, self.point))


def sphere_lambda(group: GroupSpec, alpha) -> np.ndarray:
    """``lambda`` as a function of the sphere coordinate ``alpha``.

    It equals ``sqrt(cos alpha)`` for Heisenberg and H-type groups and one
    in the Euclidean case.
    """
    if group.kind == "euclidean":
        return np.ones_like(np.asarray(alpha, dtype=float))
    return np.sqrt(np.cos(alpha))


# --------------------------------------------------------------------------
# radial flow


def _flow_field(group: GroupSpec):
    def field_(s, y):
        N = group.norm(y)
        Xg = group.frame(y) @ group.norm_gradient(y)
        denom = float(Xg @ Xg)
        return (N / s) * (Xg @ group.frame(y)) / denom
    return field_


def horizontal_speed(group: GroupSpec, s: float, y) -> float:
    """``||d phi/ds||_0`` at the flow point ``y``: the frame coefficients of the
    field are its first-layer coordinates."""
    v = _flow_field(group)(s, np.asarray(y, dtype=float))
    return float(np.linalg.norm(v[: group.k]))


def radial_flow(group: GroupSpec, xi, s1: float, tol: float = 1e-11,
                s0: float = 1.0) -> OdeTrajectory:
    """Integrate ``d phi/ds = (N/s) grad_0 N / ||grad_0 N||^2`` from ``phi(s0) = xi``."""
    if not s1 > 0:
        raise ValueError("s1 must be positive")
    y0 = xi.point if isinstance(xi, SpherePoint) else np.asarray(xi, dtype=float)
    if norm_gradient_norm(group, y0) == 0:
        raise ValueError("start point lies on the characteristic set")
    return solve_ode(_flow_field(group), y0, s0, s1, tol)


def heisenberg_flow_closed_form(theta, alpha, r) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    ang = theta - math.tan(alpha) * np.log(r)
    sc = r * math.sqrt(math.cos(alpha))
    return np.stack([sc * np.cos(ang), sc * np.sin(ang), r * r * math.sin(alpha)], axis=-1)


# --------------------------------------------------------------------------
# spherical integration


def _htype_alpha_range(group):
    return (-math.pi / 2, math.pi / 2) if group.l == 1 else (0.0, math.pi / 2)


def sphere_integral(group: GroupSpec, f: Callable, tol: float = 1e-11) -> float:
    """``int_{S_1 minus Z} f dv``.

    euclidean: ``f(angles)`` against the standard surface measure;
    heisenberg: ``f(theta, alpha)`` against ``dalpha dtheta``;
    htype: ``f(alpha)`` (functions of ``alpha`` only) against
    ``4^-l cos^((k-2)/2) sin^(l-1) dalpha domega deta``.
    """
    if group.kind == "euclidean":
        from .euclidean import _integrate_box, _sphere_weight
        n = group.k
        box = ((0.0, 2 * math.pi),) + ((0.0, math.pi),) * (n - 2)
        return _integrate_box(lambda ang: f(ang) * _sphere_weight(ang[None, :])[0], box, tol)
    if group.kind == "heisenberg":
        half = math.pi / 2
        return integrate_2d(lambda th, al: f(np.full_like(al, th), al),
                            (0.0, 2 * math.pi, -half, half), tol, rtol=tol,
                            vectorized=True).value
    k, l = group.k, group.l
    lo, hi = _htype_alpha_range(group)
    const = 4.0 ** (-l) * _unit_sphere_area(k) * (_unit_sphere_area(l) if l > 1 else 1.0)

    def w(al):
        return f(al) * np.cos(al) ** ((k - 2) / 2) * np.abs(np.sin(al)) ** (l - 1)

    return const * integrate_1d(w, lo, hi, tol, rtol=tol, vectorized=True).value


def sphere_area(group: GroupSpec, tol: float = 1e-12) -> float:
    """Perimeter measure of the unit sphere, ``int lambda dv``."""
    return _sphere_constant(group, 1.0, tol)


def _sphere_constant(group, power, tol=1e-12):
    """``int lambda^power dv``."""
    if group.kind == "euclidean":
        return _unit_sphere_area(group.k)
    if group.kind == "heisenberg":
        return sphere_integral(group, lambda th, al: np.cos(al) ** (power / 2), tol)
    return sphere_integral(group, lambda al: np.cos(al) ** (power / 2), tol)


def heisenberg_constant(p: float) -> float:
    """Closed form of ``int lambda^p dv`` on the Heisenberg unit sphere."""
    return 2 * math.pi * math.sqrt(math.pi) * gamma_fn(p / 4 + 0.5) / gamma_fn(p / 4 + 1)


def htype_constant_derived(k: int, l: int, p: float) -> float:
    """``int lambda^p dv`` for ``htype:k,l`` from a Beta-function evaluation:
    ``2 pi^((k+l)/2) G((k+p)/4) / (4^l G(k/2) G((k+2l+p)/4))``."""
    return (2 * math.pi ** ((k + l) / 2) * gamma_fn((k + p) / 4)
            / (4 ** l * gamma_fn(k / 2) * gamma_fn((k + 2 * l + p) / 4)))


def htype_constant_printed(k: int, l: int, p: float) -> float:
    """The alternative normalization ``2 pi^(k+l/2) G((k+p)/4) / (4^l G(k/2) G((k+2l+p)/4))``,
    kept for comparison with the derived constant."""
    return (2 * math.pi ** (k + l / 2) * gamma_fn((k + p) / 4)
            / (4 ** l * gamma_fn(k / 2) * gamma_fn((k + 2 * l + p) / 4)))


# --------------------------------------------------------------------------
# ring constants and modules


@dataclass(frozen=True)
class RingConstants:
    C_ab: float
    C_S1: float
    K_ab: float
    K_S1: float
    p: float
    q: float
    Q: int
    a: float
    b: float
    tau_connecting: float
    tau_separating: float
    C_S1_closed_form: float | None = None


def _check_ring(p, a, b):
    if not p > 1:
        raise ValueError("p must exceed 1")
    if not 0 < a < b:
        raise ValueError("need 0 < a < b")


def _closed_form_C_S1(group, p):
    if group.kind == "euclidean":
        return _unit_sphere_area(group.k)
    if group.kind == "heisenberg":
        return heisenberg_constant(p)
    return htype_constant_derived(group.k, group.l, p)


def ring_constants(group: GroupSpec, p: float, a: float, b: float,
                   tol: float = 1e-13) -> RingConstants:
    """``C_ab = int_a^b s^((1-Q)/(p-1)) ds``, ``C_S1 = int lambda^p dv``,
    ``K_ab = int_a^b s^((1-q)(Q-1)) ds`` and ``K_S1 = int lambda^(q/(q-1)) dv``
    for the conjugate exponent ``q``, all by quadrature."""
    _check_ring(p, a, b)
    Q = group.Q
    q = p / (p - 1)
    C_ab = integrate_1d(lambda s: s ** ((1 - Q) / (p - 1)), a, b, tol, rtol=tol).value
    K_ab = integrate_1d(lambda s: s ** ((1 - q) * (Q - 1)), a, b, tol, rtol=tol).value
    C_S1 = _sphere_constant(group, p)
    K_S1 = _sphere_constant(group, q / (q - 1))
    return RingConstants(C_ab, C_S1, K_ab, K_S1, p, q, Q, a, b,
                         (1 - Q) / (p - 1), (q - 1) * (1 - Q), _closed_form_C_S1(group, p))


def _C_ab_closed(p, Q, a, b):
    if abs(p - Q) < Q_BRANCH_TOL:
        return math.log(b / a)
    e = (p - Q) / (p - 1)
    return (b ** e - a ** e) / e


def module_connecting_ring(group: GroupSpec, p: float, a: float, b: float) -> ModuleEstimate:
    """``M_p = C_S1 * C_ab^(1-p)`` for curves joining the spheres of radii a and b."""
    rc = ring_constants(group, p, a, b)
    val = rc.C_S1 * rc.C_ab ** (1 - p)
    closed = rc.C_S1_closed_form * _C_ab_closed(p, group.Q, a, b) ** (1 - p)
    return ModuleEstimate(val, "quadrature", 1e-11 * val, p,
                          {"closed_form": closed, "constants": rc})


def module_separating_ring(group: GroupSpec, q: float, a: float, b: float) -> ModuleEstimate:
    """``M_q = K_ab * K_S1^(1-q)`` for sets separating the two spheres."""
    if not q > 1:
        raise ValueError("q must exceed 1")
    p = q / (q - 1)
    rc = ring_constants(group, p, a, b)
    val = rc.K_ab * rc.K_S1 ** (1 - q)
    return ModuleEstimate(val, "quadrature", 1e-11 * val, q, {"constants": rc})


@dataclass(frozen=True)
class RingExtremal:
    """Extremal density of the ring for connecting curves or separating sets."""

    group: GroupSpec
    p: float
    a: float
    b: float
    kind: str
    constants: RingConstants

    def __call__(self, g) -> np.ndarray:
        g = np.asarray(g, dtype=float)
        N = self.group.norm(g)
        lam = norm_gradient_norm(self.group, g)
        rc = self.constants
        if self.kind == "connecting":
            # C_ab^-1 ||grad_0 N^(tau+1)|| / |tau+1|, or the log branch when p = Q
            return N ** rc.tau_connecting * lam / rc.C_ab
        return N ** (1 - rc.Q) * lam ** (1 / (rc.q - 1)) / rc.K_S1

    def along_flow(self, s, lam):
        rc = self.constants
        s = np.asarray(s, dtype=float)
        if self.kind == "connecting":
            return s ** rc.tau_connecting * lam / rc.C_ab
        return s ** (1 - rc.Q) * lam ** (1 / (rc.q - 1)) / rc.K_S1


def extremal_density_ring(group: GroupSpec, p: float, a: float, b: float,
                          kind: str = "connecting") -> RingExtremal:
    """Extremal density of the ring; for ``kind='separating'`` the exponent of the
    separating problem is the conjugate ``q`` of ``p``."""
    if kind not in ("connecting", "separating"):
        raise ValueError("kind must be 'connecting' or 'separating'")
    return RingExtremal(group, p, a, b, kind, ring_constants(group, p, a, b))


# --------------------------------------------------------------------------
# ambient quadrature (independent of flows and of dv)


def _block_split(group):
    """Rotationally reduced coordinates ``(rho, w)`` and their volume density."""
    if group.kind == "euclidean":
        m, lw = group.k - 1, 1
    else:
        m, lw = group.k, group.l
    return m, lw


def _rep_point(group, rho, w):
    m, lw = _block_split(group)
    rho = np.asarray(rho, dtype=float)
    pts = np.zeros(rho.shape + (group.dim,))
    pts[..., 0] = rho
    pts[..., m] = w
    return pts


def ambient_integral(group: GroupSpec, F: Callable, a: float, b: float,
                     tol: float = 1e-10) -> float:
    """``int_{a <= N <= b} F dx`` for rotation-invariant ``F`` in ambient coordinates.

    The integrand is reduced to ``(rho, w)`` with ``rho`` the norm of the first
    block (first ``n-1`` coordinates, or ``u``) and ``w`` the last coordinate
    (or ``|z|``), and integrated with the matching spherical volume factors.
    """
    m, lw = _block_split(group)
    area_m = _unit_sphere_area(m) if m > 1 else 2.0
    area_w = _unit_sphere_area(lw) if lw > 1 else 1.0
    c = {"euclidean": None, "heisenberg": 1.0, "htype": 16.0}[group.kind]

    def w_top(level):
        return level if c is None else level * level / math.sqrt(c)

    def rho_at(level, w):
        if w >= w_top(level):
            return 0.0
        if c is None:
            return math.sqrt(level * level - w * w)
        return (level ** 4 - c * w * w) ** 0.25

    wmax, wa = w_top(b), w_top(a)

    def inner(w):
        lo, hi = rho_at(a, abs(w)), rho_at(b, abs(w))
        if hi <= lo:
            return 0.0

        def g(r):
            pts = _rep_point(group, r, w)
            return np.asarray(F(pts), dtype=float) * area_m * r ** (m - 1)

        return integrate_1d(g, lo, hi, tol / 10, rtol=tol / 10, vectorized=True).value

    def outer(w):
        val = inner(w)
        return val * area_w * w ** (lw - 1) if lw > 1 else 2.0 * val

    # w = w_top sin(phi) removes the root singularities of the level sets
    inner_part = integrate_1d(lambda ps: outer(wa * math.sin(ps)) * wa * math.cos(ps),
                              0.0, math.pi / 2, tol, rtol=tol).value
    outer_part = integrate_1d(lambda ph: outer(wmax * math.sin(ph)) * wmax * math.cos(ph),
                              math.asin(wa / wmax), math.pi / 2, tol, rtol=tol).value
    return inner_part + outer_part


def ring_volume(group: GroupSpec, a: float, b: float) -> tuple[float, float]:
    """Volume of ``a <= N <= b``: (ambient quadrature, ``(b^Q - a^Q)/Q * int dv``)."""
    amb = ambient_integral(group, lambda pts: np.ones(pts.shape[:-1]), a, b)
    Q = group.Q
    return amb, (b ** Q - a ** Q) / Q * _sphere_constant(group, 0.0)


@dataclass(frozen=True)
class CapacityReport:
    cap_value: float
    module_value: float
    rel_diff: float
    extremal: str


def capacity_check(group: GroupSpec, p: float, a: float, b: float,
                   tol: float = 1e-9) -> CapacityReport:
    """p-capacity of the ring from the explicit potential vs the module.

    The potential is ``(N^(tau+1) - a^(tau+1)) / (b^(tau+1) - a^(tau+1))``
    with ``tau + 1 = (p-Q)/(p-1)``, or ``log(N/a) / log(b/a)`` when ``p = Q``;
    its horizontal gradient is taken by finite differences through the frame
    and integrated over the ring in ambient coordinates.
    """
    _check_ring(p, a, b)
    Q = group.Q
    if abs(p - Q) < Q_BRANCH_TOL:
        def u(pts):
            return np.log(group.norm(pts) / a) / math.log(b / a)
        desc = "log(N/a)/log(b/a)"
    else:
        e = (p - Q) / (p - 1)

        def u(pts):
            return (group.norm(pts) ** e - a ** e) / (b ** e - a ** e)
        desc = f"(N^{e:g} - a^{e:g})/(b^{e:g} - a^{e:g})"

    def energy_density(pts):
        return horizontal_gradient_norm(group, u, pts, h=1e-3 * b) ** p

    cap = ambient_integral(group, energy_density, a, b, tol)
    mod = module_connecting_ring(group, p, a, b).value
    return CapacityReport(cap, mod, abs(cap - mod) / mod, desc)


# --------------------------------------------------------------------------
# Heisenberg twist


def _twist_speed(alpha, r):
    return 0.5 * np.sqrt((4 + r * r) / np.cos(alpha + r - 1))


def heisenberg_twist_ell(alpha: float, p: float, b: float, *,
                         convention: str = "volume", twisted: bool = True) -> float:
    """Length profile of the twisted flow lines ``c_alpha``.

    ``convention='volume'`` weights by the volume density ``r^3`` of the polar
    coordinates (``dx = r^3 dr dalpha dtheta``), which reduces to the ring
    module for the identity map; ``'printed'`` uses ``r^3 sqrt(cos alpha)``.
    Returns ``inf`` when the twisted curve leaves ``cos(alpha + r - 1) > 0``.
    With ``twisted=False`` the untwisted flow lines (speed ``cos^(-1/2) alpha``)
    are used instead.
    """
    q = p / (p - 1)
    shift = 1.0 if twisted else 0.0
    if not (-math.pi / 2 < alpha and alpha + shift * (b - 1) < math.pi / 2):
        return math.inf
    speed = _twist_speed if twisted else (lambda al, r: np.cos(al) ** -0.5 + 0 * r)
    if convention == "volume":
        w = lambda r: r ** 3
    elif convention == "printed":
        w = lambda r: r ** 3 * math.sqrt(math.cos(alpha))
    else:
        raise ValueError("convention must be 'volume' or 'printed'")
    integrand = lambda r: (speed(alpha, r) / w(r)) ** q * w(r)
    try:
        return integrate_1d(integrand, 1.0, b, 1e-13, rtol=1e-11, vectorized=True).value
    except QuadratureError as exc:
        # endpoint blow-up at r = b as alpha approaches its upper limit
        return exc.value if math.isfinite(exc.value) else math.inf


def heisenberg_twist_module(p: float, b: float, *, convention: str = "volume",
                            tol: float = 1e-9, twisted: bool = True) -> ModuleEstimate:
    """p-module of the twisted radial curves, ``2 pi int ell(alpha)^(1-p) dalpha``.

    Only ``alpha`` with ``cos(alpha + r - 1) > 0`` on ``[1, b]`` contribute,
    which needs ``1 < b < 1 + pi/2``.
    """
    if not p > 1:
        raise ValueError("p must exceed 1")
    if not 1 < b < 1 + math.pi / 2:
        raise ValueError("twist needs 1 < b < 1 + pi/2")
    lo, hi = -math.pi / 2, math.pi / 2 - (b - 1 if twisted else 0.0)

    def g(al):
        ell = heisenberg_twist_ell(al, p, b, convention=convention, twisted=twisted)
        return 0.0 if math.isinf(ell) else ell ** (1 - p)

    val = 2 * math.pi * integrate_1d(g, lo, hi, tol, rtol=tol).value
    untwisted = module_connecting_ring(get_group("heisenberg"), p, 1.0, b).value
    return ModuleEstimate(val, "quadrature", tol * max(val, 1.0), p,
                          {"untwisted": untwisted, "alpha_range": (lo, hi),
                           "convention": convention})


def twist_curve(theta: float, alpha: float) -> Callable:
    """The twisted flow line ``r -> c(r)`` in ``(x1, x2, t)``; ``omega_1`` by quadrature."""
    def omega1(r):
        if r == 1:
            integral = 0.0
        else:
            lo, hi = min(1.0, r), max(1.0, r)
            integral = integrate_1d(lambda s: math.tan(alpha + s - 1) / s, lo, hi,
                                    1e-14, rtol=1e-14).value * (1.0 if r > 1 else -1.0)
        return (1 - r) / 2 - integral

    def c(r):
        r_arr = np.atleast_1d(np.asarray(r, dtype=float))
        out = np.empty((r_arr.size, 3))
        for i, ri in enumerate(r_arr):
            A = alpha + ri - 1
            ang = theta + omega1(ri)
            sc = ri * math.sqrt(math.cos(A))
            out[i] = (sc * math.cos(ang), sc * math.sin(ang), ri * ri * math.sin(A))
        return out

    return c


def _d5(fn, x, h):
    return (8 * (fn(x + h) - fn(x - h)) - (fn(x + 2 * h) - fn(x - 2 * h))) / (12 * h)


def twist_horizontality_residual(theta: float, alpha: float, b: float, n: int = 9) -> float:
    """Largest ``|t' - 2(x1' x2 - x2' x1)|`` at ``n`` radii of the twisted curve,
    with derivatives by finite differences of the quadrature-built curve."""
    c = twist_curve(theta, alpha)
    h = 1e-3 * (b - 1)
    rs = np.linspace(1 + 3 * h, b - 3 * h, n)
    worst = 0.0
    for r in rs:
        pt = c(r)[0]
        d = _d5(lambda s: c(s)[0], r, h)
        worst = max(worst, abs(d[2] - 2 * (d[0] * pt[1] - d[1] * pt[0])))
    return worst


def twist_extremal_density(p: float, b: float, convention: str = "volume") -> Callable:
    """Extremal density of the twisted family at ambient points ``(x1, x2, t)``:
    ``ell(alpha)^-1 (|c'|_0 / r^3)^(q-1)`` with ``r = N`` and ``alpha`` recovered
    from ``t = r^2 sin(alpha + r - 1)``."""
    q = p / (p - 1)
    H = get_group("heisenberg")
    cache = {}

    def rho(pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        out = np.empty(pts.shape[0])
        for i, g in enumerate(pts):
            r = float(H.norm(g))
            A = math.asin(max(-1.0, min(1.0, g[2] / (r * r))))
            al = A - (r - 1)
            key = round(al, 12)
            if key not in cache:
                cache[key] = heisenberg_twist_ell(al, p, b, convention=convention)
            speed = 0.5 * math.sqrt((4 + r * r) / math.cos(A))
            out[i] = (speed / r ** 3) ** (q - 1) / cache[key]
        return out

    return rho


def twist_density_line_integral(p: float, b: float, theta: float, alpha: float) -> float:
    """``int rho_0 ds`` along the twisted curve with the horizontal speed taken
    from finite differences of the curve itself."""
    c = twist_curve(theta, alpha)
    rho = twist_extremal_density(p, b)
    h = 1e-4 * (b - 1)

    def integrand(r):
        d = _d5(lambda s: c(s)[0], r, h)
        return float(rho(c(r))[0]) * math.hypot(d[0], d[1])

    return integrate_1d(integrand, 1.0, b, 1e-10, rtol=1e-10).value
