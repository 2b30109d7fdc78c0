"""Numerical kernels: adaptive quadrature, ODE integration, finite-difference
Jacobians and the Gamma function.

Everything here is deliberately small and dependency-light; the module-level
functions are pure and may be called concurrently.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "QuadratureError",
    "SingularityError",
    "Quadrature1DResult",
    "OdeTrajectory",
    "integrate_1d",
    "integrate_2d",
    "solve_ode",
    "jacobian_fd",
    "gamma_fn",
]

EPS = np.finfo(float).eps


class QuadratureError(ArithmeticError):
    """Adaptive subdivision hit its limit before reaching the tolerance."""

    def __init__(self, message, value=float("nan"), abs_error=float("inf")):
        super().__init__(message)
        self.value = value
        self.abs_error = abs_error


class SingularityError(ArithmeticError):
    """ODE step size underflowed, typically next to a singular set."""

    def __init__(self, message, s_last=None, y_last=None):
        super().__init__(message)
        self.s_last = s_last
        self.y_last = y_last


@dataclass(frozen=True)
class Quadrature1DResult:
    value: float
    abs_error_estimate: float
    evaluations: int

    def __float__(self):
        return float(self.value)


@dataclass(frozen=True)
class OdeTrajectory:
    samples: np.ndarray
    states: np.ndarray
    tolerance: float
    rejected: int = 0

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


# --------------------------------------------------------------------------
# Gauss-Kronrod 7/15 rule (QUADPACK qk15 constants)

_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

# full symmetric node set on [-1, 1]; Gauss nodes are the odd-indexed Kronrod nodes
KRONROD_NODES = np.concatenate([-_XGK[:-1], [0.0], _XGK[:-1][::-1]])
KRONROD_WEIGHTS = np.concatenate([_WGK[:-1], [_WGK[-1]], _WGK[:-1][::-1]])
_gauss_w = np.zeros(15)
_gauss_w[[1, 3, 5]] = _WG[:3]
_gauss_w[7] = _WG[3]
_gauss_w[[13, 11, 9]] = _WG[:3]
GAUSS_WEIGHTS_ON_KRONROD = _gauss_w


def _as_vector_fn(f, vectorized):
    if vectorized:
        return f

    def g(x):
        return np.array([f(float(xi)) for xi in x], dtype=float)

    return g


def _gk15(fv, a, b):
    c = 0.5 * (a + b)
    h = 0.5 * (b - a)
    x = c + h * KRONROD_NODES
    y = np.asarray(fv(x), dtype=float)
    if y.shape != x.shape:
        y = np.broadcast_to(y, x.shape)
    if not np.all(np.isfinite(y)):
        raise QuadratureError(f"non-finite integrand value on [{a}, {b}]")
    resk = h * np.dot(KRONROD_WEIGHTS, y)
    resg = h * np.dot(GAUSS_WEIGHTS_ON_KRONROD, y)
    if not (math.isfinite(resk) and math.isfinite(resg)):
        raise QuadratureError(f"integrand overflows on [{a}, {b}]")
    resabs = abs(h) * np.dot(KRONROD_WEIGHTS, np.abs(y))
    mean = resk / (2 * h) if h != 0 else 0.0
    resasc = abs(h) * np.dot(KRONROD_WEIGHTS, np.abs(y - mean))
    err = abs(resk - resg)
    if resasc != 0.0 and err != 0.0:
        err = resasc * min(1.0, (200.0 * err / resasc) ** 1.5)
    if resabs > np.finfo(float).tiny / (50 * EPS):
        err = max(50 * EPS * resabs, err)
    return resk, err, resabs


def integrate_1d(
    f: Callable,
    a: float,
    b: float,
    tol: float = 1e-10,
    *,
    rtol: float | None = None,
    vectorized: bool = False,
    limit: int = 4000,
    breakpoints: Sequence[float] = (),
) -> Quadrature1DResult:
    """Globally adaptive Gauss-Kronrod (7/15) quadrature of ``f`` over [a, b].

    The interval with the largest error estimate is bisected until the summed
    estimate drops below ``max(tol, rtol*|value|)``.  Bisection is geometric
    toward any endpoint singularity, so integrable power singularities such
    as ``cos(x)**-0.5`` at ``pi/2`` converge without a change of variables.

    Raises
    ------
    QuadratureError
        When ``limit`` intervals are in use, or an interval becomes too short
        to split, before convergence.  The exception carries the partial value.
    """
    if not a < b:
        raise ValueError(f"integrate_1d needs a < b, got a={a}, b={b}")
    rtol = tol if rtol is None else rtol
    fv = _as_vector_fn(f, vectorized)
    cuts = [a] + sorted(x for x in breakpoints if a < x < b) + [b]
    heap = []
    total = 0.0
    total_err = 0.0
    total_abs = 0.0
    nevals = 0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        val, err, rabs = _gk15(fv, lo, hi)
        nevals += 15
        total += val
        total_err += err
        total_abs += rabs
        heapq.heappush(heap, (-err, lo, hi, val, rabs))
    # the roundoff floor keeps tolerances below ~100 ulp of the integral from spinning
    while total_err > max(tol, rtol * abs(total), 100 * EPS * total_abs):
        if len(heap) >= limit:
            raise QuadratureError(
                f"integrate_1d: subdivision limit {limit} reached "
                f"(value={total!r}, err={total_err:.3e})",
                value=total, abs_error=total_err)
        negerr, lo, hi, val, rabs = heapq.heappop(heap)
        mid = 0.5 * (lo + hi)
        if not (lo < mid < hi) or (hi - lo) <= 64 * EPS * max(abs(lo), abs(hi), 1e-300):
            raise QuadratureError(
                f"integrate_1d: interval [{lo}, {hi}] too short to split "
                f"(value={total!r}, err={total_err:.3e})",
                value=total, abs_error=total_err)
        v1, e1, a1 = _gk15(fv, lo, mid)
        v2, e2, a2 = _gk15(fv, mid, hi)
        nevals += 30
        total += v1 + v2 - val
        total_err += e1 + e2 + negerr
        total_abs += a1 + a2 - rabs
        heapq.heappush(heap, (-e1, lo, mid, v1, a1))
        heapq.heappush(heap, (-e2, mid, hi, v2, a2))
    # resum to shed accumulated cancellation in the running totals
    total = math.fsum(item[3] for item in heap)
    total_err = math.fsum(-item[0] for item in heap)
    return Quadrature1DResult(total, total_err, nevals)


def integrate_2d(
    f: Callable,
    rect: Sequence[Sequence[float]] | Sequence[float],
    tol: float = 1e-10,
    *,
    rtol: float | None = None,
    vectorized: bool = False,
    limit: int = 4000,
) -> Quadrature1DResult:
    """Iterated adaptive quadrature of ``f(x, y)`` over ``[a,b] x [c,d]``.

    ``rect`` is ``((a, b), (c, d))`` or ``(a, b, c, d)``.  The inner integral
    over ``y`` runs at ``tol/10``; if ``vectorized`` the integrand receives a
    scalar ``x`` and an array ``y``.  The ``c``/``d`` bounds may be callables
    of ``x`` for non-rectangular regions.
    """
    if len(rect) == 4:
        (a, b), (c, d) = (rect[0], rect[1]), (rect[2], rect[3])
    else:
        (a, b), (c, d) = rect
    rtol = tol if rtol is None else rtol
    counter = [0]

    def inner(x):
        lo = c(x) if callable(c) else c
        hi = d(x) if callable(d) else d
        if hi <= lo:
            return 0.0
        res = integrate_1d(lambda y: f(x, y), lo, hi, tol / 10, rtol=rtol / 10,
                           vectorized=vectorized, limit=limit)
        counter[0] += res.evaluations
        return res.value

    res = integrate_1d(inner, a, b, tol, rtol=rtol, limit=limit)
    return Quadrature1DResult(res.value, res.abs_error_estimate, counter[0])


# --------------------------------------------------------------------------
# Dormand-Prince 5(4)

_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640,
                   -92097 / 339200, 187 / 2100, 1 / 40])
_DP_E = _DP_B5 - _DP_B4


def solve_ode(
    field: Callable[[float, np.ndarray], np.ndarray],
    y0,
    s0: float,
    s1: float,
    tol: float = 1e-9,
    *,
    rtol: float | None = None,
    h0: float | None = None,
    max_steps: int = 200_000,
) -> OdeTrajectory:
    """Integrate ``y' = field(s, y)`` from ``s0`` to ``s1`` with Dormand-Prince 5(4).

    Local error control uses the mixed norm ``atol + rtol*|y|`` (both default
    to ``tol``).  ``s1 < s0`` integrates backwards; the returned samples are
    then decreasing.  A step size shrinking below ``1e3*eps*|s|`` raises
    :class:`SingularityError` with the last accepted state.
    """
    atol = tol
    rtol = tol if rtol is None else rtol
    y = np.array(y0, dtype=float)
    s = float(s0)
    direction = 1.0 if s1 >= s0 else -1.0
    span = abs(s1 - s0)
    samples = [s]
    states = [y.copy()]
    if span == 0.0:
        return OdeTrajectory(np.array(samples), np.array(states), tol)
    k = np.empty((7, y.size))
    k[0] = field(s, y)
    if h0 is None:
        scale = atol + rtol * np.abs(y)
        d0 = np.linalg.norm(y / scale) / math.sqrt(y.size)
        d1 = np.linalg.norm(k[0] / scale) / math.sqrt(y.size)
        h = 0.01 * d0 / d1 if d0 > 1e-5 and d1 > 1e-5 else 1e-6
        h = min(h, span)
    else:
        h = min(abs(h0), span)
    rejected = 0
    steps = 0
    while direction * (s1 - s) > 0:
        if steps >= max_steps:
            raise SingularityError("solve_ode: step budget exhausted", s, y.copy())
        h = min(h, abs(s1 - s))
        if h < 1e3 * EPS * max(abs(s), 1.0):
            raise SingularityError(
                f"solve_ode: step size underflow at s={s!r}", s, y.copy())
        hs = direction * h
        for i in range(1, 7):
            yi = y + hs * np.dot(_DP_A[i], k[:i])
            k[i] = field(s + _DP_C[i] * hs, yi)
        y_new = y + hs * np.dot(_DP_B5, k)
        err_vec = hs * np.dot(_DP_E, k)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err = np.linalg.norm(err_vec / scale) / math.sqrt(y.size)
        if not np.all(np.isfinite(y_new)):
            err = np.inf
        steps += 1
        if err <= 1.0:
            s = s + hs if abs(s1 - (s + hs)) > 1e-15 * max(1.0, abs(s1)) else s1
            y = y_new
            samples.append(s)
            states.append(y.copy())
            k[0] = k[6]  # FSAL
            fac = 0.9 * err ** -0.2 if err > 0 else 5.0
            h *= min(5.0, max(0.2, fac))
        else:
            rejected += 1
            fac = 0.9 * err ** -0.2 if np.isfinite(err) else 0.1
            h *= max(0.1, fac)
    return OdeTrajectory(np.array(samples), np.array(states), tol, rejected)


# --------------------------------------------------------------------------

def jacobian_fd(fmap: Callable, x, h: float | None = None) -> np.ndarray:
    """Central-difference Jacobian of ``fmap`` at ``x``.

    The default step is ``eps**(1/3) * max(1, |x_j|)`` per coordinate.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    f0 = np.atleast_1d(np.asarray(fmap(x), dtype=float))
    jac = np.empty((f0.size, x.size))
    for j in range(x.size):
        hj = h if h is not None else EPS ** (1 / 3) * max(1.0, abs(x[j]))
        xp = x.copy()
        xm = x.copy()
        xp[j] += hj
        xm[j] -= hj
        hj = xp[j] - xm[j]  # representable step
        jac[:, j] = (np.atleast_1d(fmap(xp)) - np.atleast_1d(fmap(xm))) / hj
    return jac


_LANCZOS_G = 7
_LANCZOS_COEF = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)


def gamma_fn(x: float) -> float:
    """Euler Gamma function for ``x > 0`` (Lanczos, g=7, n=9).

    Uses the reflection formula below 1/2.
    """
    x = float(x)
    if not x > 0 or math.isnan(x):
        raise ValueError(f"gamma_fn is defined here for x > 0 only, got {x}")
    if x < 0.5:
        return math.pi / (math.sin(math.pi * x) * gamma_fn(1.0 - x))
    z = x - 1.0
    acc = _LANCZOS_COEF[0]
    for i in range(1, _LANCZOS_G + 2):
        acc += _LANCZOS_COEF[i] / (z + i)
    t = z + _LANCZOS_G + 0.5
    return math.sqrt(2 * math.pi) * t ** (z + 0.5) * math.exp(-t) * acc
