"""Command-line front end: named scenarios, invariant suites and the grid solver.

Every scenario produces a list of checks.  A check compares a computed value
with an expected one under a declared rule and records where the expected
value comes from:

``published``  a value stated in the literature this package implements;
``derived``    obtained by an independent calculation (another quadrature
               path, a hand-derived antiderivative, an analytic identity);
``trivial``    immediate from the definitions.

Exit status is 0 exactly when every check passes.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from . import carnot, core, euclidean, oracle, planar

TOL_ENV = "PMODULUS_TOL"
DEFAULT_TOL = 1e-8
ORACLE_TOL = 0.02
LEVELS = ("closed_form", "quadrature", "oracle", "all")
PROVENANCE = ("published", "derived", "trivial")


def default_tolerance() -> float:
    """Tolerance for quadrature checks; overridden by the ``PMODULUS_TOL`` variable."""
    raw = os.environ.get(TOL_ENV)
    if raw is None or raw.strip() == "":
        return DEFAULT_TOL
    try:
        val = float(raw)
    except ValueError:
        raise ScenarioError(f"{TOL_ENV} must be a number, got {raw!r}") from None
    if not val > 0:
        raise ScenarioError(f"{TOL_ENV} must be positive")
    return val


class ScenarioError(ValueError):
    pass


# --------------------------------------------------------------------------
# checks and reports


@dataclass
class Check:
    """One comparison.  ``mode`` is ``rel``, ``abs``, ``le``, ``ge`` or ``within``;
    for ``within`` the expected value is an interval ``[lo, hi]`` and the
    tolerance is relative to its endpoints."""

    name: str
    expected: float | list
    computed: float
    tolerance: float
    mode: str
    provenance: str
    source: str
    passed: bool = False

    def __post_init__(self):
        if self.provenance not in PROVENANCE:
            raise ValueError(f"unknown provenance {self.provenance!r}")
        self.computed = float(self.computed)
        e, c, t = self.expected, self.computed, self.tolerance
        if self.mode == "rel":
            ok = abs(c - e) <= t * abs(e)
        elif self.mode == "abs":
            ok = abs(c - e) <= t
        elif self.mode == "le":
            ok = c <= e + t * max(abs(e), 1e-300)
        elif self.mode == "ge":
            ok = c >= e - t * max(abs(e), 1e-300)
        elif self.mode == "within":
            lo, hi = e
            ok = lo - t * abs(lo) <= c <= hi + t * abs(hi)
        else:
            raise ValueError(f"unknown check mode {self.mode!r}")
        self.passed = bool(ok and math.isfinite(c))


@dataclass
class RunReport:
    name: str
    params: dict
    level: str
    checks: list = field(default_factory=list)
    seconds: float = 0.0
    notes: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(self.checks) and all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        return {"name": self.name, "params": self.params, "level": self.level,
                "passed": self.passed, "seconds": round(self.seconds, 3),
                "checks": [asdict(c) for c in self.checks], "notes": self.notes}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def render(reports: list[RunReport], fmt: str) -> str:
    if fmt == "json":
        payload = {"passed": all(r.passed for r in reports),
                   "reports": [r.to_dict() for r in reports]}
        return json.dumps(_jsonable(payload), indent=2)
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["scenario", "check", "expected", "computed", "tolerance", "mode",
                    "passed", "provenance", "source"])
        for r in reports:
            for c in r.checks:
                exp = ";".join(repr(v) for v in c.expected) if isinstance(c.expected, list) \
                    else repr(c.expected)
                w.writerow([r.name, c.name, exp, repr(c.computed), c.tolerance, c.mode,
                            c.passed, c.provenance, c.source])
        return buf.getvalue()
    raise ScenarioError(f"unknown output format {fmt!r}")


# --------------------------------------------------------------------------
# scenario registry


@dataclass(frozen=True)
class Scenario:
    run: Callable
    defaults: dict
    required: tuple = ()
    strings: tuple = ()
    help: str = ""


SCENARIOS: dict[str, Scenario] = {}


def scenario(name, defaults, required=(), strings=(), help=""):
    def deco(fn):
        SCENARIOS[name] = Scenario(fn, defaults, tuple(required), tuple(strings), help)
        return fn
    return deco


def _levels(level):
    return {"closed_form", "quadrature", "oracle"} if level == "all" else {level}


def _oracle_opts(P):
    return oracle.OracleOptions(stencil=int(P.get("stencil", 48)))


@scenario("rectangle", {"a": 1.0, "b": 2.0, "p": 2.0, "n": 200},
          help="curves joining the sides of length a of an a-by-b rectangle")
def _rectangle(P, levels, tol):
    a, b, p = P["a"], P["b"], P["p"]
    expected = a / b ** (p - 1)
    out = []
    if "closed_form" in levels:
        ref = euclidean.closed_form_reference("cylinder", {"n": 2, "width": a, "a": 0.0,
                                                           "b": b, "p": p})
        out.append(Check("module closed form", expected, ref.value, 1e-12, "rel", "published",
                         "rectangle module a/b^(p-1)"))
    if "quadrature" in levels:
        cond, fmap = euclidean.build_scenario("cylinder", {"n": 2, "width": a, "a": 0.0, "b": b})
        out.append(Check("module by fibre quadrature", expected,
                         euclidean.module_connecting(cond, fmap, p).value, tol, "rel",
                         "published", "rectangle module a/b^(p-1)"))
        if p == 2:
            val = planar.rodin2d_module(lambda x, t: x + 1j * t, (0.0, a, 0.0, b)).value
            out.append(Check("module by planar rectangle formula", expected, val, tol, "rel",
                             "published", "rectangle module a/b"))
    if "oracle" in levels:
        g = oracle.build_grid(oracle.rectangle_domain(a, b), a / P["n"])
        res = oracle.solve_modulus(g, oracle.DiscreteFamily.connecting(), p, _oracle_opts(P))
        out.append(Check("module by grid oracle", expected, res.value, ORACLE_TOL, "rel",
                         "published", "rectangle module a/b^(p-1)"))
        out.append(Check("grid oracle runtime [s]", 30.0, res.runtime, 0.0, "le", "trivial",
                         "runtime budget"))
    return out


@scenario("annulus", {"a": 1.0, "b": 2.0, "n": 150},
          help="radial segments and circles in the annulus a < |z| < b (p = 2)")
def _annulus(P, levels, tol):
    a, b = P["a"], P["b"]
    ring = planar.RingDomainSpec(b / a, planar.make_map("identity"))
    conn, sep = 2 * math.pi / math.log(b / a), math.log(b / a) / (2 * math.pi)
    out = []
    if "closed_form" in levels:
        ref = euclidean.closed_form_reference("spherical_ring", {"n": 2, "a": a, "b": b, "p": 2})
        out.append(Check("connecting module closed form", conn, ref.value, 1e-12, "rel",
                         "published", "annulus 2pi/log(b/a)"))
    if "quadrature" in levels:
        m1 = planar.annulus_radial_image_module(ring).value
        m2 = planar.annulus_circle_image_module(ring).value
        out += [Check("radial family module", conn, m1, tol, "rel", "published",
                      "annulus 2pi/log(b/a)"),
                Check("circle family module", sep, m2, tol, "rel", "published",
                      "annulus log(b/a)/2pi"),
                Check("conjugate product", 1.0, m1 * m2, tol, "abs", "published",
                      "conjugate families of a ring")]
    if "oracle" in levels:
        g = oracle.build_grid(oracle.annulus_domain(a, b), 2 * b / P["n"])
        res = oracle.solve_modulus(g, oracle.DiscreteFamily.connecting(), 2.0, _oracle_opts(P))
        out.append(Check("connecting module by grid oracle", conn, res.value, ORACLE_TOL, "rel",
                         "published", "annulus 2pi/log(b/a)"))
        sep_val = res.value ** -1.0
        out.append(Check("separating module by oracle duality", sep, sep_val, ORACLE_TOL, "rel",
                         "published", "annulus log(b/a)/2pi"))
    return out


@scenario("log-spiral", {"beta": 1.0, "b": 2.0},
          help="logarithmic spirals in the annulus 1 < |z| < b")
def _log_spiral(P, levels, tol):
    beta, b = P["beta"], P["b"]
    expected = 2 * math.pi / ((1 + beta ** 2) * math.log(b))
    ring = planar.RingDomainSpec(b, planar.make_map("identity"))
    out = []
    if levels & {"closed_form", "quadrature"}:
        out.append(Check("spiral module by dilatation quadrature", expected,
                         planar.log_spiral_image_module(ring, beta).value, max(tol, 1e-6), "rel",
                         "published", "spiral module 2pi/((1+beta^2) log b)"))
    if "quadrature" in levels:
        out.append(Check("spiral module by rectangle formula", expected,
                         planar.log_spiral_module_via_rectangle(ring, beta).value,
                         max(tol, 1e-6), "rel", "published",
                         "spiral module 2pi/((1+beta^2) log b)"))
    return out


@scenario("parallelogram", {"theta": math.pi / 3, "h": 1.0, "n": 100},
          help="parallelogram with vertices 0, 1, 1+h e^{i theta}, h e^{i theta}")
def _parallelogram(P, levels, tol):
    th, h = P["theta"], P["h"]
    rep = planar.parallelogram_bounds(th, h)
    slant = math.sin(th) / h
    out = []
    if "closed_form" in levels:
        out.append(Check("slanted segments module", slant, rep.slant_module, 1e-12, "rel",
                         "published", "slanted family sin(theta)/h"))
        out.append(Check("maximal dilatation exceeds 1/sin^2", 1 / math.sin(th) ** 2,
                         planar.shear_max_dilatation(th), 1e-12, "ge", "derived",
                         "K(theta) - 1/sin^2 = cot(sqrt(4+cot^2)-cot)/2"))
    if "quadrature" in levels:
        cot = 1 / math.tan(th)
        val = planar.rodin2d_module(lambda x, t: x + t * cot + 1j * t,
                                    (0.0, 1.0, 0.0, h * math.sin(th))).value
        out.append(Check("slanted module by rectangle formula", slant, val, tol, "rel",
                         "published", "slanted family sin(theta)/h"))
    if "oracle" in levels:
        g = oracle.build_grid(oracle.parallelogram_domain(th, h), 1.0 / P["n"])
        res = oracle.separating_module_2d(g, 2.0, _oracle_opts(P))
        out.append(Check("separating module in bracket", [rep.sigma0_module, h / math.sin(th)],
                         res.value, ORACLE_TOL, "within", "published",
                         "h sin(theta) <= M <= h sin(theta) + h cos^2(theta)/sin(theta)"))
        out.append(Check("separating module below reciprocal slanted module", 1 / slant,
                         res.value, ORACLE_TOL, "le", "published", "monotonicity"))
    return out


@scenario("shear-rate", {"eps": 0.2, "b": 1.0, "n": 100},
          help="parallelogram P(eps) = image of the 1-by-b rectangle under (x + eps t, t)")
def _shear_rate(P, levels, tol):
    eps, b = P["eps"], P["b"]
    out = []
    if levels & {"closed_form", "quadrature"}:
        out.append(Check("rate bound", eps * eps / b, planar.parallelogram_rate(eps, b), 1e-12,
                         "rel", "published", "|M(P(eps)) - M(Q)| <= eps^2/b"))
    if "oracle" in levels:
        th = math.atan2(b, eps)
        g = oracle.build_grid(oracle.parallelogram_domain(th, math.hypot(eps, b)), 1.0 / P["n"])
        res = oracle.separating_module_2d(g, 2.0, _oracle_opts(P))
        out.append(Check("conformal module near rectangle value", b, res.value,
                         eps * eps / b + ORACLE_TOL * b, "abs", "published",
                         "|M(P(eps)) - b| <= eps^2/b"))
    return out


@scenario("ring-bounds", {"b": 2.0, "map": "affine", "n": 120},
          strings=("map",), help="dilatation bounds on the conformal module of f(annulus)")
def _ring_bounds(P, levels, tol):
    b = P["b"]
    mp = {k: v for k, v in P.items() if k not in ("b", "map", "n", "stencil")}
    fmap = planar.make_map(P["map"], **mp)
    ring = planar.RingDomainSpec(b, fmap)
    bd = planar.ring_module_bounds(ring)
    out = []
    if levels & {"closed_form", "quadrature"}:
        out.append(Check("lower bound below upper bound", bd.upper, bd.lower, tol, "le",
                         "published", "two-sided dilatation estimate"))
        out.append(Check("upper bound below averaged dilatation bound", bd.cauchy_schwarz_upper,
                         bd.upper, tol, "le", "derived", "Cauchy-Schwarz"))
        if fmap.conformal:
            out.append(Check("bounds coincide for conformal maps", math.log(b) / (2 * math.pi),
                             bd.lower, tol, "rel", "published", "annulus log b/2pi"))
    if "oracle" in levels:
        inv, radius = planar.ring_image_inverse(P["map"], b, **mp)
        g = oracle.build_grid(oracle.ring_image_domain(inv, b, radius), 2 * radius / P["n"])
        res = oracle.separating_module_2d(g, 2.0, _oracle_opts(P))
        out.append(Check("oracle conformal module within bounds", [bd.lower, bd.upper],
                         res.value, ORACLE_TOL, "within", "published",
                         "two-sided dilatation estimate"))
    return out


def _euclidean_scenario(key, label):
    defaults = {"n": 2, "p": 2.0, "a": 1.0, "b": 2.0, "r": 2.0, "beta": 1.0, "width": 1.0}

    def run(P, levels, tol):
        params = dict(P)
        cond, fmap = euclidean.build_scenario(key, params)
        out = []
        if key == "conical_cylinder":
            val = euclidean.module_connecting(cond, fmap, P["p"]).value
            if int(P["n"]) == 2 and P["p"] == 2:
                ref = math.atan(P["beta"] * P["width"]) / math.log(P["b"] / P["a"])
                out.append(Check("module of rays in a planar sector", ref, val, tol, "rel",
                                 "derived", "sector angle / log(b/a)"))
            out.append(Check("module positive and finite", 0.0, val, 0.0, "ge", "trivial",
                             "definition"))
            return out
        ref = euclidean.closed_form_reference(key, params).value
        if levels & {"quadrature", "closed_form"}:
            val = euclidean.module_connecting(cond, fmap, P["p"]).value
            prov = "derived" if key == "sphere_twist" else "published"
            out.append(Check("fibre module vs closed form", ref, val, tol, "rel", prov, label))
        if "quadrature" in levels and key in ("shear_cylinder", "spherical_ring", "cylinder"):
            p = P["p"]
            q = p / (p - 1)
            mq = euclidean.module_separating(cond, fmap, q).value
            mp_ = euclidean.module_connecting(cond, fmap, p).value
            prod = mp_ ** q * mq ** p
            expected = (1 + P["beta"] ** 2) ** (-p * q / 2) if key == "shear_cylinder" else 1.0
            out.append(Check("conjugate product M_p^q M_q^p", expected, prod, tol, "rel",
                             "published", "duality of fibres and slices"))
        return out

    return run


for _key, _label in (("cylinder", "cylinder module"), ("shear_cylinder", "sheared cylinder module"),
                     ("spherical_ring", "spherical ring module"),
                     ("sphere_log_twist", "logarithmic twist module"),
                     ("sphere_twist", "radial twist module"),
                     ("conical_cylinder", "conical cylinder")):
    SCENARIOS[_key.replace("_", "-")] = Scenario(
        _euclidean_scenario(_key, _label),
        {"n": 2, "p": 2.0, "a": 1.0, "b": 2.0, "r": 2.0, "beta": 1.0, "width": 1.0},
        help=f"Euclidean condenser: {_label}")


def _ring_checks(G, p, a, b, levels, tol, expected=None, prov="derived", label=""):
    m = carnot.module_connecting_ring(G, p, a, b)
    exp = m.details["closed_form"] if expected is None else expected
    out = []
    if levels & {"closed_form", "quadrature"}:
        out.append(Check("ring module", exp, m.value, tol, "rel", prov, label))
    if "quadrature" in levels:
        rc = m.details["constants"]
        q = rc.q
        ms = carnot.module_separating_ring(G, q, a, b).value
        out += [Check("C_ab equals K_ab", rc.C_ab, rc.K_ab, 1e-10, "rel", "published",
                      "conjugate ring constants"),
                Check("C_S1 equals K_S1", rc.C_S1, rc.K_S1, 1e-10, "rel", "published",
                      "conjugate ring constants"),
                Check("M_p^(1/p) M_q^(1/q)", 1.0, m.value ** (1 / p) * ms ** (1 / q), 1e-10,
                      "abs", "published", "ring duality"),
                Check("capacity equals module", m.value,
                      carnot.capacity_check(G, p, a, b).cap_value, max(tol, 1e-8), "rel",
                      "published", "capacity of the ring")]
    return out


@scenario("heisenberg-ring", {"p": 4.0, "a": 1.0, "b": math.e},
          help="spherical ring a < N < b in the Heisenberg group")
def _heisenberg_ring(P, levels, tol):
    p, a, b = P["p"], P["a"], P["b"]
    G = carnot.get_group("heisenberg")
    if abs(p - 4) < 1e-12:
        exp = math.pi ** 2 / math.log(b / a) ** 3
        label = "pi^2/(log b)^3"
    else:
        e = (p - 4) / (p - 1)
        exp = carnot.heisenberg_constant(p) * (abs(b ** e - a ** e) / abs(e)) ** (1 - p)
        label = "Gamma-function ring module"
    out = _ring_checks(G, p, a, b, levels, tol, exp, "published", label)
    if "closed_form" in levels:
        out.append(Check("C_S1 quadrature vs Gamma form", carnot.heisenberg_constant(p),
                         carnot.ring_constants(G, p, a, b).C_S1, 1e-8, "rel", "published",
                         "2 pi sqrt(pi) G(p/4+1/2)/G(p/4+1)"))
    return out


@scenario("carnot-ring", {"group": "htype:4,1", "p": 3.0, "a": 1.0, "b": 2.0},
          strings=("group",), help="spherical ring in a registered group")
def _carnot_ring(P, levels, tol):
    G = carnot.get_group(P["group"])
    return _ring_checks(G, P["p"], P["a"], P["b"], levels, tol, None, "derived",
                        "Beta-function sphere constant")


@scenario("heisenberg-flow", {"theta": 0.3, "alpha": 0.7, "s1": 3.0},
          help="radial flow from a unit-sphere point of the Heisenberg group")
def _heisenberg_flow(P, levels, tol):
    G = carnot.get_group("heisenberg")
    th, al, s1 = P["theta"], P["alpha"], P["s1"]
    tr = carnot.radial_flow(G, carnot.SpherePoint(G, (th, al)), s1)
    end_err = float(np.max(np.abs(tr.final - carnot.heisenberg_flow_closed_form(th, al, s1))))
    norm_err = float(np.max(np.abs(G.norm(tr.states) - tr.samples)))
    speeds = [carnot.horizontal_speed(G, s, y) for s, y in zip(tr.samples, tr.states)]
    speed_err = max(abs(v * math.sqrt(math.cos(al)) - 1) for v in speeds)
    return [Check("endpoint vs closed-form flow", 0.0, end_err, 1e-9, "abs", "published",
                  "x(r) = r sqrt(cos a) e^{i(th - tan a log r)}, t = r^2 sin a"),
            Check("norm grows like s", 0.0, norm_err, 1e-8, "abs", "published",
                  "N(phi(s, xi)) = s N(xi)"),
            Check("horizontal speed times sqrt(cos a)", 0.0, speed_err, 1e-9, "abs",
                  "published", "|phi'|_0 = cos^(-1/2) a")]


@scenario("heisenberg-twist", {"p": 2.0, "b": 1 + math.pi / 4},
          help="twisted radial curves in the Heisenberg ring 1 < N < b")
def _heisenberg_twist(P, levels, tol):
    p, b = P["p"], P["b"]
    m = carnot.heisenberg_twist_module(p, b)
    out = [Check("twisted module below ring module", m.details["untwisted"], m.value, 0.0,
                 "le", "published", "monotonicity of the module"),
           Check("horizontality residual", 0.0,
                 carnot.twist_horizontality_residual(0.3, 0.2, b), 1e-9, "abs", "published",
                 "omega_1' = -omega_2'/2 - tan(alpha + omega_2)/r")]
    lo, hi = m.details["alpha_range"]
    for al in (lo + 0.2 * (hi - lo), 0.5 * (lo + hi), lo + 0.8 * (hi - lo)):
        out.append(Check(f"extremal density integrates to 1 (alpha={al:.3f})", 1.0,
                         carnot.twist_density_line_integral(p, b, 0.3, al), 1e-6, "abs",
                         "derived", "quadrature along the twisted curve"))
    return out


# --------------------------------------------------------------------------
# suites


def _suite_duality(tol):
    reports = []
    for name, P in (("annulus", {"b": math.e}), ("shear-cylinder", {"beta": 1.0, "p": 3.0}),
                    ("spherical-ring", {"n": 3, "p": 3.0}),
                    ("heisenberg-ring", {"p": 2.0, "b": 2.0}),
                    ("carnot-ring", {"group": "htype:4,2", "p": 2.5}),
                    ("carnot-ring", {"group": "euclidean:3", "p": 2.0})):
        reports.append(run_scenario(name, P, "quadrature", tol))
    G = carnot.get_group("heisenberg")
    r = RunReport("pointwise density relation", {"p": 3.0, "a": 1.0, "b": 2.0}, "quadrature")
    conn = carnot.extremal_density_ring(G, 3.0, 1.0, 2.0, "connecting")
    sep = carnot.extremal_density_ring(G, 3.0, 1.0, 2.0, "separating")
    rc = conn.constants
    rng = np.random.default_rng(7)
    pts = rng.uniform(-1.2, 1.2, size=(200, 3))
    N = G.norm(pts)
    pts = pts[(N > 1.05) & (N < 1.95)][:40]
    lhs = sep(pts)
    rhs = rc.C_ab ** (rc.p - 1) / rc.C_S1 * conn(pts) ** (rc.p - 1)
    r.checks.append(Check("rho_0 = C_ab^(p-1) C_S1^-1 varrho_0^(p-1)", 0.0,
                          float(np.max(np.abs(lhs - rhs) / np.abs(rhs))), 1e-8, "abs",
                          "published", "conjugate extremal densities"))
    reports.append(r)
    return reports


def _vertical_segments(k, h):
    xs = (np.arange(k) + 0.5) / k
    return [core.Polyline([[x, 0.5 * h], [x, 2 - 0.5 * h]]) for x in xs]


def _suite_monotonicity(tol):
    r = RunReport("oracle monotonicity", {"grid": "rectangle 1x2, 40x80 cells"}, "oracle")
    g = oracle.build_grid(oracle.rectangle_domain(1.0, 2.0), 1 / 40)
    h = g.h
    fam_a = _vertical_segments(4, h)
    fam_small = fam_a[:1]
    fam_b = [core.Polyline([[0.1, 0.5 * h], [0.9, 2 - 0.5 * h]]),
             core.Polyline([[0.9, 0.5 * h], [0.1, 2 - 0.5 * h]])]
    solve = lambda fam: oracle.solve_modulus(g, oracle.DiscreteFamily.explicit(fam), 2.0).value
    m_small, m_a, m_b, m_ab = solve(fam_small), solve(fam_a), solve(fam_b), solve(fam_a + fam_b)
    full = oracle.solve_modulus(g, oracle.DiscreteFamily.connecting(), 2.0).value
    r.checks += [
        Check("subfamily has smaller module", m_a, m_small, 1e-9, "le", "published",
              "monotonicity"),
        Check("union dominates each part", m_ab, max(m_a, m_b), 1e-9, "le", "published",
              "monotonicity"),
        Check("union below sum", m_a + m_b, m_ab, 1e-9, "le", "published", "subadditivity"),
        Check("explicit family below full family", full, m_ab, 1e-6, "le", "published",
              "monotonicity")]
    tw = run_scenario("heisenberg-twist", {"p": 4.0}, "quadrature", tol)
    return [r, tw]


def _rect_sampler(a, b):
    return core.CurveFamilySampler(lambda x: core.Polyline([[x, 0.0], [x, b]]), [(0.0, a)],
                                   "rectangle")


def _suite_extremality(tol):
    reports = []
    a, b = 1.0, 2.0
    region = core.rectangle(0.0, a, 0.0, b)
    fam = _rect_sampler(a, b)
    s = lambda pts: np.sin(2 * math.pi * pts[..., 1] / b)
    perts = [("+sin", lambda pts: s(pts) / b), ("-sin", lambda pts: -s(pts) / b),
             ("+1", lambda pts: np.ones(pts.shape[:-1])),
             ("+x", lambda pts: pts[..., 0])]
    rho0 = core.DensityField.constant(1 / b, ((0.0, a), (0.0, b)), 2.0)
    rep = core.check_extremality(rho0, fam, perts, region=region)
    r = RunReport("rectangle extremal density", {"a": a, "b": b}, "quadrature")
    r.checks.append(Check("extremal density passes all perturbations", 1.0, float(rep.passed),
                          0.0, "abs", "published", "perturbation criterion"))
    bad = core.DensityField.from_function(lambda pts: (1 + 0.1 * s(pts)) / b,
                                          ((0.0, a), (0.0, b)), 2.0)
    rep_bad = core.check_extremality(bad, fam, perts, region=region)
    r.checks.append(Check("10% perturbed density is rejected", 1.0, float(rep_bad.any_failed),
                          0.0, "abs", "derived", "perturbation criterion"))
    reports.append(r)

    bb = 2.0
    ring = core.annulus(1.0, bb)
    fam_r = core.CurveFamilySampler(
        lambda th: core.Polyline([[math.cos(th), math.sin(th)], [bb * math.cos(th),
                                                                   bb * math.sin(th)]]),
        [(0.0, 2 * math.pi)], "annulus")
    rad = lambda pts: np.hypot(pts[..., 0], pts[..., 1])
    rho_r = core.DensityField.from_function(lambda pts: 1 / (rad(pts) * math.log(bb)),
                                            ((-bb, bb), (-bb, bb)), 2.0)
    wave = lambda pts: np.sin(2 * math.pi * np.log(rad(pts)) / math.log(bb)) / rad(pts)
    rep_r = core.check_extremality(rho_r, fam_r, [("+wave", wave),
                                                  ("-wave", lambda pts: -wave(pts)),
                                                  ("+1", lambda pts: np.ones(pts.shape[:-1]))],
                                   region=ring)
    r2 = RunReport("annulus extremal density", {"b": bb}, "quadrature")
    r2.checks.append(Check("radial extremal density passes", 1.0, float(rep_r.passed), 0.0,
                           "abs", "published", "perturbation criterion"))
    reports.append(r2)
    return reports


def _suite_carnot(tol):
    reports = [run_scenario("heisenberg-ring", {"p": 4.0, "b": math.e}, "all", tol),
               run_scenario("heisenberg-flow", {}, "all", tol),
               run_scenario("heisenberg-twist", {"p": 2.0}, "all", tol)]
    G = carnot.get_group("heisenberg")
    r = RunReport("Heisenberg sphere", {}, "quadrature")
    r.checks.append(Check("sphere area", 4 * math.sqrt(2 * math.pi) * math.gamma(0.75) ** 2,
                          carnot.sphere_area(G), 1e-8, "rel", "published",
                          "4 sqrt(2 pi) Gamma(3/4)^2"))
    for p in (2.0, 3.0, 4.0, 6.0):
        r.checks.append(Check(f"C_S1({p:g})", carnot.heisenberg_constant(p),
                              carnot.ring_constants(G, p, 1.0, 2.0).C_S1, 1e-8, "rel",
                              "published", "2 pi sqrt(pi) G(p/4+1/2)/G(p/4+1)"))
    amb, sph = carnot.ring_volume(G, 1.0, 2.0)
    r.checks.append(Check("ring volume two ways", sph, amb, 1e-6, "rel", "derived",
                          "spherical integration formula"))
    ratio = (carnot.htype_constant_printed(2, 1, 4.0) / carnot.htype_constant_derived(2, 1, 4.0))
    r.notes["alternative H-type constant / derived, k=2, l=1, p=4"] = ratio
    reports.append(r)
    return reports


SUITES = {"duality": _suite_duality, "monotonicity": _suite_monotonicity,
          "extremality": _suite_extremality, "carnot": _suite_carnot}


def run_suite(name: str, tol: float | None = None) -> list[RunReport]:
    tol = default_tolerance() if tol is None else tol
    if name == "all":
        out = []
        for fn in SUITES.values():
            out += fn(tol)
        return out
    if name not in SUITES:
        raise ScenarioError(f"unknown suite {name!r}; known: {sorted(SUITES) + ['all']}")
    return SUITES[name](tol)


# --------------------------------------------------------------------------
# runner


def resolve_params(name: str, overrides: dict) -> dict:
    if name not in SCENARIOS:
        raise ScenarioError(f"unknown scenario {name!r}; known: {sorted(SCENARIOS)}")
    sc = SCENARIOS[name]
    P = dict(sc.defaults)
    for k, v in overrides.items():
        if k in sc.strings:
            P[k] = str(v)
        else:
            try:
                P[k] = float(v)
            except (TypeError, ValueError):
                raise ScenarioError(f"parameter {k!r} must be a number, got {v!r}") from None
    missing = [k for k in sc.required if k not in P]
    if missing:
        raise ScenarioError(f"missing parameters for {name}: {missing}")
    return P


def run_scenario(name: str, overrides: dict | None = None, level: str = "quadrature",
                 tol: float | None = None) -> RunReport:
    if level not in LEVELS:
        raise ScenarioError(f"level must be one of {LEVELS}")
    tol = default_tolerance() if tol is None else tol
    P = resolve_params(name, overrides or {})
    t0 = time.perf_counter()
    checks = SCENARIOS[name].run(P, _levels(level), tol)
    return RunReport(name, P, level, checks, time.perf_counter() - t0)


def _parse_overrides(tokens: list[str]) -> dict:
    out = {}
    it = iter(tokens)
    for tok in it:
        if not tok.startswith("--"):
            raise ScenarioError(f"unexpected argument {tok!r}")
        key = tok[2:]
        if "=" in key:
            key, val = key.split("=", 1)
        else:
            try:
                val = next(it)
            except StopIteration:
                raise ScenarioError(f"option --{key} needs a value") from None
        out[key] = val
    return out


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pmodulus",
                                 description="p-module scenarios, invariant suites and grid solver")
    sub = ap.add_subparsers(dest="command", required=True)

    sc = sub.add_parser("scenario", help="run a named scenario")
    scs = sc.add_subparsers(dest="action", required=True)
    run = scs.add_parser("run", help="run a scenario; extra --key value pairs set parameters")
    run.add_argument("name")
    run.add_argument("--level", default="quadrature", choices=LEVELS)
    run.add_argument("--format", default="json", choices=("json", "csv"))
    run.add_argument("--config", help="JSON file with parameter values")
    run.add_argument("--output", help="write the report to this file")
    run.add_argument("--tol", type=float, help="tolerance for quadrature checks")
    scs.add_parser("list", help="list scenarios and their defaults")

    su = sub.add_parser("suite", help="run an invariant suite")
    su.add_argument("name", choices=sorted(SUITES) + ["all"])
    su.add_argument("--format", default="json", choices=("json", "csv"))
    su.add_argument("--output")
    su.add_argument("--tol", type=float)

    orc = sub.add_parser("oracle", help="grid solver")
    os_ = orc.add_subparsers(dest="action", required=True)
    solve = os_.add_parser("solve", help="solve on a grid, e.g. rectangle:a=1,b=2,n=100")
    solve.add_argument("grid_spec")
    solve.add_argument("--p", type=float, default=2.0)
    solve.add_argument("--separating", action="store_true",
                       help="report the separating module with exponent q = p/(p-1)")
    solve.add_argument("--stencil", type=int, default=48, choices=sorted(oracle.STENCILS))
    solve.add_argument("--tol", type=float, default=5e-3)
    solve.add_argument("--max-iter", type=int, default=200)
    solve.add_argument("--expected", type=float, help="compare with this value")
    solve.add_argument("--rel-tol", type=float, default=ORACLE_TOL)
    solve.add_argument("--format", default="json", choices=("json", "csv"))

    sw = sub.add_parser("sweep", help="CSV plot data: parameter, value, lower_bound, upper_bound")
    sw.add_argument("name", choices=("ring-bounds", "parallelogram"))
    sw.add_argument("--param", required=True)
    sw.add_argument("--start", type=float, required=True)
    sw.add_argument("--stop", type=float, required=True)
    sw.add_argument("--steps", type=int, default=5)
    sw.add_argument("--map", default="affine")
    sw.add_argument("--b", type=float, default=2.0)
    sw.add_argument("--h", type=float, default=1.0)
    sw.add_argument("--oracle", action="store_true", help="fill the value column with the oracle")
    sw.add_argument("--n", type=int, default=120)
    sw.add_argument("--stencil", type=int, default=48, choices=sorted(oracle.STENCILS))
    return ap


def _emit(text: str, output: str | None):
    if output:
        with open(output, "w") as fh:
            fh.write(text + ("" if text.endswith("\n") else "\n"))
    else:
        sys.stdout.write(text + ("" if text.endswith("\n") else "\n"))


def _sweep(args) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["parameter", "value", "lower_bound", "upper_bound"])
    opts = oracle.OracleOptions(stencil=args.stencil)
    for v in np.linspace(args.start, args.stop, args.steps):
        v = float(v)
        if args.name == "ring-bounds":
            fm = planar.make_map(args.map, **{args.param: v})
            bd = planar.ring_module_bounds(planar.RingDomainSpec(args.b, fm))
            lo, hi, val = bd.lower, bd.upper, ""
            if args.oracle:
                inv, rad = planar.ring_image_inverse(args.map, args.b, **{args.param: v})
                g = oracle.build_grid(oracle.ring_image_domain(inv, args.b, rad), 2 * rad / args.n)
                val = oracle.separating_module_2d(g, 2.0, opts).value
        else:
            if args.param != "theta":
                raise ScenarioError("parallelogram sweeps run over theta")
            rep = planar.parallelogram_bounds(v, args.h)
            lo, hi, val = rep.sigma0_module, args.h / math.sin(v), ""
            if args.oracle:
                g = oracle.build_grid(oracle.parallelogram_domain(v, args.h), 1.0 / args.n)
                val = oracle.separating_module_2d(g, 2.0, opts).value
        w.writerow([v, val, lo, hi])
    return buf.getvalue()


def main(argv: list[str] | None = None) -> int:
    ap = _build_parser()
    args, extra = ap.parse_known_args(argv)
    try:
        if args.command == "scenario" and args.action == "list":
            if extra:
                raise ScenarioError(f"unexpected arguments {extra}")
            for name in sorted(SCENARIOS):
                sc = SCENARIOS[name]
                print(f"{name:18s} {sc.help}  defaults={_jsonable(sc.defaults)}")
            return 0
        if args.command == "scenario":
            overrides = {}
            if args.config:
                with open(args.config) as fh:
                    cfg = json.load(fh)
                if not isinstance(cfg, dict):
                    raise ScenarioError("config file must hold a JSON object")
                overrides.update(cfg)
            overrides.update(_parse_overrides(extra))
            rep = run_scenario(args.name, overrides, args.level, args.tol)
            _emit(render([rep], args.format), args.output)
            return 0 if rep.passed else 1
        if extra:
            raise ScenarioError(f"unexpected arguments {extra}")
        if args.command == "suite":
            reps = run_suite(args.name, args.tol)
            _emit(render(reps, args.format), args.output)
            return 0 if all(r.passed for r in reps) else 1
        if args.command == "oracle":
            grid, info = oracle.parse_grid_spec(args.grid_spec)
            opts = oracle.OracleOptions(tol=args.tol, max_iter=args.max_iter,
                                        stencil=args.stencil)
            if args.separating:
                res = oracle.separating_module_2d(grid, args.p / (args.p - 1), opts)
            else:
                res = oracle.solve_modulus(grid, oracle.DiscreteFamily.connecting(), args.p, opts)
            rep = RunReport("oracle " + args.grid_spec, info, "oracle", seconds=res.runtime)
            rep.notes = {"value": res.value, "upper": res.upper, "gap": res.gap,
                         "active_constraints": res.active_constraints,
                         "iterations": res.iterations, "converged": res.converged,
                         "cells": grid.n_cells}
            rep.checks.append(Check("solver converged", 1.0, float(res.converged), 0.0, "abs",
                                    "trivial", "stopping rule"))
            if args.expected is not None:
                rep.checks.append(Check("oracle value", args.expected, res.value, args.rel_tol,
                                        "rel", "trivial", "user supplied"))
            _emit(render([rep], args.format), None)
            return 0 if rep.passed else 1
        if args.command == "sweep":
            _emit(_sweep(args), None)
            return 0
    except (ScenarioError, KeyError, ValueError, ArithmeticError, oracle.OracleError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
