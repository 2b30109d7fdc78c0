"""Discrete p-modulus solver on planar grids.

Densities are piecewise constant on square cells.  Curves are paths in the
graph whose vertices are cell centres and whose edges join centres along a
fixed stencil of directions; each edge is charged the exact length it spends
in every cell it crosses.  A path starting or ending next to a plate is
extended to that plate by the distance from the end cell's centre to the
plate level set.

The modulus ``min sum m rho^p`` subject to ``int_gamma rho >= 1`` is solved by
constraint generation: the active curves are kept as rows of a sparse matrix,
the smooth concave dual over their multipliers is maximized with L-BFGS-B, and
shortest-path searches under the current density add the most violated curves.
The dual value is a lower bound for the discrete modulus of the active set and
the rescaled primal density gives an upper bound for the full family.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.optimize import minimize
from scipy.sparse.csgraph import dijkstra

from .core import DensityField, Polyline, grid_segment_lengths

log = logging.getLogger(__name__)

__all__ = [
    "PlateDomain",
    "Grid",
    "DiscreteFamily",
    "OracleOptions",
    "OracleResult",
    "OracleError",
    "DisconnectedPlatesError",
    "build_grid",
    "rectangle_domain",
    "annulus_domain",
    "parallelogram_domain",
    "ring_image_domain",
    "solve_modulus",
    "separating_module_2d",
    "shortest_rho_path",
    "parse_grid_spec",
]


class OracleError(RuntimeError):
    pass


class DisconnectedPlatesError(OracleError):
    pass


# --------------------------------------------------------------------------
# domains


@dataclass(frozen=True)
class PlateDomain:
    """Planar region ``{lo < phi < hi}`` intersected with ``inside``.

    The plates are the parts of the level sets ``phi = lo`` and ``phi = hi``
    on the boundary; the remaining boundary (where ``inside`` fails) is free.
    ``phi`` and ``inside`` take arrays ``x, y``.
    """

    phi: Callable
    lo: float
    hi: float
    bbox: tuple
    inside: Callable | None = None
    name: str = "domain"

    def contains(self, x, y):
        v = self.phi(x, y)
        ok = (v > self.lo) & (v < self.hi)
        if self.inside is not None:
            ok &= self.inside(x, y)
        return ok


def rectangle_domain(a: float, b: float) -> PlateDomain:
    """``[0, a] x [0, b]`` with plates on the horizontal sides (length ``a``)."""
    return PlateDomain(lambda x, y: y, 0.0, b, (0.0, a, 0.0, b),
                       lambda x, y: (x > 0) & (x < a), "rectangle")


def annulus_domain(r0: float, r1: float) -> PlateDomain:
    return PlateDomain(lambda x, y: np.hypot(x, y), r0, r1, (-r1, r1, -r1, r1), None, "annulus")


def parallelogram_domain(theta: float, h: float) -> PlateDomain:
    """Vertices ``0, 1, 1 + h e^{i theta}, h e^{i theta}``; plates on the horizontal sides."""
    c, s = math.cos(theta), math.sin(theta)
    cot = c / s
    xs = (0.0, 1.0, h * c, 1.0 + h * c)
    return PlateDomain(lambda x, y: y, 0.0, h * s, (min(xs), max(xs), 0.0, h * s),
                       lambda x, y: (x - y * cot > 0) & (x - y * cot < 1), "parallelogram")


def ring_image_domain(inverse: Callable, b: float, radius: float) -> PlateDomain:
    """Image of the annulus ``1 < |z| < b`` under a homeomorphism given by its
    inverse (complex array to complex array); ``radius`` bounds the image."""
    return PlateDomain(lambda x, y: np.abs(inverse(x + 1j * y)), 1.0, b,
                       (-radius, radius, -radius, radius), None, "ring_image")


# --------------------------------------------------------------------------
# grid and stencil


STENCILS = {8: 1, 16: 2, 32: 3, 48: 4, 80: 5}


def _stencil(size: int):
    """Half-set of primitive offsets with max-norm <= radius (8 to 80 neighbours)."""
    radius = STENCILS.get(size)
    if radius is None:
        raise ValueError(f"stencil must be one of {sorted(STENCILS)}")
    offs = []
    for a in range(0, radius + 1):
        for b in range(-radius, radius + 1):
            if (a, b) == (0, 0) or math.gcd(a, abs(b)) != 1:
                continue
            if a == 0 and b < 0:
                continue
            offs.append((a, b))
    return offs


def _offset_cells(off, h):
    """Cells (relative to the start cell) crossed by the segment between centres."""
    R = 6
    origin = (-R * h, -R * h)
    start = (0.5 * h, 0.5 * h)
    end = (start[0] + off[0] * h, start[1] + off[1] * h)
    i, j, ln = grid_segment_lengths(start, end, origin, h, (2 * R + 1, 2 * R + 1))
    return i - R, j - R, ln


@dataclass
class Grid:
    """Square cells of side ``h`` covering a domain, with plate bookkeeping."""

    origin: tuple
    h: float
    shape: tuple
    mask: np.ndarray
    plate0: np.ndarray = field(repr=False)
    plate1: np.ndarray = field(repr=False)
    d0: np.ndarray = field(repr=False)
    d1: np.ndarray = field(repr=False)
    domain: PlateDomain | None = None
    dimension: int = 2

    @property
    def m_cell(self) -> float:
        return self.h * self.h

    @property
    def n_cells(self) -> int:
        return int(self.mask.sum())

    def centres(self):
        i, j = np.nonzero(self.mask)
        return (self.origin[0] + (i + 0.5) * self.h, self.origin[1] + (j + 0.5) * self.h)

    def to_field(self, rho_masked: np.ndarray, p: float) -> DensityField:
        vals = np.zeros(self.shape)
        vals[self.mask] = rho_masked
        return DensityField.from_grid(vals, self.origin, self.h, p)


def build_grid(domain: PlateDomain, h: float) -> Grid:
    """Cells whose centres lie in the domain; plate cells are those with a
    4-neighbour centre across a plate, and their distance to the plate is
    estimated from ``phi`` and its gradient."""
    x0, x1, y0, y1 = domain.bbox
    nx = max(1, int(round((x1 - x0) / h)))
    ny = max(1, int(round((y1 - y0) / h)))
    cx = x0 + (np.arange(nx) + 0.5) * h
    cy = y0 + (np.arange(ny) + 0.5) * h
    X, Y = np.meshgrid(cx, cy, indexing="ij")
    mask = domain.contains(X, Y)
    if not mask.any():
        raise OracleError("grid contains no cells of the domain")
    phi = domain.phi(X, Y)

    def plate_cells(level, below):
        hit = np.zeros_like(mask)
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            Xn, Yn = X + di * h, Y + dj * h
            pn = domain.phi(Xn, Yn)
            sn = np.ones_like(mask) if domain.inside is None else domain.inside(Xn, Yn)
            hit |= ((pn <= level) if below else (pn >= level)) & sn
        return hit & mask

    e = 1e-3 * h
    gx = (domain.phi(X + e, Y) - domain.phi(X - e, Y)) / (2 * e)
    gy = (domain.phi(X, Y + e) - domain.phi(X, Y - e)) / (2 * e)
    gnorm = np.maximum(np.hypot(gx, gy), 1e-300)
    p0 = plate_cells(domain.lo, True)
    p1 = plate_cells(domain.hi, False)
    d0 = np.clip((phi - domain.lo) / gnorm, 0.0, h)
    d1 = np.clip((domain.hi - phi) / gnorm, 0.0, h)
    return Grid((x0, y0), h, (nx, ny), mask, p0, p1, d0, d1, domain)


# --------------------------------------------------------------------------
# families and results


@dataclass
class DiscreteFamily:
    """``connecting`` (plates taken from the grid) or ``explicit`` polylines."""

    kind: str = "connecting"
    curves: Sequence[Polyline] = ()

    def __post_init__(self):
        if self.kind not in ("connecting", "explicit"):
            raise ValueError("kind must be 'connecting' or 'explicit'")
        if self.kind == "explicit" and not self.curves:
            raise ValueError("explicit family needs at least one curve")

    @classmethod
    def connecting(cls):
        return cls("connecting")

    @classmethod
    def explicit(cls, curves):
        return cls("explicit", tuple(curves))


@dataclass(frozen=True)
class OracleOptions:
    tol: float = 5e-3
    max_iter: int = 200
    paths_per_iter: int = 400
    stencil: int = 32
    inner_tol: float = 1e-10
    prune_above: int = 2000


@dataclass
class OracleResult:
    value: float
    upper: float
    gap: float
    active_constraints: int
    iterations: int
    converged: bool
    min_path_integral: float
    runtime: float
    rho: DensityField | None = field(default=None, repr=False)
    p: float = 2.0
    details: dict = field(default_factory=dict, repr=False)


# --------------------------------------------------------------------------
# graph


class _CellGraph:
    def __init__(self, grid: Grid, stencil: int):
        self.grid = grid
        idx = -np.ones(grid.shape, dtype=np.int64)
        ci, cj = np.nonzero(grid.mask)
        idx[ci, cj] = np.arange(ci.size)
        self.idx, self.ci, self.cj = idx, ci, cj
        n = ci.size
        self.n = n
        self.offsets = _stencil(stencil)
        rows, cols, e_rows, e_cells, e_lens, e_off = [], [], [], [], [], []
        self.edge_of = -np.ones((n, len(self.offsets)), dtype=np.int64)
        n_edges = 0
        nx, ny = grid.shape
        for k, off in enumerate(self.offsets):
            di, dj, ln = _offset_cells(off, grid.h)
            ti, tj = ci + off[0], cj + off[1]
            ok = (ti >= 0) & (ti < nx) & (tj >= 0) & (tj < ny)
            for a, b in zip(di, dj):
                ii, jj = ci + a, cj + b
                inb = (ii >= 0) & (ii < nx) & (jj >= 0) & (jj < ny)
                ok &= inb
                ok[inb] &= grid.mask[ii[inb], jj[inb]]
            src = np.nonzero(ok)[0]
            dst = idx[ti[src], tj[src]]
            eids = n_edges + np.arange(src.size)
            self.edge_of[src, k] = eids
            n_edges += src.size
            rows.append(src)
            cols.append(dst)
            for a, b, l in zip(di, dj, ln):
                e_rows.append(eids)
                e_cells.append(idx[ci[src] + a, cj[src] + b])
                e_lens.append(np.full(src.size, l))
        self.n_edges = n_edges
        self.E = sp.csr_matrix((np.concatenate(e_lens), (np.concatenate(e_rows),
                                np.concatenate(e_cells))), shape=(n_edges, n))
        self.src = np.concatenate(rows)
        self.dst = np.concatenate(cols)
        self.p0 = np.nonzero(grid.plate0[ci, cj])[0]
        self.p1 = np.nonzero(grid.plate1[ci, cj])[0]
        if self.p0.size == 0 or self.p1.size == 0:
            raise DisconnectedPlatesError("a plate has no cells at this resolution")
        self.d0 = grid.d0[ci, cj][self.p0]
        self.d1 = grid.d1[ci, cj][self.p1]
        sink = n
        r = np.concatenate([self.src, self.p1])
        c = np.concatenate([self.dst, np.full(self.p1.size, sink)])
        order = np.arange(r.size, dtype=float) + 1
        G = sp.csr_matrix((order, (r, c)), shape=(n + 1, n + 1))
        self.perm = G.data.astype(np.int64) - 1
        self.G = G
        self.off_index = {off: k for k, off in enumerate(self.offsets)}

    def edge_weights(self, rho):
        w = self.E @ rho
        w1 = rho[self.p1] * self.d1
        return np.concatenate([w, w1])

    def shortest(self, rho):
        """Distances to the far plate and predecessor tree rooted at it."""
        self.G.data = self.edge_weights(rho)[self.perm]
        dist, pred = dijkstra(self.G, directed=False, indices=self.n, return_predecessors=True)
        return dist, pred

    def path_nodes(self, start, pred):
        nodes = [start]
        v = start
        while True:
            v = pred[v]
            if v < 0:
                raise DisconnectedPlatesError("no path between plates")
            if v == self.n:
                return nodes
            nodes.append(v)

    def path_row(self, nodes):
        """Cell indices and lengths of a node path, including plate extensions."""
        nodes = np.asarray(nodes)
        u, v = nodes[:-1], nodes[1:]
        di = self.ci[v] - self.ci[u]
        dj = self.cj[v] - self.cj[u]
        eids = np.empty(u.size, dtype=np.int64)
        for m in range(u.size):
            k = self.off_index.get((int(di[m]), int(dj[m])))
            if k is not None:
                eids[m] = self.edge_of[u[m], k]
            else:
                eids[m] = self.edge_of[v[m], self.off_index[(-int(di[m]), -int(dj[m]))]]
        sub = self.E[eids]
        cells = [sub.indices]
        lens = [sub.data]
        first, last = nodes[0], nodes[-1]
        k0 = np.searchsorted(self.p0, first)
        k1 = np.searchsorted(self.p1, last)
        cells.append(np.array([first, last]))
        lens.append(np.array([self.d0[k0], self.d1[k1]]))
        return np.concatenate(cells), np.concatenate(lens)

    def polyline(self, nodes):
        """Centres of the path cells, extended to both plates along ``grad phi``."""
        g = self.grid
        h, (x0, y0) = g.h, g.origin
        pts = np.stack([x0 + (self.ci[nodes] + 0.5) * h, y0 + (self.cj[nodes] + 0.5) * h], axis=1)
        phi, e = g.domain.phi, 1e-3 * h

        def unit_grad(pt):
            gx = (phi(pt[0] + e, pt[1]) - phi(pt[0] - e, pt[1])) / (2 * e)
            gy = (phi(pt[0], pt[1] + e) - phi(pt[0], pt[1] - e)) / (2 * e)
            v = np.array([gx, gy], dtype=float)
            return v / max(np.linalg.norm(v), 1e-300)

        first, last = nodes[0], nodes[-1]
        d0 = self.d0[np.searchsorted(self.p0, first)]
        d1 = self.d1[np.searchsorted(self.p1, last)]
        start = pts[0] - d0 * unit_grad(pts[0])
        end = pts[-1] + d1 * unit_grad(pts[-1])
        return Polyline(np.vstack([start, pts, end]))


# --------------------------------------------------------------------------
# inner problem


def _dual_solve(A, m, p, lam0, tol):
    """Maximize ``sum lam - (p-1) sum m rho^p`` with ``rho = (A^T lam / (p m))^(1/(p-1))``."""
    AT = A.T.tocsr()
    e = 1.0 / (p - 1)

    def rho_of(lam):
        return (np.maximum(AT @ lam, 0.0) / (p * m)) ** e

    def negdual(lam):
        rho = rho_of(lam)
        val = lam.sum() - (p - 1) * m * np.sum(rho ** p)
        grad = 1.0 - A @ rho
        return -val, -grad

    res = minimize(negdual, lam0, jac=True, method="L-BFGS-B",
                   bounds=[(0.0, None)] * lam0.size,
                   options={"maxiter": 5000, "ftol": tol, "gtol": 1e-9, "maxcor": 10})
    lam = res.x
    return lam, rho_of(lam), -res.fun


def _energy(rho, m, p):
    return float(m * np.sum(rho ** p))


def _explicit_rows(grid: Grid, curves):
    idx = -np.ones(grid.shape, dtype=np.int64)
    ci, cj = np.nonzero(grid.mask)
    idx[ci, cj] = np.arange(ci.size)
    rows, cols, vals = [], [], []
    for r, curve in enumerate(curves):
        V = curve.vertices
        for a, b in zip(V[:-1], V[1:]):
            i, j, ln = grid_segment_lengths(a, b, grid.origin, grid.h, grid.shape)
            cells = idx[i, j]
            if np.any(cells < 0) or (ln.sum() < np.hypot(*(b - a)) * (1 - 1e-9)):
                raise OracleError(f"curve {r} leaves the grid mask")
            rows.append(np.full(cells.size, r))
            cols.append(cells)
            vals.append(ln)
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(len(curves), ci.size))


# --------------------------------------------------------------------------
# public solvers


def solve_modulus(grid: Grid, family: DiscreteFamily, p: float,
                  opts: OracleOptions | None = None) -> OracleResult:
    """Discrete p-modulus of a curve family on ``grid``."""
    if not p > 1:
        raise ValueError("p must exceed 1")
    opts = opts or OracleOptions()
    t_start = time.perf_counter()
    m = grid.m_cell
    if family.kind == "explicit":
        A = _explicit_rows(grid, family.curves)
        lam, rho, lower = _dual_solve(A, m, p, np.ones(A.shape[0]) * 1e-3, opts.inner_tol)
        lmin = float(np.min(A @ rho))
        upper = _energy(rho, m, p) / lmin ** p if lmin > 0 else math.inf
        return OracleResult(lower, upper, max(upper - lower, 0.0), int(np.sum(lam > 0)), 1,
                            True, lmin, time.perf_counter() - t_start, grid.to_field(rho, p), p)

    graph = _CellGraph(grid, opts.stencil)
    n = graph.n
    rows_c, rows_l = [], []
    seen, keys = set(), []
    rho = np.ones(n)
    lam = np.zeros(0)
    lower, upper = 0.0, math.inf
    best_rho, lmin = rho, 0.0
    converged = False
    it = 0
    for it in range(1, opts.max_iter + 1):
        dist, pred = graph.shortest(rho)
        costs = dist[graph.p0] + rho[graph.p0] * graph.d0
        if not np.all(np.isfinite(costs)):
            raise DisconnectedPlatesError("plates are not connected inside the grid")
        lmin = float(costs.min())
        if lam.size and lmin > 0:
            cand = _energy(rho, m, p) / lmin ** p
            if cand < upper:
                upper, best_rho = cand, rho / lmin
        if lam.size and lmin >= 1 - opts.tol:
            converged = True
            break
        order = np.argsort(costs)
        added = 0
        for k in order:
            if lam.size and costs[k] >= 1 - opts.tol:
                break
            nodes = graph.path_nodes(int(graph.p0[k]), pred)
            key = hash(tuple(nodes))
            if key in seen:
                continue
            seen.add(key)
            keys.append(key)
            c, l = graph.path_row(nodes)
            rows_c.append(c)
            rows_l.append(l)
            added += 1
            if added >= opts.paths_per_iter:
                break
        if added == 0:
            converged = lmin >= 1 - opts.tol
            break
        K = len(rows_c)
        A = sp.csr_matrix((np.concatenate(rows_l),
                           (np.repeat(np.arange(K), [c.size for c in rows_c]),
                            np.concatenate(rows_c))), shape=(K, n))
        lam0 = np.concatenate([lam, np.full(K - lam.size, lam.mean() if lam.size else 1e-3)])
        lam, rho, lower = _dual_solve(A, m, p, lam0, opts.inner_tol)
        if K > opts.prune_above:
            keep = np.nonzero(lam > 0)[0]
            rows_c = [rows_c[i] for i in keep]
            rows_l = [rows_l[i] for i in keep]
            seen.difference_update(keys[i] for i in np.nonzero(lam <= 0)[0])
            keys = [keys[i] for i in keep]
            lam = lam[keep]
        log.debug("iteration %d: %d curves, min path %.6f, bounds [%.8g, %.8g]",
                  it, K, lmin, lower, upper)
    active = int(np.sum(lam > 1e-14 * max(lam.max(initial=0.0), 1e-300)))
    return OracleResult(lower, upper, max(upper - lower, 0.0), active, it, converged, lmin,
                        time.perf_counter() - t_start, grid.to_field(best_rho, p), p,
                        {"curves": len(rows_c), "cells": n, "stencil": opts.stencil})


def separating_module_2d(grid: Grid, q: float, opts: OracleOptions | None = None) -> OracleResult:
    """Module of the separating sets through the conjugate connecting family:
    ``M_q = M_p^(-q/p)`` with ``1/p + 1/q = 1``."""
    if not q > 1:
        raise ValueError("q must exceed 1")
    p = q / (q - 1)
    res = solve_modulus(grid, DiscreteFamily.connecting(), p, opts)
    val = res.value ** (-q / p)
    hi = res.upper ** (-q / p)
    return OracleResult(val, val, max(val - hi, 0.0), res.active_constraints, res.iterations,
                        res.converged, res.min_path_integral, res.runtime, None, q,
                        {"connecting": res, "conjugate_p": p})


def shortest_rho_path(grid: Grid, rho, stencil: int = 32, return_cost: bool = False):
    """Minimal ``int rho ds`` path between the plates of ``grid``.

    ``rho`` is a per-cell array over the full grid shape, a vector over the
    masked cells, or a callable ``rho(x, y)`` evaluated at cell centres.
    """
    graph = _CellGraph(grid, stencil)
    if callable(rho):
        vals = np.asarray(rho(*grid.centres()), dtype=float)
    else:
        vals = np.asarray(rho, dtype=float)
        if vals.shape == grid.shape:
            vals = vals[grid.mask]
    if np.any(vals < 0):
        raise ValueError("density must be nonnegative")
    dist, pred = graph.shortest(vals)
    costs = dist[graph.p0] + vals[graph.p0] * graph.d0
    if not np.any(np.isfinite(costs)):
        raise DisconnectedPlatesError("plates are not connected inside the grid")
    k = int(np.argmin(costs))
    nodes = graph.path_nodes(int(graph.p0[k]), pred)
    line = graph.polyline(nodes)
    return (line, float(costs[k])) if return_cost else line


# --------------------------------------------------------------------------
# textual grid specifications


def _kv(text):
    out = {}
    for part in filter(None, text.split(",")):
        key, _, val = part.partition("=")
        out[key.strip()] = val.strip()
    return out


def parse_grid_spec(spec: str) -> tuple[Grid, dict]:
    """Build a grid from ``kind:key=value,...``.

    Kinds: ``rectangle`` (a, b), ``annulus`` (r0, r1), ``parallelogram``
    (theta, h) and ``ring-image`` (map, b, plus map parameters).  The cell
    size is ``cell`` or ``n`` cells across the first bounding-box side.
    """
    kind, _, rest = spec.partition(":")
    kv = _kv(rest)
    num = lambda k, d: float(kv.get(k, d))
    kind = kind.strip().lower()
    if kind == "rectangle":
        dom = rectangle_domain(num("a", 1), num("b", 2))
    elif kind == "annulus":
        dom = annulus_domain(num("r0", 1), num("r1", 2))
    elif kind == "parallelogram":
        dom = parallelogram_domain(num("theta", math.pi / 3), num("h", 1))
    elif kind == "ring-image":
        from .planar import ring_image_inverse
        name = kv.pop("map", "affine")
        b = num("b", 2)
        params = {k: float(v) for k, v in kv.items() if k not in ("b", "n", "cell", "p", "q")}
        inv, radius = ring_image_inverse(name, b, **params)
        dom = ring_image_domain(inv, b, radius)
    else:
        raise ValueError(f"unknown grid kind {kind!r}")
    x0, x1 = dom.bbox[:2]
    cell = num("cell", 0) or (x1 - x0) / num("n", 100)
    return build_grid(dom, cell), {"kind": kind, **kv}
