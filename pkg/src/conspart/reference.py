"""Reference solutions: a first-order Godunov finite-volume oracle and exact solutions.

The finite-volume solver is deliberately simple (first order, exact Riemann
fluxes) so that it can serve as an independent check. Exact solutions are
provided for Riemann data, for smooth data under a convex flux (via the
Lax-Oleinik minimization over characteristic feet) and for the two-jump
Buckley-Leverett problem.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .flux import FluxModel, solve_monotone
from .geometry import cell_integrals, gauss_integrate, l1_distance
from .particles import ParticleSystem
from .sampling import InitialCondition

_RT = 4 * np.finfo(float).eps


# ----------------------------------------------------------------------
# Godunov finite volumes

def godunov_flux(u_left, u_right, flux: FluxModel):
    """Exact Riemann flux: ``min f`` on ``[uL, uR]`` if ``uL <= uR``, else ``max f``.

    The extremum is taken over the endpoints and the critical points of
    ``f`` inside the interval, so non-convex fluxes are handled exactly.
    """
    ul = np.asarray(u_left, float)
    ur = np.asarray(u_right, float)
    lo, hi = np.minimum(ul, ur), np.maximum(ul, ur)
    fl, fr = flux.f(ul), flux.f(ur)
    fmin = np.minimum(fl, fr)
    fmax = np.maximum(fl, fr)
    for c in flux.critical_values:
        inside = (lo < c) & (c < hi)
        fc = float(flux.f(np.asarray(c)))
        fmin = np.where(inside, np.minimum(fmin, fc), fmin)
        fmax = np.where(inside, np.maximum(fmax, fc), fmax)
    out = np.where(ul <= ur, fmin, fmax)
    return float(out) if out.ndim == 0 else out


@dataclass
class FvGrid:
    """Cell averages on a uniform grid."""

    edges: np.ndarray
    values: np.ndarray
    time: float = 0.0
    cfl: float = 0.9

    @property
    def cells(self) -> int:
        return self.values.size

    @property
    def dx(self) -> float:
        return float(self.edges[1] - self.edges[0])

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    @property
    def domain(self):
        return float(self.edges[0]), float(self.edges[-1])

    def total(self) -> float:
        return float(np.sum(self.values) * self.dx)

    def to_csv(self, path) -> None:
        np.savetxt(path, np.column_stack([self.centers, self.values]), delimiter=",",
                   header="x_center,average", comments="", fmt="%.17g")


def cell_averages(ic: InitialCondition, edges: np.ndarray, order: int = 8) -> np.ndarray:
    """Cell averages of ``u0``; exact via the primitive when available."""
    edges = np.asarray(edges, float)
    dx = np.diff(edges)
    if ic.primitive is not None:
        p = ic.primitive(edges)
        return np.diff(p) / dx
    cuts = np.unique(np.concatenate([edges, [d[0] for d in ic.discontinuities]]))
    gx, gw = np.polynomial.legendre.leggauss(order)
    a, b = cuts[:-1], cuts[1:]
    pts = 0.5 * (a + b)[:, None] + 0.5 * (b - a)[:, None] * gx[None, :]
    piece = np.sum(0.5 * (b - a)[:, None] * ic.u0(pts) * gw[None, :], axis=1)
    owner = np.clip(np.searchsorted(edges, 0.5 * (a + b), side="right") - 1, 0, dx.size - 1)
    return np.bincount(owner, weights=piece, minlength=dx.size) / dx


def fv_run(ic: InitialCondition, flux: FluxModel, cells: int, t_end: float,
           source=None, cfl: float = 0.9, output_times: Sequence[float] = (),
           domain=None) -> list:
    """First-order Godunov solution; returns grids at each output time and ``t_end``.

    Boundaries use constant extrapolation. A source ``g(x, u)`` is added after
    each transport step at cell centers.
    """
    if cells < 10:
        raise ValueError("need at least 10 cells")
    if not 0 < cfl <= 0.9:
        raise ValueError("CFL number must lie in (0, 0.9]")
    lo, hi = ic.domain if domain is None else domain
    edges = np.linspace(lo, hi, cells + 1)
    dx = edges[1] - edges[0]
    u = cell_averages(ic, edges)
    centers = 0.5 * (edges[1:] + edges[:-1])
    outs = sorted(float(t) for t in output_times if t <= t_end)
    if not outs or outs[-1] != t_end:
        outs.append(float(t_end))
    t = 0.0
    result = []
    k = 0
    while k < len(outs) and outs[k] <= t:
        result.append(FvGrid(edges, u.copy(), t, cfl))
        k += 1
    while k < len(outs):
        speed = float(np.max(np.abs(flux.df(u))))
        dt = cfl * dx / speed if speed > 0 else outs[k] - t
        if t + dt >= outs[k]:
            dt = outs[k] - t
        ext = np.concatenate([[u[0]], u, [u[-1]]])
        fl = godunov_flux(ext[:-1], ext[1:], flux)
        u = u - dt / dx * np.diff(fl)
        if source is not None:
            u = u + dt * source(centers, u)
        if not np.all(np.isfinite(u)):
            raise FloatingPointError("finite-volume solution blew up")
        t = outs[k] if dt == outs[k] - t else t + dt
        while k < len(outs) and outs[k] <= t:
            result.append(FvGrid(edges, u.copy(), t, cfl))
            k += 1
    return result


def l1_error_vs_reference(coarse, fine: FvGrid, window=None, mode: str = "cells") -> float:
    """L1 error of a coarse solution measured with a fine finite-volume reference.

    For a coarse :class:`FvGrid` the error is the summed per-cell area
    mismatch against the fine grid. For a :class:`ParticleSystem`, ``mode``
    selects ``"cells"`` (the same area mismatch, per fine cell, using exact
    integrals of the interpolant) or ``"pointwise"`` (the L1 distance to the
    fine piecewise-constant function).
    """
    lo, hi = fine.domain if window is None else window
    if isinstance(coarse, FvGrid):
        if fine.cells < coarse.cells:
            raise ValueError("reference must be at least as fine as the coarse grid")
        ratio = fine.cells / coarse.cells
        if abs(ratio - round(ratio)) > 1e-9 or fine.domain != coarse.domain:
            raise ValueError("grids must be nested")
        r = int(round(ratio))
        fine_areas = fine.values.reshape(coarse.cells, r).sum(axis=1) * fine.dx
        err = np.abs(coarse.values * coarse.dx - fine_areas)
        c = coarse.centers
        return float(np.sum(err[(c >= lo) & (c <= hi)]))
    if mode == "pointwise":
        return l1_distance(coarse, fine, (lo, hi)).value
    sel = (fine.edges >= lo) & (fine.edges <= hi)
    edges = fine.edges[sel]
    ints = cell_integrals(coarse.x, coarse.u, coarse.flux, edges)
    c = 0.5 * (edges[1:] + edges[:-1])
    vals = fine.values[np.clip(np.searchsorted(fine.edges, c) - 1, 0, fine.cells - 1)]
    return float(np.sum(np.abs(ints - vals * np.diff(edges))))


# ----------------------------------------------------------------------
# exact solutions

class ExactSolution:
    """Interface: ``value(x)`` vectorized, ``breakpoints`` (jumps and kinks)."""

    time: float = 0.0

    def value(self, x):
        raise NotImplementedError

    def __call__(self, x):
        return self.value(x)

    @property
    def breakpoints(self) -> list:
        return []

    @property
    def shocks(self) -> list:
        return []

    def primitive(self, edges):
        """Cumulative integral from ``edges[0]``; Gauss quadrature split at breakpoints."""
        edges = np.asarray(edges, float)
        bps = np.asarray(self.breakpoints, float)
        bps = bps[(bps > edges[0]) & (bps < edges[-1])]
        pts = np.unique(np.concatenate([edges, bps]))
        gx, gw = np.polynomial.legendre.leggauss(8)
        a, b = pts[:-1], pts[1:]
        half = 0.5 * (b - a)
        nodes = 0.5 * (a + b)[:, None] + half[:, None] * gx[None, :]
        pieces = np.sum(half[:, None] * self.value(nodes.ravel()).reshape(nodes.shape)
                        * gw[None, :], axis=1)
        cum = np.concatenate([[0.0], np.cumsum(pieces)])
        return cum[np.searchsorted(pts, edges)]


class RiemannExact(ExactSolution):
    """Riemann problem for a flux that is convex or concave between the states."""

    def __init__(self, flux: FluxModel, u_left: float, u_right: float, x0: float, t: float):
        self.flux, self.ul, self.ur, self.x0, self.time = flux, u_left, u_right, x0, t
        cl, cr = float(flux.df(u_left)), float(flux.df(u_right))
        self.is_shock = cl > cr
        if self.is_shock:
            self.speed = float((flux.f(u_left) - flux.f(u_right)) / (u_left - u_right))
        self.cl, self.cr = cl, cr

    def value(self, x):
        x = np.asarray(x, float)
        if self.time == 0:
            return np.where(x < self.x0, self.ul, self.ur)
        if self.is_shock:
            return np.where(x < self.x0 + self.speed * self.time, self.ul, self.ur)
        q = np.clip((x - self.x0) / self.time, min(self.cl, self.cr), max(self.cl, self.cr))
        v = self.flux.invert_df(q, self.ul, self.ur)
        return np.where(x <= self.x0 + self.cl * self.time, self.ul,
                        np.where(x >= self.x0 + self.cr * self.time, self.ur, v))

    @property
    def breakpoints(self):
        if self.is_shock:
            return [self.x0 + self.speed * self.time]
        return [self.x0 + self.cl * self.time, self.x0 + self.cr * self.time]

    @property
    def shocks(self):
        return [self.x0 + self.speed * self.time] if self.is_shock else []


class LaxOleinikExact(ExactSolution):
    """Entropy solution for smooth data and a flux convex on the data range.

    Characteristics ``x = y + t f'(u0(y))`` are split into monotone branches
    in the foot ``y``. At a point ``x`` every branch reaching ``x`` offers a
    candidate foot, and the entropy solution takes the one minimizing
    ``U0(y) + t F(u0(y))`` (``U0`` a primitive of ``u0``, ``F`` the Legendre
    transform). Shocks sit where the minimizing branch switches.
    """

    def __init__(self, flux: FluxModel, ic: InitialCondition, t: float, window,
                 samples: int = 20001):
        if ic.primitive is None:
            raise ValueError("exact solution needs the primitive of u0")
        self.flux, self.ic, self.time = flux, ic, float(t)
        self.window = (float(window[0]), float(window[1]))
        if self.time == 0:
            self._branches = []
            self._shocks = []
            return
        lo, hi = self.window
        grid = np.linspace(lo - 1.0, hi + 1.0, 4001)
        u = ic.u0(grid)
        c = np.asarray(flux.df(u), float) * np.ones_like(u)
        cmin, cmax = c.min(), c.max()
        # feet that can reach the window
        y_lo = lo - self.time * max(cmax, 0) - 1.0 - self.time * abs(min(cmin, 0))
        y_hi = hi - self.time * min(cmin, 0) + 1.0 + self.time * abs(max(cmax, 0))
        for _ in range(3):
            uu = ic.u0(np.linspace(y_lo, y_hi, 4001))
            cc = np.asarray(flux.df(uu), float)
            y_lo = min(y_lo, lo - self.time * cc.max() - 1.0)
            y_hi = max(y_hi, hi - self.time * cc.min() + 1.0)
        ys = np.linspace(y_lo, y_hi, samples)
        dX = self._dX(ys)
        sign = np.sign(dX)
        cuts = [y_lo]
        for k in np.nonzero(sign[:-1] * sign[1:] < 0)[0]:
            cuts.append(brentq(self._dX, ys[k], ys[k + 1], xtol=1e-15, rtol=_RT))
        cuts.append(y_hi)
        self._branches = []
        for a, b in zip(cuts[:-1], cuts[1:]):
            yy = np.linspace(a, b, max(64, int(samples * (b - a) / (y_hi - y_lo))))
            xx = self._X(yy)
            self._branches.append((a, b, yy, xx, xx[-1] >= xx[0]))
        self._shocks = self._locate_shocks()

    def _X(self, y):
        return y + self.time * self.flux.df(self.ic.u0(y))

    def _dX(self, y):
        y = np.asarray(y, float)
        return 1.0 + self.time * self.flux.ddf(self.ic.u0(y)) * self.ic.derivative(y)

    def _phi(self, y):
        u = self.ic.u0(y)
        return self.ic.primitive(y) + self.time * self.flux.legendre(u)

    def _foot_on_branch(self, b, x):
        """Foot on branch ``b`` for each ``x``; NaN where the branch misses ``x``."""
        a, bb, yy, xx, inc = b
        x = np.asarray(x, float)
        xs, ys = (xx, yy) if inc else (xx[::-1], yy[::-1])
        hit = (x >= xs[0]) & (x <= xs[-1])
        out = np.full(x.shape, np.nan)
        if not np.any(hit):
            return out
        xh = x[hit]
        j = np.clip(np.searchsorted(xs, xh) - 1, 0, xs.size - 2)
        lo = np.minimum(ys[j], ys[j + 1])
        hi = np.maximum(ys[j], ys[j + 1])
        out[hit] = solve_monotone(self._X, self._dX, xh, lo, hi)
        return out

    def _feet(self, x):
        x = np.asarray(x, float)
        best_phi = np.full(x.shape, np.inf)
        best_y = np.full(x.shape, np.nan)
        best_b = np.full(x.shape, -1)
        for k, b in enumerate(self._branches):
            y = self._foot_on_branch(b, x)
            ok = np.isfinite(y)
            phi = np.where(ok, self._phi(np.where(ok, y, 0.0)), np.inf)
            better = phi < best_phi
            best_phi = np.where(better, phi, best_phi)
            best_y = np.where(better, y, best_y)
            best_b = np.where(better, k, best_b)
        return best_y, best_b

    def _locate_shocks(self):
        lo, hi = self.window
        xs = np.linspace(lo, hi, 20001)
        _, br = self._feet(xs)
        shocks = []
        for k in np.nonzero(br[1:] != br[:-1])[0]:
            b1, b2 = self._branches[br[k]], self._branches[br[k + 1]]

            def gap(s):
                y1 = self._foot_on_branch(b1, np.array([s]))[0]
                y2 = self._foot_on_branch(b2, np.array([s]))[0]
                return float(self._phi(y1) - self._phi(y2))

            a, b = xs[k], xs[k + 1]
            try:
                shocks.append(brentq(gap, a, b, xtol=1e-15, rtol=_RT))
            except ValueError:
                shocks.append(0.5 * (a + b))
        return shocks

    def value(self, x):
        x = np.asarray(x, float)
        if self.time == 0:
            return self.ic.u0(x)
        y, _ = self._feet(x)
        return self.ic.u0(y)

    @property
    def shocks(self):
        return list(self._shocks)

    @property
    def breakpoints(self):
        return list(self._shocks)


class BuckleyJumpsExact(ExactSolution):
    """Two-jump Buckley-Leverett data ``uL`` | 0 | ``uR`` with ``uL`` above the
    inflection value and ``0 < uR`` below it.

    The first jump becomes a rarefaction attached (tangentially) to a shock;
    the second is a rarefaction. When the shock reaches the second fan it
    keeps its tangency: its left state is the tangent point ``u_T(u_R)``
    seen from the current right state, and the characteristics it sheds
    fill the region behind it.
    """

    def __init__(self, flux: FluxModel, t: float, first: float = 5.0, second: float = 5.3,
                 u_left: float = 1.0, u_right: float = 0.2):
        self.flux, self.time = flux, float(t)
        self.first, self.second, self.ul, self.ur = first, second, u_left, u_right
        (self.ustar,) = flux.inflection_points(0.0, 1.0)
        self.u_t0 = self.tangent_point(0.0)
        self.s0 = float(flux.df(self.u_t0))
        self.t_hit = (second - first) / self.s0
        self.c_right = float(flux.df(u_right))
        self._sol = None
        if self.time > self.t_hit:
            self._sol = solve_ivp(self._rhs, (self.t_hit, self.time), [second],
                                  method="DOP853", rtol=1e-13, atol=1e-14, dense_output=True)
            if not self._sol.success:
                raise RuntimeError("shock path integration failed")

    # -- helpers on the flux
    def tangent_point(self, ur):
        """Value ``u > u*`` where the chord from ``ur`` touches ``f`` (vectorized)."""
        f, df, ddf = self.flux.f, self.flux.df, self.flux.ddf
        ur = np.asarray(ur, float)
        # g decreases in u on (u*, 1] because f'' < 0 there
        g = lambda u: df(u) * (u - ur) - (f(u) - f(ur))
        dg = lambda u: ddf(u) * (u - ur)
        out = solve_monotone(g, dg, 0.0, self.ustar, self.ul)
        return float(out) if out.ndim == 0 else out

    def right_state(self, x, t):
        """Value of the second fan (or constant states) at ``(x, t)``."""
        q = (np.asarray(x, float) - self.second) / t
        v = self.flux.invert_df(np.clip(q, 0.0, self.c_right), 0.0, self.ur)
        out = np.where(q <= 0, 0.0, np.where(q >= self.c_right, self.ur, v))
        return float(out) if out.ndim == 0 else out

    def _rhs(self, t, y):
        ur = self.right_state(y[0], t)
        return [float(self.flux.df(self.tangent_point(ur)))]

    def shock_position(self, t=None):
        t = self.time if t is None else t
        t = np.asarray(t, float)
        straight = self.first + self.s0 * t
        if self._sol is None:
            out = straight
        else:
            out = np.where(t <= self.t_hit, straight,
                           self._sol.sol(np.maximum(t, self.t_hit)).reshape(t.shape))
        return float(out) if out.ndim == 0 else out

    def _shed(self, tau):
        """Position at the current time and value of the characteristic shed at ``tau``."""
        xs = self.shock_position(tau)
        v = self.tangent_point(self.right_state(xs, tau))
        return xs + self.flux.df(v) * (self.time - tau), v

    def _shed_value(self, x):
        """Values behind the shock carried by characteristics it has shed."""
        x = np.asarray(x, float)
        tau = solve_monotone(lambda s: self._shed(s)[0], None, x,
                             np.full(x.shape, self.t_hit), np.full(x.shape, self.time))
        return self._shed(tau)[1]

    def value(self, x):
        x = np.asarray(x, float)
        t = self.time
        flat = np.atleast_1d(x).astype(float)
        if t == 0:
            out = np.where(flat < self.first, self.ul,
                           np.where(flat < self.second, 0.0, self.ur))
            return out.reshape(x.shape) if x.ndim else float(out[0])
        f = self.flux
        xs = self.shock_position()
        fan_edge = self.first + self.s0 * t
        out = np.empty(flat.shape)
        left = flat <= self.first
        fan = ~left & (flat <= min(fan_edge, xs))
        shed = ~left & ~fan & (flat < xs)
        right = flat >= xs
        out[left] = self.ul
        out[fan] = f.invert_df((flat[fan] - self.first) / t, self.u_t0, self.ul)
        if np.any(shed):
            out[shed] = self._shed_value(flat[shed])
        q = (flat[right] - self.second) / t
        out[right] = np.where(q <= 0, 0.0, np.where(
            q >= self.c_right, self.ur,
            f.invert_df(np.clip(q, 0.0, self.c_right), 0.0, self.ur)))
        return out.reshape(x.shape) if x.ndim else float(out[0])

    @property
    def shocks(self):
        return [self.shock_position()]

    @property
    def breakpoints(self):
        t = self.time
        xs = self.shock_position()
        fan_edge = self.first + self.s0 * t
        pts = [self.first, xs, self.second, self.second + self.c_right * t, fan_edge]
        if xs > fan_edge:
            # values behind the shock vary like a square root of the distance
            # to it; a geometric grading keeps Gauss quadrature accurate
            pts += list(xs - (xs - fan_edge) * 0.5 ** np.arange(1, 40))
        return sorted(set(float(p) for p in pts))


# ----------------------------------------------------------------------
# error measures

def fit_order(ns: Sequence[float], errors: Sequence[float]) -> float:
    """Least-squares slope of ``-log(error)`` against ``log(n)``; nan if an error is zero."""
    errors = np.asarray(errors, float)
    if np.any(errors <= 0):
        return float("nan")
    ln = np.log(np.asarray(ns, float))
    le = np.log(errors)
    slope = np.polyfit(ln, le, 1)[0]
    return float(-slope)


def shock_window_mask(x, shocks, width):
    x = np.asarray(x, float)
    mask = np.ones(x.shape, bool)
    for s in shocks:
        mask &= np.abs(x - s) > 0.5 * width
    return mask


def particle_error(system: ParticleSystem, exact: ExactSolution, window,
                   exclude: Sequence[float] = (), exclude_width: float = 0.0) -> float:
    """True L1 error of the interpolated particle solution against an exact one.

    Intervals of ``exclude_width`` centered at the positions in ``exclude``
    are left out of the window.
    """
    lo, hi = window
    pieces = [(lo, hi)]
    for s in sorted(exclude):
        a, b = s - 0.5 * exclude_width, s + 0.5 * exclude_width
        nxt = []
        for p, q in pieces:
            if b <= p or a >= q:
                nxt.append((p, q))
                continue
            if a > p:
                nxt.append((p, a))
            if b < q:
                nxt.append((b, q))
        pieces = nxt
    return float(sum(l1_distance(system, exact, (p, q), breakpoints=exact.breakpoints).value
                     for p, q in pieces if q > p))


def fv_error(grid: FvGrid, exact: ExactSolution, window=None,
             exclude: Sequence[float] = (), exclude_width: float = 0.0) -> float:
    """Per-cell area error of a finite-volume solution against an exact one."""
    edges = grid.edges
    prim = exact.primitive(edges)
    err = np.abs(grid.values * np.diff(edges) - np.diff(prim))
    c = grid.centers
    keep = np.ones(c.shape, bool)
    if window is not None:
        keep &= (edges[:-1] >= window[0]) & (edges[1:] <= window[1])
    if exclude_width > 0:
        keep &= shock_window_mask(c, exclude, exclude_width)
    return float(np.sum(err[keep]))
