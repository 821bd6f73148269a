"""Scalar flux functions and the quantities derived from them.

A :class:`FluxModel` bundles a flux ``f`` with its analytic derivatives and
everything the particle method computes purely from the flux: the Legendre
transform ``F(u) = f'(u) u - f(u)``, the nonlinear average ``a(u1, u2)`` and
the inflection values where ``f''`` changes sign.

All callables are vectorized over numpy arrays.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from numpy.polynomial import Polynomial
from scipy.optimize import brentq

ArrayFn = Callable[[np.ndarray], np.ndarray]

#: relative size of |f'(u2) - f'(u1)| below which the average degenerates
DEGENERATE_RTOL = 1e-13
#: step of the finite-difference fallback for a missing third derivative
FD_THIRD_STEP = 1e-5
#: spans below which the average's numerator is integrated instead of differenced
SHORT_SPAN = 1e-2
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


def _scan_sign_changes(fun: ArrayFn, lo: float, hi: float, samples: int = 4001,
                       xtol: float = 1e-15) -> list[float]:
    """Roots of ``fun`` in ``[lo, hi]`` located by sign scan plus bracketing."""
    grid = np.linspace(lo, hi, samples)
    vals = fun(grid)
    roots = []
    for k in range(samples - 1):
        a, b = vals[k], vals[k + 1]
        if a == 0.0:
            # exact zero on the grid only counts when the sign really flips
            if 0 < k and vals[k - 1] * b < 0:
                roots.append(float(grid[k]))
            continue
        if a * b < 0:
            roots.append(brentq(lambda s: float(fun(np.asarray(s))), grid[k], grid[k + 1],
                                xtol=xtol, rtol=4 * np.finfo(float).eps))
    return roots


@dataclass(frozen=True)
class FluxModel:
    """A scalar flux with analytic derivatives.

    Parameters
    ----------
    f, df, ddf : callable
        The flux and its first two derivatives.
    dddf : callable, optional
        Third derivative; only adaptive sampling needs it. When missing, a
        centered finite difference of ``ddf`` with step ``1e-5`` is used and a
        warning is emitted once.
    inflection_values : tuple of float
        Sign changes of ``ddf``, strictly increasing.
    critical_values : tuple of float
        Sign changes of ``df`` (used by the Godunov flux for non-convex ``f``).
    df_inverse : callable, optional
        Closed-form inverse of ``df`` when ``df`` is globally monotone.
    quadratic : bool
        ``f`` is a quadratic polynomial; the average is then the arithmetic mean.
    """

    f: ArrayFn
    df: ArrayFn
    ddf: ArrayFn
    dddf: Optional[ArrayFn] = None
    name: str = "custom"
    inflection_values: tuple = ()
    critical_values: tuple = ()
    convexity_tol: float = 1e-12
    df_inverse: Optional[ArrayFn] = None
    quadratic: bool = False
    value_range: tuple = (-np.inf, np.inf)
    params: dict = field(default_factory=dict, compare=False)

    # ------------------------------------------------------------------
    # constructors

    @classmethod
    def burgers(cls) -> "FluxModel":
        """``f(u) = u^2 / 2``."""
        return cls(
            f=lambda u: 0.5 * np.asarray(u) ** 2,
            df=lambda u: np.asarray(u, dtype=float) * 1.0,
            ddf=lambda u: np.ones_like(np.asarray(u, dtype=float)),
            dddf=lambda u: np.zeros_like(np.asarray(u, dtype=float)),
            name="burgers",
            critical_values=(0.0,),
            df_inverse=lambda q: np.asarray(q, dtype=float) * 1.0,
            quadratic=True,
        )

    @classmethod
    def quartic(cls) -> "FluxModel":
        """``f(u) = u^4 / 4``; convex, with ``f''(0) = 0`` but no sign change."""
        return cls(
            f=lambda u: 0.25 * np.asarray(u) ** 4,
            df=lambda u: np.asarray(u, dtype=float) ** 3,
            ddf=lambda u: 3.0 * np.asarray(u, dtype=float) ** 2,
            dddf=lambda u: 6.0 * np.asarray(u, dtype=float),
            name="quartic",
            critical_values=(0.0,),
            df_inverse=np.cbrt,
        )

    @classmethod
    def buckley_leverett(cls, mobility: float = 0.5) -> "FluxModel":
        """``f(u) = u^2 / (u^2 + M (1-u)^2)``, the two-phase porous-media flux.

        The default ``M = 1/2`` gives a single inflection value near 0.387 in
        ``[0, 1]``.
        """
        m = float(mobility)

        def f(u):
            u = np.asarray(u, dtype=float)
            return u * u / (u * u + m * (1.0 - u) ** 2)

        def df(u):
            u = np.asarray(u, dtype=float)
            d = u * u + m * (1.0 - u) ** 2
            return 2.0 * m * u * (1.0 - u) / (d * d)

        # quotient rule on df = N / D^2 with N = 2 m u (1-u), D = u^2 + m (1-u)^2
        def ddf(u):
            u = np.asarray(u, dtype=float)
            d = u * u + m * (1.0 - u) ** 2
            dd = 2.0 * u - 2.0 * m * (1.0 - u)
            n = 2.0 * m * u * (1.0 - u)
            dn = 2.0 * m * (1.0 - 2.0 * u)
            return (dn * d - 2.0 * n * dd) / d ** 3

        def dddf(u):
            u = np.asarray(u, dtype=float)
            d = u * u + m * (1.0 - u) ** 2
            dd = 2.0 * u - 2.0 * m * (1.0 - u)
            d2 = 2.0 + 2.0 * m
            n = 2.0 * m * u * (1.0 - u)
            dn = 2.0 * m * (1.0 - 2.0 * u)
            d2n = -4.0 * m
            # ddf = P / D^3 with P = dn D - 2 n dd
            p = dn * d - 2.0 * n * dd
            dp = d2n * d + dn * dd - 2.0 * dn * dd - 2.0 * n * d2
            return (dp * d - 3.0 * p * dd) / d ** 4

        infl = tuple(_scan_sign_changes(ddf, 0.0, 1.0))
        return cls(f=f, df=df, ddf=ddf, dddf=dddf, name="buckley_leverett",
                   inflection_values=infl, critical_values=(0.0, 1.0),
                   value_range=(0.0, 1.0), params={"mobility": m})

    @classmethod
    def polynomial(cls, coefficients: Sequence[float]) -> "FluxModel":
        """Polynomial flux; ``coefficients[k]`` multiplies ``u**k``."""
        p = Polynomial(np.asarray(coefficients, dtype=float))
        dp, ddp, dddp = p.deriv(1), p.deriv(2), p.deriv(3)

        def sign_change_roots(poly):
            if poly.degree() < 1:
                return ()
            out = []
            for r in poly.roots():
                if abs(r.imag) > 1e-10:
                    continue
                r = float(r.real)
                if poly(r - 1e-6) * poly(r + 1e-6) < 0:
                    out.append(r)
            return tuple(sorted(set(out)))

        inverse = None
        if p.degree() == 2:
            c1, c2 = p.coef[1], p.coef[2]
            inverse = lambda q: (np.asarray(q, dtype=float) - c1) / (2.0 * c2)
        return cls(f=p, df=dp, ddf=ddp, dddf=dddp, name="polynomial",
                   inflection_values=sign_change_roots(ddp),
                   critical_values=sign_change_roots(dp),
                   df_inverse=inverse, quadratic=p.degree() <= 2,
                   params={"coefficients": [float(c) for c in p.coef]})

    @classmethod
    def custom(cls, f: ArrayFn, df: ArrayFn, ddf: ArrayFn,
               dddf: Optional[ArrayFn] = None, *, value_range=(-1.0, 2.0),
               name: str = "custom") -> "FluxModel":
        """User flux; inflection and critical values are scanned on ``value_range``."""
        lo, hi = value_range
        return cls(f=f, df=df, ddf=ddf, dddf=dddf, name=name,
                   inflection_values=tuple(_scan_sign_changes(ddf, lo, hi)),
                   critical_values=tuple(_scan_sign_changes(df, lo, hi)),
                   value_range=(lo, hi))

    # ------------------------------------------------------------------
    # symmetry maps used to normalize inflection merges

    def negated(self) -> "FluxModel":
        """The flux ``-f`` (mirroring ``x -> -x`` reverses all velocities)."""
        f, df, ddf, dddf = self.f, self.df, self.ddf, self.third_derivative
        inv = self.df_inverse
        return FluxModel(
            f=lambda u: -f(u), df=lambda u: -df(u), ddf=lambda u: -ddf(u),
            dddf=lambda u: -dddf(u), name=f"-({self.name})",
            inflection_values=self.inflection_values,
            critical_values=self.critical_values,
            convexity_tol=self.convexity_tol,
            df_inverse=None if inv is None else (lambda q: inv(-np.asarray(q))),
            quadratic=self.quadratic, value_range=self.value_range)

    def reflected(self, center: float) -> "FluxModel":
        """Flux for ``w = 2 c - u``: ``h(w) = -f(2c - w)``.

        Velocities are unchanged, ``h'' (w) = -f''(u)`` and ``h'''(w) = f'''(u)``.
        """
        c2 = 2.0 * center
        f, df, ddf, dddf = self.f, self.df, self.ddf, self.third_derivative
        lo, hi = self.value_range
        return FluxModel(
            f=lambda w: -f(c2 - np.asarray(w)), df=lambda w: df(c2 - np.asarray(w)),
            ddf=lambda w: -ddf(c2 - np.asarray(w)), dddf=lambda w: dddf(c2 - np.asarray(w)),
            name=f"reflect({self.name})",
            inflection_values=tuple(sorted(c2 - v for v in self.inflection_values)),
            critical_values=tuple(sorted(c2 - v for v in self.critical_values)),
            convexity_tol=self.convexity_tol, quadratic=self.quadratic,
            value_range=(c2 - hi, c2 - lo))

    # ------------------------------------------------------------------
    # derived quantities

    def third_derivative(self, u):
        if self.dddf is not None:
            return self.dddf(u)
        _warn_fd_third(self.name)
        u = np.asarray(u, dtype=float)
        return (self.ddf(u + FD_THIRD_STEP) - self.ddf(u - FD_THIRD_STEP)) / (2 * FD_THIRD_STEP)

    def legendre(self, u):
        """Legendre transform ``F(u) = f'(u) u - f(u)``."""
        u = np.asarray(u, dtype=float)
        out = self.df(u) * u - self.f(u)
        return float(out) if out.ndim == 0 else out

    def nonlinear_average(self, u1, u2):
        """The ``f''``-weighted mean of ``u`` between ``u1`` and ``u2``.

        Evaluated as ``lo + (f'(hi)(hi-lo) - (f(hi)-f(lo))) / (f'(hi)-f'(lo))``
        on the sorted pair, which equals ``[F]/[f']`` but is exactly symmetric
        and loses no digits to the magnitude of ``u``. The caller guarantees
        ``f''`` keeps one sign between the arguments.
        """
        u1 = np.asarray(u1, dtype=float)
        u2 = np.asarray(u2, dtype=float)
        lo = np.minimum(u1, u2)
        hi = np.maximum(u1, u2)
        mid = 0.5 * (lo + hi)
        if self.quadratic:
            out = mid
        else:
            dlo, dhi = self.df(lo), self.df(hi)
            den = dhi - dlo
            scale = np.maximum(np.abs(dlo), np.abs(dhi))
            degenerate = np.abs(den) <= DEGENERATE_RTOL * scale
            span = hi - lo
            num = dhi * span - (self.f(hi) - self.f(lo))
            short = span <= SHORT_SPAN * np.maximum(1.0, np.maximum(np.abs(lo), np.abs(hi)))
            if np.any(short):
                # f(hi) - f(lo) cancels for close values; integrate f'(hi) - f'(s) instead
                s_ = mid[..., None] + 0.5 * span[..., None] * _GL_NODES
                gap = dhi[..., None] - self.df(s_)
                num = np.where(short, 0.5 * span * (gap @ _GL_WEIGHTS), num)
            with np.errstate(divide="ignore", invalid="ignore"):
                out = lo + num / den
            out = np.where(degenerate, mid, np.clip(out, lo, hi))
        return float(out) if np.ndim(out) == 0 else out

    def average_partials(self, u1, u2):
        """Partial derivatives ``(da/du1, da/du2)`` of the nonlinear average."""
        u1 = np.asarray(u1, dtype=float)
        u2 = np.asarray(u2, dtype=float)
        if self.quadratic:
            half = np.full(np.broadcast(u1, u2).shape, 0.5)
            return (float(half) if half.ndim == 0 else half,) * 2
        a = np.asarray(self.nonlinear_average(u1, u2))
        d1, d2 = self.df(u1), self.df(u2)
        den = d2 - d1
        scale = np.maximum(np.abs(d1), np.abs(d2))
        degenerate = np.abs(den) <= DEGENERATE_RTOL * scale
        with np.errstate(divide="ignore", invalid="ignore"):
            p1 = np.where(degenerate, 0.5, self.ddf(u1) * (a - u1) / den)
            p2 = np.where(degenerate, 0.5, self.ddf(u2) * (u2 - a) / den)
        if p1.ndim == 0:
            return float(p1), float(p2)
        return p1, p2

    def inflection_points(self, lo: float, hi: float) -> list[float]:
        """Inflection values inside the closed interval ``[lo, hi]``."""
        if not lo < hi:
            raise ValueError("inflection_points needs lo < hi")
        return [v for v in self.inflection_values if lo <= v <= hi]

    def critical_points(self, lo: float, hi: float) -> list[float]:
        return [v for v in self.critical_values if lo <= v <= hi]

    def convexity_sign(self, u1, u2) -> int:
        """Sign of ``f''`` on the closed interval between ``u1`` and ``u2``.

        Uses the secant of ``f'``, which is robust when an endpoint sits on an
        inflection value. Returns 0 for a degenerate interval.
        """
        if u1 == u2:
            s = float(self.ddf(np.asarray(u1)))
            return 0 if abs(s) < self.convexity_tol else int(np.sign(s))
        s = (float(self.df(u2)) - float(self.df(u1))) / (u2 - u1)
        return 0 if abs(s) < self.convexity_tol else int(np.sign(s))

    def invert_df(self, q, lo, hi):
        """Solve ``f'(v) = q`` for ``v`` between ``lo`` and ``hi``.

        ``f'`` must be monotone on each interval. Uses the closed-form inverse
        when available, otherwise safeguarded Newton with bisection fallback.
        """
        q = np.asarray(q, dtype=float)
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        a = np.minimum(lo, hi)
        b = np.maximum(lo, hi)
        if self.df_inverse is not None:
            v = np.clip(self.df_inverse(q), a, b)
        else:
            v = solve_monotone(self.df, self.ddf, q, a, b)
        return float(v) if np.ndim(v) == 0 else v


def solve_monotone(fun: ArrayFn, dfun: Optional[ArrayFn], target, lo, hi,
                   max_newton: int = 25, max_iter: int = 200):
    """Vectorized root of ``fun(v) = target`` for monotone ``fun`` on ``[lo, hi]``.

    Newton from the midpoint; any iterate leaving the bracket, a vanishing
    derivative, or exhausting ``max_newton`` steps falls back to bisection.
    Iterates until the bracket collapses to adjacent floats.
    """
    target = np.asarray(target, dtype=float)
    a = np.array(np.broadcast_to(lo, np.broadcast(lo, hi, target).shape), dtype=float)
    b = np.array(np.broadcast_to(hi, a.shape), dtype=float)
    target = np.broadcast_to(target, a.shape)
    ga = fun(a) - target
    gb = fun(b) - target
    increasing = ga <= gb
    v = 0.5 * (a + b)
    done = (a == b) | (ga == 0) | (gb == 0)
    v = np.where(ga == 0, a, np.where(gb == 0, b, v))
    for it in range(max_iter):
        active = ~done
        if not active.any():
            break
        gv = fun(v) - target
        hit = active & (gv == 0)
        done |= hit
        # keep the root inside [a, b]
        go_right = np.where(increasing, gv < 0, gv > 0)
        a = np.where(active & ~hit & go_right, v, a)
        b = np.where(active & ~hit & ~go_right, v, b)
        mid = 0.5 * (a + b)
        cand = mid
        if dfun is not None and it < max_newton:
            dv = dfun(v)
            with np.errstate(divide="ignore", invalid="ignore"):
                newton = v - gv / dv
            ok = np.isfinite(newton) & (newton > a) & (newton < b)
            cand = np.where(ok, newton, mid)
        collapsed = (mid <= a) | (mid >= b) | (cand == v)
        done |= active & collapsed
        v = np.where(active & ~done, cand, np.where(hit, v, np.where(active, mid, v)))
    return v


_WARNED: set = set()


def _warn_fd_third(name: str) -> None:
    if name not in _WARNED:
        _WARNED.add(name)
        warnings.warn(f"flux {name!r} has no third derivative; using a finite "
                      f"difference of f'' with step {FD_THIRD_STEP}", stacklevel=3)


BUILTIN_FLUXES = {
    "burgers": FluxModel.burgers,
    "quartic": FluxModel.quartic,
    "buckley_leverett": FluxModel.buckley_leverett,
}


def make_flux(name: str, coefficients: Optional[Sequence[float]] = None) -> FluxModel:
    """Flux by catalog name; ``"polynomial"`` takes a coefficient list."""
    key = name.replace("-", "_").lower()
    if key == "polynomial":
        if coefficients is None:
            raise ValueError("polynomial flux needs coefficients")
        return FluxModel.polynomial(coefficients)
    try:
        return BUILTIN_FLUXES[key]()
    except KeyError:
        raise ValueError(f"unknown flux {name!r}; choose from "
                         f"{sorted(BUILTIN_FLUXES) + ['polynomial']}") from None
