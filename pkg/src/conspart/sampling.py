"""Initial conditions and their conversion to particle systems."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from numpy.polynomial import Polynomial
from scipy.optimize import brentq
from scipy.special import erf

from .flux import FluxModel
from .nonconvex import enforce_inflection_particles
from .particles import ParticleSystem


@dataclass
class InitialCondition:
    """Initial data ``u0`` on ``domain`` with jumps at known locations.

    Parameters
    ----------
    u0 : callable
        Vectorized; at a jump location it may return either one-sided value.
    domain : (lo, hi)
    discontinuities : list of (location, left value, right value)
    du0, ddu0 : callable, optional
        Analytic derivatives. When missing, centered differences are used.
    primitive : callable, optional
        An antiderivative of ``u0`` (used by exact references).
    """

    u0: Callable
    domain: tuple
    discontinuities: list = field(default_factory=list)
    du0: Optional[Callable] = None
    ddu0: Optional[Callable] = None
    primitive: Optional[Callable] = None
    name: str = "custom"

    def __post_init__(self):
        lo, hi = self.domain
        locs = [d[0] for d in self.discontinuities]
        if any(not lo < p < hi for p in locs):
            raise ValueError("discontinuities must lie strictly inside the domain")
        if any(b <= a for a, b in zip(locs, locs[1:])):
            raise ValueError("discontinuity locations must be strictly increasing")

    @property
    def length(self) -> float:
        return float(self.domain[1] - self.domain[0])

    def derivative(self, x):
        x = np.asarray(x, float)
        if self.du0 is not None:
            return self.du0(x)
        s = 1e-6 * self.length
        return (self.u0(x + s) - self.u0(x - s)) / (2 * s)

    def second_derivative(self, x):
        x = np.asarray(x, float)
        if self.ddu0 is not None:
            return self.ddu0(x)
        # a wider step than for the first derivative; 1e-6 would lose
        # about eight digits to cancellation here
        s = 1e-4 * self.length
        return (self.u0(x + s) - 2 * self.u0(x) + self.u0(x - s)) / (s * s)

    def smooth_pieces(self):
        """Intervals between consecutive jumps."""
        lo, hi = self.domain
        cuts = [lo] + [d[0] for d in self.discontinuities] + [hi]
        return list(zip(cuts[:-1], cuts[1:]))


# ----------------------------------------------------------------------
# catalog

def gaussian_cosine(domain=(-4.0, 4.0), base: float = 0.5, amplitude: float = 0.2
                    ) -> InitialCondition:
    """``u0 = base + amplitude exp(-x^2) cos(pi x)``, smooth with analytic primitive."""
    pi = np.pi

    def u0(x):
        x = np.asarray(x, float)
        return base + amplitude * np.exp(-x * x) * np.cos(pi * x)

    def du0(x):
        x = np.asarray(x, float)
        return amplitude * np.exp(-x * x) * (-2 * x * np.cos(pi * x) - pi * np.sin(pi * x))

    def ddu0(x):
        x = np.asarray(x, float)
        return amplitude * np.exp(-x * x) * ((4 * x * x - 2 - pi * pi) * np.cos(pi * x)
                                             + 4 * pi * x * np.sin(pi * x))

    scale = amplitude * 0.5 * np.sqrt(pi) * np.exp(-pi * pi / 4)

    def primitive(x):
        # exp(-x^2) cos(pi x) = Re exp(-(x - i pi/2)^2 - pi^2/4)
        x = np.asarray(x, float)
        return base * x + scale * np.real(erf(x - 0.5j * pi))

    return InitialCondition(u0, tuple(domain), [], du0, ddu0, primitive, "gaussian-cosine")


def piecewise_constant(values: Sequence[float], breaks: Sequence[float], domain,
                       name: str = "piecewise-constant") -> InitialCondition:
    """``values[k]`` between ``breaks[k-1]`` and ``breaks[k]``."""
    values = [float(v) for v in values]
    breaks = [float(b) for b in breaks]
    if len(values) != len(breaks) + 1:
        raise ValueError("need one more value than breaks")
    bk = np.asarray(breaks)
    vals = np.asarray(values)

    def u0(x):
        return vals[np.searchsorted(bk, np.asarray(x, float), side="right")]

    def zero(x):
        return np.zeros_like(np.asarray(x, float))

    def primitive(x):
        x = np.asarray(x, float)
        edges = np.concatenate([[domain[0]], bk])
        cum = np.concatenate([[0.0], np.cumsum(vals[:-1] * np.diff(edges))])
        k = np.searchsorted(bk, x, side="right")
        return cum[k] + vals[k] * (x - edges[k])

    jumps = [(b, values[k], values[k + 1]) for k, b in enumerate(breaks)
             if values[k] != values[k + 1]]
    return InitialCondition(u0, tuple(domain), jumps, zero, zero, primitive, name)


def riemann(u_left: float, u_right: float, x0: float = 0.0, domain=(-1.0, 1.0)
            ) -> InitialCondition:
    return piecewise_constant([u_left, u_right], [x0], domain, name="riemann")


def constant(value: float, domain=(0.0, 1.0)) -> InitialCondition:
    return piecewise_constant([value], [], domain, name="constant")


def buckley_jumps(domain=(4.0, 7.0), left: float = 1.0, middle: float = 0.0,
                  right: float = 0.2, first: float = 5.0, second: float = 5.3
                  ) -> InitialCondition:
    """A large downward jump followed by a small upward one."""
    return piecewise_constant([left, middle, right], [first, second], domain,
                              name="buckley-jumps")


def piecewise_polynomial(breaks: Sequence[float], coefficients: Sequence[Sequence[float]],
                         domain) -> InitialCondition:
    """Polynomial pieces; ``coefficients[k]`` (lowest order first, in ``x``)
    apply between ``breaks[k-1]`` and ``breaks[k]``."""
    polys = [Polynomial(np.asarray(c, float)) for c in coefficients]
    if len(polys) != len(breaks) + 1:
        raise ValueError("need one more coefficient row than breaks")
    bk = np.asarray(breaks, float)

    def pick(x, which):
        x = np.asarray(x, float)
        k = np.searchsorted(bk, x, side="right")
        out = np.empty(x.shape)
        for j, p in enumerate(polys):
            m = k == j
            out[m] = which(p)(x[m])
        return out

    u0 = lambda x: pick(x, lambda p: p)
    du0 = lambda x: pick(x, lambda p: p.deriv())
    ddu0 = lambda x: pick(x, lambda p: p.deriv(2))
    jumps = []
    for j, b in enumerate(breaks):
        left, right = float(polys[j](b)), float(polys[j + 1](b))
        if left != right:
            jumps.append((float(b), left, right))
    return InitialCondition(u0, tuple(domain), jumps, du0, ddu0, None, "piecewise-polynomial")


# ----------------------------------------------------------------------
# sampling

def _root_locator(ic: InitialCondition):
    """Position in ``[x1, x2]`` where the continuous ``u0`` takes a value."""
    def locate(value, x1, x2):
        g = lambda s: float(ic.u0(np.asarray(s))) - value
        ga, gb = g(x1), g(x2)
        if ga * gb < 0:
            return brentq(g, x1, x2, xtol=1e-15, rtol=4 * np.finfo(float).eps)
        return x1 + 0.5 * (x2 - x1)
    return locate


def _assemble(ic: InitialCondition, xs: np.ndarray, flux: FluxModel, h: float,
              d_min: float, d_max: Optional[float]) -> ParticleSystem:
    """Particles at smooth positions ``xs`` plus two per discontinuity."""
    xs = np.asarray(xs, float)
    jump_locs = np.array([d[0] for d in ic.discontinuities])
    if jump_locs.size:
        xs = xs[~np.isin(xs, jump_locs)]
    us = np.asarray(ic.u0(xs), float)
    if jump_locs.size:
        # the endpoints of each smooth piece take that piece's one-sided limit
        lefts = np.array([d[1] for d in ic.discontinuities])
        rights = np.array([d[2] for d in ic.discontinuities])
        x_all = np.concatenate([xs, jump_locs, jump_locs])
        u_all = np.concatenate([us, lefts, rights])
        order_key = np.concatenate([np.zeros(xs.size), np.zeros(jump_locs.size),
                                    np.ones(jump_locs.size)])
        order = np.lexsort((order_key, x_all))
        xs, us = x_all[order], u_all[order]
    system = ParticleSystem(xs, us, flux, d_min=d_min, d_max=d_max, h=h)
    system.log_events = False
    enforce_inflection_particles(system, locate=_root_locator(ic))
    system.log_events = True
    return system


def sample_equidistant(ic: InitialCondition, n: int, flux: FluxModel, d_min: float = 0.0,
                       d_max: Optional[float] = None) -> ParticleSystem:
    """``n`` particles at uniform spacing plus exact jump pairs."""
    if n < 2:
        raise ValueError("need at least two particles")
    lo, hi = ic.domain
    h = (hi - lo) / (n - 1)
    xs = lo + h * np.arange(n)
    xs[-1] = hi
    return _assemble(ic, xs, flux, h, d_min, d_max)


def error_density(ic: InitialCondition, flux: FluxModel, x, curvature_floor: float = 0.0):
    """Leading-order local interpolation error ``(f'' w'' + f''' w'^2) / (12 f'')``.

    ``w = u0(x)``. Where ``|f''(w)|`` falls below ``curvature_floor`` the
    denominator is replaced by the floor with the sign of ``f''``.
    """
    x = np.asarray(x, float)
    w = ic.u0(x)
    w1 = ic.derivative(x)
    w2 = ic.second_derivative(x)
    c2 = np.asarray(flux.ddf(w), float) * np.ones_like(x)
    c3 = np.asarray(flux.third_derivative(w), float) * np.ones_like(x)
    den = np.where(np.abs(c2) < curvature_floor,
                   np.where(c2 < 0, -curvature_floor, curvature_floor), c2)
    with np.errstate(divide="ignore", invalid="ignore"):
        e = (c2 * w2 + c3 * w1 * w1) / (12.0 * den)
    return np.where(np.isfinite(e), e, 0.0)


def placement_positions(ic: InitialCondition, flux: FluxModel, n: int,
                        resolution: int = 64, floor_rel: float = 1e-8,
                        curvature_rel: float = 1e-3) -> np.ndarray:
    """Inverse-CDF positions of ``n`` particles for density ``|e|^{1/2}``."""
    lo, hi = ic.domain
    grid = np.linspace(lo, hi, resolution * n + 1)
    w = ic.u0(grid)
    curv = np.abs(np.asarray(flux.ddf(w), float) * np.ones_like(grid))
    floor_c = curvature_rel * curv.max() if curv.max() > 0 else 0.0
    e = np.abs(error_density(ic, flux, grid, curvature_floor=floor_c))
    emax = e.max()
    eps = floor_rel * emax if emax > 0 else 1.0
    dens = np.sqrt(np.maximum(e, eps))
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(grid))])
    targets = cum[-1] * np.arange(n) / (n - 1)
    xs = np.interp(targets, cum, grid)
    xs[0], xs[-1] = lo, hi
    return xs


def sample_adaptive(ic: InitialCondition, n: int, flux: FluxModel, d_min: float = 0.0,
                    d_max: Optional[float] = None, resolution: int = 64) -> ParticleSystem:
    """``n`` particles with local spacing proportional to ``|e|^{-1/2}``.

    ``d_max`` defaults to ``4/3`` of the mean spacing, as for equidistant
    sampling with the same ``n``.
    """
    if n < 2:
        raise ValueError("need at least two particles")
    xs = placement_positions(ic, flux, n, resolution)
    h = ic.length / (n - 1)
    return _assemble(ic, xs, flux, h, d_min, d_max)


def sample(ic: InitialCondition, n: int, flux: FluxModel, mode: str = "equidistant", **kw
           ) -> ParticleSystem:
    if mode == "equidistant":
        return sample_equidistant(ic, n, flux, **kw)
    if mode == "adaptive":
        return sample_adaptive(ic, n, flux, **kw)
    raise ValueError(f"unknown sampling mode {mode!r}")


def sampling_error(system: ParticleSystem, ic: InitialCondition) -> float:
    """L1 distance between the sampled interpolant and ``u0`` over the domain."""
    from .geometry import l1_distance
    return l1_distance(system, ic.u0, ic.domain,
                       breakpoints=[d[0] for d in ic.discontinuities]).value
