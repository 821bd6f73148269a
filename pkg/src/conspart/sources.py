"""Balance laws ``u_t + f(u)_x = g(x, u)`` by integrating characteristics.

With a source each particle follows

    dx/dt = f'(u),    du/dt = g(x, u),

which is integrated with classical Runge-Kutta. Collision times are no longer
known in closed form, so particles are merged once they come within
``d_min``. Interpolation and management still use only the flux.

Sources whose x-dependence has kinks or jumps are described region by region;
every region carries a smooth formula that is also used slightly outside the
region, so a step crossing a region boundary can be split at the crossing
and each part integrated with a smooth right-hand side.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .engine import MergeError, RunResult, deduplicate, insert_gaps, merge_pair
from .nonconvex import enforce_inflection_particles
from .particles import ParticleSystem

#: bisection tolerance (in time) for locating a boundary crossing
CROSSING_TOL = 1e-12
MAX_HALVINGS = 20


def _zero(x, u):
    return np.zeros(np.broadcast(np.asarray(x), np.asarray(u)).shape)


@dataclass(frozen=True)
class SourceModel:
    """Source ``g(x, u)`` given piecewise over regions split at ``x_discontinuities``.

    ``regions[k]`` is a vectorized smooth function of ``(x, u)`` valid between
    discontinuities ``k-1`` and ``k``; it must be defined (as a smooth
    extension) slightly beyond that interval too.
    """

    regions: tuple
    x_discontinuities: tuple = ()
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        d = tuple(float(v) for v in self.x_discontinuities)
        if list(d) != sorted(d):
            raise ValueError("source discontinuities must be sorted")
        if len(self.regions) != len(d) + 1:
            raise ValueError("need one region function per interval")
        object.__setattr__(self, "x_discontinuities", d)
        object.__setattr__(self, "regions", tuple(self.regions))

    # ------------------------------------------------------------------
    @classmethod
    def none(cls) -> "SourceModel":
        return cls((_zero,), (), name="none")

    @classmethod
    def uniform(cls, g: Callable, name: str = "uniform") -> "SourceModel":
        """A source that is smooth in ``x`` everywhere."""
        return cls((g,), (), name=name)

    @classmethod
    def bottom_profile(cls, b: Optional[Callable] = None, db: Optional[Callable] = None,
                       support: Sequence[float] = (4.5, 5.5)) -> "SourceModel":
        """``g = b'(x) u`` for a bottom ``b`` supported on ``support``.

        The default is ``b(x) = cos(pi x)`` on ``[4.5, 5.5]``.
        """
        if b is None:
            b = lambda x: np.cos(np.pi * x)  # noqa: E731
            db = lambda x: -np.pi * np.sin(np.pi * x)  # noqa: E731
        if db is None:
            raise ValueError("bottom_profile needs the derivative of b")
        lo, hi = map(float, support)

        def inside(x, u):
            return db(np.asarray(x, float)) * np.asarray(u, float)

        return cls((_zero, inside, _zero), (lo, hi), name="bottom",
                   params={"support": (lo, hi), "b": b, "db": db})

    @classmethod
    def piecewise_polynomial_bottom(cls, breaks: Sequence[float],
                                    coefficients: Sequence[Sequence[float]]) -> "SourceModel":
        """``g = b'(x) u`` with ``b`` a polynomial on each interval of ``breaks``.

        ``coefficients[k]`` holds the polynomial on ``[breaks[k], breaks[k+1]]``
        in increasing powers; ``b`` is zero outside. Every polynomial is its
        own smooth extension.
        """
        breaks = [float(v) for v in breaks]
        if len(coefficients) != len(breaks) - 1:
            raise ValueError("need one coefficient list per interval")
        regions = [_zero]
        for c in coefficients:
            dp = np.polynomial.Polynomial(c).deriv()
            regions.append(lambda x, u, dp=dp: dp(np.asarray(x, float)) * np.asarray(u, float))
        regions.append(_zero)
        return cls(tuple(regions), tuple(breaks), name="piecewise-bottom",
                   params={"breaks": breaks, "coefficients": [list(c) for c in coefficients]})

    # ------------------------------------------------------------------
    @property
    def is_zero(self) -> bool:
        return self.name == "none"

    def region_of(self, x, direction=None) -> np.ndarray:
        """Region index of each position.

        A position exactly on a discontinuity belongs to the region it is
        moving into (``direction`` is the sign of the velocity; right when 0).
        """
        x = np.asarray(x, float)
        d = np.asarray(self.x_discontinuities, float)
        r = np.searchsorted(d, x, side="right")
        if direction is not None and d.size:
            on = np.isin(x, d)
            if np.any(on):
                left = np.searchsorted(d, x, side="left")
                r = np.where(on & (np.asarray(direction) < 0), left, r)
        return r

    def evaluate_region(self, region, x, u) -> np.ndarray:
        x = np.asarray(x, float)
        u = np.asarray(u, float)
        region = np.broadcast_to(np.asarray(region, int), x.shape)
        out = np.empty(np.broadcast(x, u).shape)
        for k, fun in enumerate(self.regions):
            m = region == k
            if np.any(m):
                out[m] = fun(x[m], u[m])
        return out

    def __call__(self, x, u) -> np.ndarray:
        return self.evaluate_region(self.region_of(x), x, u)

    def bounds(self, region):
        """``(lo, hi)`` arrays of the region intervals."""
        d = np.concatenate([[-np.inf], self.x_discontinuities, [np.inf]])
        region = np.asarray(region, int)
        return d[region], d[region + 1]


# ----------------------------------------------------------------------
# integration

def _rk4(x, u, region, dfun, source: SourceModel, dt):
    def rhs(xx, uu):
        return dfun(uu), source.evaluate_region(region, xx, uu)

    k1x, k1u = rhs(x, u)
    k2x, k2u = rhs(x + 0.5 * dt * k1x, u + 0.5 * dt * k1u)
    k3x, k3u = rhs(x + 0.5 * dt * k2x, u + 0.5 * dt * k2u)
    k4x, k4u = rhs(x + dt * k3x, u + dt * k3u)
    xn = x + dt / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
    un = u + dt / 6.0 * (k1u + 2 * k2u + 2 * k3u + k4u)
    if not (np.all(np.isfinite(xn)) and np.all(np.isfinite(un))):
        raise FloatingPointError("non-finite Runge-Kutta stage")
    return xn, un


def _step_one(x: float, u: float, dfun, source: SourceModel, dt: float) -> tuple:
    """One particle through ``dt``, splitting at every boundary crossing."""
    d = source.x_discontinuities
    remaining = dt
    region = int(source.region_of(x, np.sign(dfun(u)))) if d else 0
    for _ in range(4 * len(d) + 4):
        xa, ua = np.array([x]), np.array([u])
        ra = np.array([region])
        xn, un = _rk4(xa, ua, ra, dfun, source, remaining)
        lo, hi = source.bounds(region)
        if lo <= xn[0] <= hi:
            return float(xn[0]), float(un[0])
        wall = hi if xn[0] > hi else lo
        side = np.sign(xn[0] - wall)
        a, b = 0.0, remaining
        for _ in range(200):
            if b - a <= CROSSING_TOL:
                break
            mid = 0.5 * (a + b)
            xm, _ = _rk4(xa, ua, ra, dfun, source, mid)
            if np.sign(xm[0] - wall) == side:
                b = mid
            else:
                a = mid
        _, uc = _rk4(xa, ua, ra, dfun, source, b)
        x, u = float(wall), float(uc[0])
        remaining -= b
        region = region + 1 if wall == hi else region - 1
        if remaining <= 0:
            return x, u
    raise MergeError("too many source-boundary crossings in one step")


def rk4_step(x, u, flux, source: SourceModel, dt: float):
    """Advance particles ``(x, u)`` by one Runge-Kutta step of size ``dt``.

    Particles whose step would cross a discontinuity of the source are
    integrated in two (or more) pieces split at the crossing time.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    x = np.atleast_1d(np.asarray(x, float))
    u = np.atleast_1d(np.asarray(u, float))
    dfun = flux.df
    if not source.x_discontinuities:
        return _rk4(x, u, np.zeros(x.shape, int), dfun, source, dt)
    region = source.region_of(x, np.sign(dfun(u)))
    xn, un = _rk4(x, u, region, dfun, source, dt)
    lo, hi = source.bounds(region)
    cross = (xn < lo) | (xn > hi)
    # particles sitting on a boundary start in the region they move into
    for k in np.nonzero(cross)[0]:
        xn[k], un[k] = _step_one(float(x[k]), float(u[k]), dfun, source, dt)
    return xn, un


# ----------------------------------------------------------------------
# time loop

def default_time_step(system: ParticleSystem) -> float:
    """``0.2 h / max|f'|`` over the current values."""
    h = system.h if system.h else float(np.min(np.diff(system.x)[np.diff(system.x) > 0]))
    speed = float(np.max(np.abs(system.velocities()))) if len(system) else 0.0
    return 0.2 * h / max(speed, 1e-300)


def _merge_close(system: ParticleSystem, entropy_fix: bool) -> int:
    """Merge converging or overlapping neighbors within ``d_min``, left to right."""
    count = 0
    while True:
        if len(system) < 2:
            return count
        gap = np.diff(system.x)
        c = system.velocities()
        tol = 1e-12 * max(1.0, system.d_min)
        close = (gap <= system.d_min + tol) & ((c[:-1] > c[1:]) | (gap < 0))
        idx = np.nonzero(close)[0]
        if idx.size == 0:
            return count
        merge_pair(system, int(idx[0]), entropy_fix=entropy_fix)
        count += 1
        if count > 10 * (len(system) + 10):
            raise MergeError("merging near-coincident particles does not terminate")


def run_with_source(system: ParticleSystem, source: SourceModel, t_end: float,
                    dt: Optional[float] = None, output_times: Sequence[float] = (),
                    d_min: Optional[float] = None, insert: bool = False,
                    entropy_fix: bool = False) -> RunResult:
    """Fixed-step Runge-Kutta evolution with proximity merging, in place.

    Parameters
    ----------
    system : ParticleSystem
    source : SourceModel
    t_end : float
    dt : float, optional
        Default ``0.2 h / max|f'|`` from the initial values.
    output_times : sequence of float
    d_min : float, optional
        Merge distance; default ``0.1 h`` when the system has none.
    insert : bool
        Insert into large deviating gaps after each step (off by default).
    entropy_fix : bool
        Refine merge flanks until the entropy neighbor test holds. Off by
        default: sources create genuine local extrema, and the flank
        particles it inserts lie within ``d_min`` and are merged again, so
        the refinement can cycle without end. Violations are logged.

    Notes
    -----
    A step after which two neighbors are out of order by more than ``d_min``
    is retried with half the step, at most 20 times.
    """
    if d_min is not None:
        system.d_min = float(d_min)
    elif system.d_min <= 0:
        if not system.h:
            raise ValueError("d_min must be positive for source runs")
        system.d_min = 0.1 * system.h
    if dt is None:
        dt = default_time_step(system)
    if dt <= 0:
        raise ValueError("dt must be positive")
    enforce_inflection_particles(system)
    outs = sorted(float(t) for t in output_times if t <= t_end)
    if not outs or outs[-1] != t_end:
        outs.append(float(t_end))
    result = RunResult()
    k = 0
    while k < len(outs):
        target = outs[k]
        if target - system.time <= 1e-12 * max(1.0, abs(target)):
            system.time = target
            result.times.append(target)
            result.snapshots.append(system.copy())
            k += 1
            continue
        step = min(dt, target - system.time)
        for _ in range(MAX_HALVINGS + 1):
            xn, un = rk4_step(system.x, system.u, system.flux, source, step)
            if xn.size < 2 or np.max(xn[:-1] - xn[1:]) <= system.d_min:
                break
            step *= 0.5
        else:
            raise MergeError(f"particle ordering lost at t={system.time} even after "
                             f"{MAX_HALVINGS} step halvings")
        system.x, system.u = xn, un
        system.time += step
        result.loops += 1
        deduplicate(system)
        enforce_inflection_particles(system)
        if insert:
            insert_gaps(system)
        result.collisions += _merge_close(system, entropy_fix)
        system.check_finite()
    return result
