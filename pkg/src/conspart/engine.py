"""Time evolution of a particle system.

Particles move along straight characteristics until two of them collide.
At each collision the system is managed: coincident clusters are thinned,
large deviating gaps get new particles on the interpolant, and colliding
pairs are merged into one particle chosen so the total area is unchanged.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .flux import FluxModel
from .geometry import segment_areas, total_area
from .particles import ParticleSystem

logger = logging.getLogger(__name__)

#: collisions closer than this relative amount to the earliest are simultaneous
COLLISION_RTOL = 1e-12
#: solve tolerance in units of roundoff of the local area
AREA_ULPS = 8.0
#: slack on the entropy neighbor condition, relative to the value scale
ENTROPY_SLACK = 1e-13
MAX_NEWTON = 25


class MergeError(RuntimeError):
    """A merge could not be completed consistently."""


# ----------------------------------------------------------------------
# collisions and motion

def collision_times(system: ParticleSystem) -> np.ndarray:
    """Time until each adjacent pair comes within ``d_min``; ``inf`` if never."""
    x = system.x
    if x.size < 2:
        return np.zeros(0)
    c = system.velocities()
    gap = np.diff(x) - system.d_min
    closing = c[:-1] - c[1:]
    dt = np.full(gap.shape, np.inf)
    conv = closing > 0
    dt[conv] = np.maximum(gap[conv], 0.0) / closing[conv]
    return dt


def next_collision(system: ParticleSystem):
    """Earliest collision time and the indices ``i`` of all pairs ``(i, i+1)`` reaching it."""
    dt = collision_times(system)
    if dt.size == 0 or not np.isfinite(dt).any():
        return np.inf, np.zeros(0, int)
    m = float(dt.min())
    pairs = np.nonzero(dt <= m * (1.0 + COLLISION_RTOL))[0]
    return m, pairs


def advance(system: ParticleSystem, dt: float, check: bool = True) -> ParticleSystem:
    """Move every particle by ``f'(u) dt`` in place."""
    if dt < 0:
        raise ValueError("cannot advance backwards in time")
    if check:
        limit, _ = next_collision(system)
        if dt > limit * (1.0 + 1e-12) + 1e-300:
            raise ValueError(f"dt={dt} passes the next collision at {limit}")
    if dt > 0:
        system.x = system.x + system.velocities() * dt
        system.time += dt
    return system


def _snap_pairs(system: ParticleSystem, pairs: np.ndarray) -> None:
    """Give colliding particles a common position (chains share one)."""
    if pairs.size == 0 or system.d_min > 0:
        return
    pairs = np.sort(pairs)
    start = pairs[0]
    prev = pairs[0]
    groups = []
    for p in pairs[1:]:
        if p == prev + 1:
            prev = p
            continue
        groups.append((start, prev + 1))
        start = prev = p
    groups.append((start, prev + 1))
    for a, b in groups:
        system.x[a:b + 1] = np.mean(system.x[a:b + 1])
    # roundoff in the motion can disorder otherwise untouched neighbors
    system.x = np.maximum.accumulate(system.x)


# ----------------------------------------------------------------------
# coincident particles

def deduplicate(system: ParticleSystem) -> int:
    """Thin clusters of three or more coincident particles.

    Keeps the particles with the smallest and largest value plus any
    inflection particles, in their original order. Returns the number of
    particles removed.
    """
    x = system.x
    n = x.size
    if n < 3:
        return 0
    same = np.diff(x) == 0
    if not np.any(same[:-1] & same[1:]):
        return 0
    keep = np.ones(n, bool)
    i = 0
    removed = 0
    while i < n:
        j = i
        while j + 1 < n and x[j + 1] == x[i]:
            j += 1
        if j - i >= 2:
            block = np.arange(i, j + 1)
            vals = system.u[block]
            chosen = {block[int(np.argmin(vals))], block[int(np.argmax(vals))]}
            chosen.update(block[system.is_inflection[block]].tolist())
            drop = [k for k in block if k not in chosen]
            if drop:
                lo, hi = i, j
                if i > 0:
                    lo -= 1
                if j < n - 1:
                    hi += 1
                before = (x[lo:hi + 1].copy(), system.u[lo:hi + 1].copy())
                keep[drop] = False
                sel = np.arange(lo, hi + 1)[keep[lo:hi + 1]]
                after = (x[sel], system.u[sel])
                system.record("dedup", i, before, after,
                              _local_area(system.flux, *before), _local_area(system.flux, *after))
                removed += len(drop)
        i = j + 1
    system.keep(keep)
    return removed


# ----------------------------------------------------------------------
# insertion

def _midpoint_value(flux: FluxModel, x1, u1, x2, u2):
    """Value of the interpolant at the midpoint; for vertical segments the
    value whose velocity is the mean, i.e. the middle of the fan."""
    x1, u1, x2, u2 = map(np.asarray, (x1, u1, x2, u2))
    q = 0.5 * (flux.df(u1) + flux.df(u2))
    v = flux.invert_df(q, u1, u2)
    return np.where(u1 == u2, u1, v)


def insert_particle(system: ParticleSystem, i: int, force: bool = False,
                    kind: str = "insert") -> ParticleSystem:
    """Insert one particle at the midpoint of gap ``(i, i+1)`` on the interpolant.

    Without ``force`` the pair must be deviating (or constant) and at least
    ``d_max`` apart.
    """
    x, u = system.x, system.u
    if not 0 <= i < x.size - 1:
        raise IndexError("gap index out of range")
    if not force:
        c1, c2 = system.flux.df(u[i]), system.flux.df(u[i + 1])
        if c1 > c2:
            raise ValueError("pair is converging; nothing to insert")
        if x[i + 1] - x[i] < system.d_max:
            raise ValueError("gap is below d_max")
    xm = 0.5 * (x[i] + x[i + 1])
    vm = float(_midpoint_value(system.flux, x[i], u[i], x[i + 1], u[i + 1]))
    before = (x[i:i + 2].copy(), u[i:i + 2].copy())
    after = (np.array([x[i], xm, x[i + 1]]), np.array([u[i], vm, u[i + 1]]))
    system.insert_many([i + 1], [xm], [vm])
    system.record(kind, i + 1, before, after, _local_area(system.flux, *before),
                  _local_area(system.flux, *after))
    return system


def insert_gaps(system: ParticleSystem) -> int:
    """Insert midpoints into every deviating gap ``>= d_max`` until none is left."""
    total = 0
    flux = system.flux
    while True:
        x, u = system.x, system.u
        if x.size < 2 or not np.isfinite(system.d_max):
            return total
        c = system.velocities()
        gaps = np.diff(x)
        idx = np.nonzero((gaps >= system.d_max) & (c[1:] >= c[:-1]))[0]
        if idx.size == 0:
            return total
        xm = 0.5 * (x[idx] + x[idx + 1])
        vm = np.asarray(_midpoint_value(flux, x[idx], u[idx], x[idx + 1], u[idx + 1]), float)
        if system.log_events:
            for k, j in enumerate(idx):
                before = (x[j:j + 2].copy(), u[j:j + 2].copy())
                after = (np.array([x[j], xm[k], x[j + 1]]), np.array([u[j], vm[k], u[j + 1]]))
                system.record("insert", int(j + 1 + k), before, after,
                              _local_area(flux, *before), _local_area(flux, *after))
        system.insert_many(idx + 1, xm, vm)
        total += idx.size


# ----------------------------------------------------------------------
# merging

def _local_area(flux: FluxModel, x, u) -> float:
    return float(np.sum(segment_areas(x, u, flux)))


def solve_merge_value(flux: FluxModel, x1: float, u1: float, x23: float, x4: float,
                      u4: float, area: float, guess: float, bracket: Sequence[float],
                      extended: Sequence[float]) -> float:
    """Solve ``(x23-x1) a(u1,u) + (x4-x23) a(u,u4) = area`` for ``u``.

    The left side is increasing in ``u``. Newton from ``guess`` with
    bisection safeguarding inside ``bracket``; the bracket grows to
    ``extended`` and then geometrically when it does not contain the root.
    """
    wl, wr = x23 - x1, x4 - x23
    if flux.quadratic:
        # the average is the arithmetic mean, so the equation is linear
        if wl + wr == 0:
            return float(guess)
        return float((2.0 * area - wl * u1 - wr * u4) / (wl + wr))

    def g(v):
        return wl * flux.nonlinear_average(u1, v) + wr * flux.nonlinear_average(v, u4) - area

    scale = abs(area) + (abs(wl) + abs(wr)) * max(abs(u1), abs(u4), abs(float(guess)))
    tol = AREA_ULPS * np.finfo(float).eps * scale
    lo, hi = float(min(bracket)), float(max(bracket))
    glo, ghi = g(lo), g(hi)
    if not (glo <= 0 <= ghi):
        lo, hi = float(min(extended)), float(max(extended))
        glo, ghi = g(lo), g(hi)
        span = max(hi - lo, 1e-8 * (1 + abs(lo)))
        for _ in range(60):
            if glo <= 0 <= ghi:
                break
            if glo > 0:
                lo -= span
                glo = g(lo)
            if ghi < 0:
                hi += span
                ghi = g(hi)
            span *= 2.0
        else:
            raise MergeError("merge area equation has no bracketed root")
    if abs(glo) <= tol:
        return lo
    if abs(ghi) <= tol:
        return hi
    v = min(max(float(guess), lo), hi)
    for it in range(200):
        gv = g(v)
        if abs(gv) <= tol:
            return v
        if gv < 0:
            lo = v
        else:
            hi = v
        step = None
        if it < MAX_NEWTON:
            _, p2 = flux.average_partials(u1, v)
            p1, _ = flux.average_partials(v, u4)
            dg = wl * p2 + wr * p1
            if dg > 0:
                step = v - gv / dg
        if step is None or not lo < step < hi:
            step = 0.5 * (lo + hi)
        if step == v or hi - lo <= 4 * np.finfo(float).eps * max(abs(lo), abs(hi), 1e-300):
            return v
        v = step
    return v


def merge_is_tvd_safe(system: ParticleSystem, i: int, samples: int = 65) -> bool:
    """Sufficient condition for the merged value to stay between ``u_i`` and ``u_{i+1}``.

    Evaluates ``|u3-u2|/(x3-x2) >= 4 (max|f''|/min|f''|)^6 (max u - min u) / min(x4-x3, x2-x1)``
    on the four particles ``i-1 .. i+2``, extrema of ``|f''|`` sampled over
    the value range. Always true when ``x2 == x3``.
    """
    if i < 1 or i + 2 >= len(system):
        raise IndexError("merge_is_tvd_safe needs four consecutive particles")
    x = system.x[i - 1:i + 3]
    u = system.u[i - 1:i + 3]
    if x[2] == x[1]:
        return True
    if x[2] < x[1]:
        return False
    grid = np.linspace(u.min(), u.max(), samples)
    curv = np.abs(np.asarray(system.flux.ddf(grid), float) * np.ones_like(grid))
    cmin, cmax = curv.min(), curv.max()
    flank = min(x[3] - x[2], x[1] - x[0])
    if cmin == 0 or flank <= 0:
        return False
    lhs = abs(u[2] - u[1]) / (x[2] - x[1])
    rhs = 4.0 * (cmax / cmin) ** 6 * (u.max() - u.min()) / flank
    return bool(lhs >= rhs)


def merge_is_entropy_safe(u1: float, u23: float, u4: float, sign: int,
                          slack: float = ENTROPY_SLACK, abs_tol: float = 0.0) -> bool:
    """Neighbor condition under which a merge cannot increase Kruzkov entropy.

    For ``f'' > 0`` requires ``u1 >= u23 >= u4``; reversed for ``f'' < 0``.
    ``abs_tol`` adds the roundoff expected from the area solve.
    """
    tol = slack * max(1.0, abs(u1), abs(u4)) + abs_tol
    if sign > 0:
        return u1 + tol >= u23 >= u4 - tol
    if sign < 0:
        return u1 - tol <= u23 <= u4 + tol
    return True


def _solve_roundoff(system: ParticleSystem, i: int) -> float:
    """Roundoff of a merged value: area cancellation divided by the stencil width."""
    x = system.x[i - 1:i + 3]
    width = x[-1] - x[0]
    if width <= 0:
        return 0.0
    scale = float(np.max(np.abs(x))) * float(np.max(np.abs(system.u[i - 1:i + 3])))
    return 16.0 * np.finfo(float).eps * scale / width


def _merge_sign(flux: FluxModel, u) -> int:
    lo, hi = float(np.min(u)), float(np.max(u))
    return flux.convexity_sign(lo, hi)


def _compute_interior_merge(system: ParticleSystem, i: int):
    x, u = system.x, system.u
    x1, x2, x3, x4 = x[i - 1:i + 3]
    u1, u2, u3, u4 = u[i - 1:i + 3]
    area = _local_area(system.flux, x[i - 1:i + 3], u[i - 1:i + 3])
    x23 = 0.5 * (x2 + x3)
    if x23 - x1 == 0 and x4 - x23 == 0:
        return x23, float(np.clip(0.5 * (u2 + u3), min(u1, u4), max(u1, u4)))
    u23 = solve_merge_value(system.flux, x1, u1, x23, x4, u4, area,
                            guess=0.5 * (u2 + u3), bracket=(u2, u3),
                            extended=(min(u1, u2, u3, u4), max(u1, u2, u3, u4)))
    return x23, u23


def merge_pair(system: ParticleSystem, i: int, entropy_fix: bool = True,
               max_rounds: int = 10) -> int:
    """Replace colliding particles ``i`` and ``i+1`` by one, preserving area.

    Pairs involving an inflection particle are delegated to the five-point
    merge. Returns the index of the merged particle.
    """
    n = len(system)
    if not 0 <= i < n - 1:
        raise IndexError("merge index out of range")
    if system.is_inflection[i] or system.is_inflection[i + 1]:
        from .nonconvex import merge_involving_inflection
        return merge_involving_inflection(system, i, entropy_fix=entropy_fix,
                                          max_rounds=max_rounds)
    return merge_standard(system, i, entropy_fix=entropy_fix, max_rounds=max_rounds)


def merge_standard(system: ParticleSystem, i: int, entropy_fix: bool = True,
                   max_rounds: int = 10) -> int:
    """Four-point merge of pair ``(i, i+1)`` on a range where ``f''`` has one sign."""
    n = len(system)
    if i == 0 or i + 1 == n - 1:
        return _merge_boundary(system, i)
    rounds = 0
    while True:
        x23, u23 = _compute_interior_merge(system, i)
        u = system.u
        sign = _merge_sign(system.flux, u[i - 1:i + 3])
        if merge_is_entropy_safe(u[i - 1], u23, u[i + 2], sign,
                                 abs_tol=_solve_roundoff(system, i)):
            break
        if not entropy_fix:
            logger.debug("merge at x=%g violates the entropy neighbor condition", x23)
            break
        if rounds >= max_rounds:
            raise MergeError(f"entropy fix did not converge after {max_rounds} rounds "
                             f"at x={x23:.17g}, t={system.time:.17g}")
        rounds += 1
        insert_particle(system, i + 1, force=True, kind="entropy_fix")
        insert_particle(system, i - 1, force=True, kind="entropy_fix")
        i += 1
    tvd_safe = merge_is_tvd_safe(system, i)
    lo, hi = i - 1, i + 2
    before = (system.x[lo:hi + 1].copy(), system.u[lo:hi + 1].copy())
    after = (np.array([system.x[lo], x23, system.x[hi]]),
             np.array([system.u[lo], u23, system.u[hi]]))
    system.splice(i, i + 2, [x23], [u23], shock=[True])
    system.record("merge", i, before, after, _local_area(system.flux, *before),
                  _local_area(system.flux, *after), tvd_guard=tvd_safe,
                  entropy_rounds=rounds)
    return i


def _merge_boundary(system: ParticleSystem, i: int) -> int:
    """Merge a pair lacking an outer neighbor.

    The merged particle sits at the outer member's position, so the system's
    extent is unchanged, and its value conserves the area together with the
    one existing flank.
    """
    n = len(system)
    x, u = system.x, system.u
    flux = system.flux
    if n == 2:
        before = (x.copy(), u.copy())
        xm, um = 0.5 * (x[0] + x[1]), 0.5 * (u[0] + u[1])
        system.splice(0, 2, [xm], [um], shock=[True])
        system.record("merge_boundary", 0, before, (np.array([xm]), np.array([um])),
                      _local_area(flux, *before), 0.0)
        return 0
    if i == 0:
        lo, hi = 0, 2
        x23 = x[0]
        area = _local_area(flux, x[0:3], u[0:3])
        u23 = solve_merge_value(flux, x23, u[2], x23, x[2], u[2], area,
                                guess=0.5 * (u[0] + u[1]), bracket=(u[0], u[1]),
                                extended=(u[0:3].min(), u[0:3].max()))
        after = (np.array([x23, x[2]]), np.array([u23, u[2]]))
    else:
        lo, hi = n - 3, n - 1
        x23 = x[-1]
        area = _local_area(flux, x[-3:], u[-3:])
        u23 = solve_merge_value(flux, x[-3], u[-3], x23, x23, u[-3], area,
                                guess=0.5 * (u[-2] + u[-1]), bracket=(u[-2], u[-1]),
                                extended=(u[-3:].min(), u[-3:].max()))
        after = (np.array([x[-3], x23]), np.array([u[-3], u23]))
    before = (x[lo:hi + 1].copy(), u[lo:hi + 1].copy())
    system.splice(i, i + 2, [x23], [u23], shock=[True])
    system.record("merge_boundary", i, before, after, _local_area(flux, *before),
                  _local_area(flux, *after))
    return i


def mergeable_pairs(system: ParticleSystem) -> np.ndarray:
    """Converging pairs no farther apart than ``d_min``."""
    if len(system) < 2:
        return np.zeros(0, int)
    c = system.velocities()
    gap = np.diff(system.x)
    tol = 1e-12 * max(1.0, system.d_min)
    return np.nonzero((c[:-1] > c[1:]) & (gap <= system.d_min + tol))[0]


def merge_all(system: ParticleSystem, entropy_fix: bool = True) -> int:
    """Merge colliding pairs left to right, rescanning after each merge."""
    count = 0
    start = 0
    while True:
        pairs = mergeable_pairs(system)
        pairs = pairs[pairs >= max(start - 3, 0)]
        if pairs.size == 0:
            return count
        k = merge_pair(system, int(pairs[0]), entropy_fix=entropy_fix)
        start = k
        count += 1


def manage(system: ParticleSystem, pairs: Optional[np.ndarray] = None,
           insert: bool = True, entropy_fix: bool = True) -> None:
    """Management at a collision: snap, thin clusters, insert, then merge."""
    if pairs is not None:
        _snap_pairs(system, pairs)
    deduplicate(system)
    if insert:
        insert_gaps(system)
    merge_all(system, entropy_fix=entropy_fix)


# ----------------------------------------------------------------------
# time loop

@dataclass
class RunResult:
    """Snapshots at the requested output times plus loop statistics."""

    times: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    collisions: int = 0
    loops: int = 0

    def at(self, t: float) -> ParticleSystem:
        k = int(np.argmin(np.abs(np.asarray(self.times) - t)))
        return self.snapshots[k]


def run(system: ParticleSystem, t_end: float, output_times: Sequence[float] = (),
        entropy_fix: bool = True, max_loops: Optional[int] = None) -> RunResult:
    """Evolve ``system`` in place to ``t_end``, copying it at each output time.

    The state at ``t_end`` is always recorded as the final snapshot.
    """
    if t_end < system.time:
        raise ValueError("t_end lies before the current time")
    from .nonconvex import enforce_inflection_particles
    enforce_inflection_particles(system)
    outs = sorted(float(t) for t in output_times if t <= t_end)
    if not outs or outs[-1] != t_end:
        outs.append(float(t_end))
    if max_loops is None:
        max_loops = 200 * (len(system) + 10) ** 2
    result = RunResult()
    k = 0
    while k < len(outs) and outs[k] <= system.time:
        result.times.append(outs[k])
        result.snapshots.append(system.copy())
        k += 1
    while k < len(outs):
        target = outs[k]
        dt, pairs = next_collision(system)
        result.loops += 1
        if result.loops > max_loops:
            raise MergeError(f"no progress after {max_loops} management loops at t={system.time}")
        if system.time + dt >= target:
            advance(system, target - system.time, check=False)
            system.time = target
            system.check_finite()
            result.times.append(target)
            result.snapshots.append(system.copy())
            k += 1
            continue
        advance(system, dt, check=False)
        result.collisions += 1
        manage(system, pairs, entropy_fix=entropy_fix)
        system.check_finite()
    return result


# ----------------------------------------------------------------------
# shock post-processing

def _shock_runs(system: ParticleSystem):
    flags = system.is_shock
    n = len(system)
    runs = []
    i = 1
    while i < n - 1:
        if flags[i]:
            j = i
            while j + 1 < n - 1 and flags[j + 1]:
                j += 1
            runs.append((i, j))
            i = j + 1
        else:
            i += 1
    return runs


def _jump_position(system: ParticleSystem, lo: int, hi: int):
    """Area-conserving jump between particles ``lo`` and ``hi`` (exclusive interior)."""
    x, u = system.x, system.u
    x1, u1, x3, u3 = x[lo], u[lo], x[hi], u[hi]
    if u1 == u3:
        return None
    area = _local_area(system.flux, x[lo:hi + 1], u[lo:hi + 1])
    xbar = (area - x3 * u3 + x1 * u1) / (u1 - u3)
    return float(np.clip(xbar, x1, x3))


def reconstruct_shocks(system: ParticleSystem) -> ParticleSystem:
    """Copy of ``system`` with each shock particle replaced by a sharp jump.

    A run of consecutive shock particles between flanks ``(x1, u1)`` and
    ``(x3, u3)`` becomes two particles ``(xbar, u1), (xbar, u3)`` with
    ``xbar`` chosen so the area between the flanks is unchanged. Zero-height
    runs (``u1 == u3``) are dropped; runs whose flanks diverge are left alone.
    """
    out = system.copy()
    out.log_events = False
    runs = _shock_runs(system)
    c = system.velocities()
    pieces_x, pieces_u, pieces_s, pieces_i = [], [], [], []
    last = 0
    for a, b in runs:
        lo, hi = a - 1, b + 1
        if c[lo] <= c[hi]:
            continue
        u1, u3 = system.u[lo], system.u[hi]
        if u1 == u3:
            xs, us = np.zeros(0), np.zeros(0)
        else:
            xbar = _jump_position(system, lo, hi)
            xs, us = np.array([xbar, xbar]), np.array([u1, u3])
        pieces_x += [system.x[last:a], xs]
        pieces_u += [system.u[last:a], us]
        pieces_s += [system.is_shock[last:a], np.zeros(xs.size, bool)]
        pieces_i += [system.is_inflection[last:a], np.zeros(xs.size, bool)]
        last = b + 1
    pieces_x.append(system.x[last:])
    pieces_u.append(system.u[last:])
    pieces_s.append(system.is_shock[last:])
    pieces_i.append(system.is_inflection[last:])
    out.x = np.concatenate(pieces_x)
    out.u = np.concatenate(pieces_u)
    out.is_shock = np.concatenate(pieces_s)
    out.is_inflection = np.concatenate(pieces_i)
    # flanks on constant states can land exactly on the jump; drop the copies
    same = np.zeros(len(out), bool)
    same[1:] = (np.diff(out.x) == 0) & (np.diff(out.u) == 0) & ~out.is_inflection[1:]
    if np.any(same):
        out.keep(~same)
    return out


def shock_positions(system: ParticleSystem) -> list:
    """Positions of the reconstructed jumps, left to right."""
    c = system.velocities()
    out = []
    for a, b in _shock_runs(system):
        lo, hi = a - 1, b + 1
        if c[lo] <= c[hi]:
            continue
        xbar = _jump_position(system, lo, hi)
        if xbar is not None:
            out.append(xbar)
    return out


def area_flux_correction(system: ParticleSystem, dt: float) -> float:
    """Change of total area over ``dt`` caused by the end particles.

    Between particles the area evolves as ``d/dt A = [F(u)]``, so with the end
    values fixed the total changes by ``(F(u_last) - F(u_first)) dt``.
    """
    if len(system) < 2:
        return 0.0
    f = system.flux
    return float((f.legendre(system.u[-1]) - f.legendre(system.u[0])) * dt)
