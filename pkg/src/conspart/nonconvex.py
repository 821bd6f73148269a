"""Inflection particles and the five-point merge for non-convex fluxes.

Between two neighbors of opposite convexity an inflection particle (value
``u*`` with ``f''(u*) = 0``) must sit, so every interpolant lives on a range
where ``f''`` has one sign. When a neighbor collides with an inflection
particle the usual four-point merge would destroy it; instead five particles
are rearranged by one of three area-preserving moves.

The moves are written for one canonical orientation: ``f''' > 0`` at ``u*``
(the inflection particle is locally the slowest), its left neighbor 2
collides with it, and ``u2 > u* > u4``. Other orientations are mapped onto it
by mirroring space (``x -> -x``, order reversed, ``f -> -f``) and/or
reflecting values about ``u*`` (``w = 2u* - u``, ``h(w) = -f(2u* - w)``),
both of which keep characteristic motion and areas consistent.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .engine import MergeError, _local_area, merge_standard
from .flux import FluxModel
from .particles import ParticleSystem

#: solve tolerance in units of roundoff of the local area
AREA_ULPS = 16.0
#: values this close to an inflection value are snapped onto it
SNAP_TOL = 1e-12


@dataclass(frozen=True)
class InflectionMergeCase:
    """Which symmetry maps bring a collision into canonical form.

    ``mirrored``: the inflection particle collides with its right neighbor,
    so space is mirrored. ``reflected``: after mirroring, the colliding
    neighbor's value lies below ``u*``, so values are reflected about ``u*``.
    """

    mirrored: bool
    reflected: bool


# ----------------------------------------------------------------------
# maintenance

def enforce_inflection_particles(system: ParticleSystem,
                                 locate: Optional[Callable[[float, float, float], float]] = None
                                 ) -> int:
    """Insert inflection particles between neighbors of opposite convexity.

    Particles whose value already equals an inflection value (to ``1e-12``)
    are flagged. For a pair whose open value interval contains ``u*``, a
    particle ``(x_c, u*)`` is inserted; ``x_c`` is the shared position for
    coincident particles, ``locate(u*, x1, x2)`` when given (sampling passes
    a root finder on the initial data), and the value-linear crossing point
    otherwise. Returns the number of inserted particles.
    """
    flux = system.flux
    infl = np.asarray(flux.inflection_values, float)
    if infl.size == 0 or len(system) == 0:
        return 0
    u = system.u
    for v in infl:
        near = np.abs(u - v) <= SNAP_TOL * max(1.0, abs(v))
        system.u[near] = v
        system.is_inflection |= near
    inserted = 0
    i = 0
    while i < len(system) - 1:
        x1, x2 = system.x[i], system.x[i + 1]
        u1, u2 = system.u[i], system.u[i + 1]
        lo, hi = min(u1, u2), max(u1, u2)
        inside = infl[(infl > lo) & (infl < hi)]
        if inside.size == 0:
            i += 1
            continue
        vals = inside if u2 > u1 else inside[::-1]
        if x1 == x2:
            xs = np.full(vals.size, x1)
        elif locate is not None:
            xs = np.array([locate(float(v), x1, x2) for v in vals])
        else:
            xs = x1 + (vals - u1) / (u2 - u1) * (x2 - x1)
        xs = np.clip(np.maximum.accumulate(xs), x1, x2)
        before = (np.array([x1, x2]), np.array([u1, u2]))
        after = (np.concatenate([[x1], xs, [x2]]), np.concatenate([[u1], vals, [u2]]))
        system.insert_many(np.full(vals.size, i + 1), xs, vals,
                           inflection=np.ones(vals.size, bool))
        # the pair had no single-convexity interpolant, so its area is not
        # defined before the insertion; the log keeps the value-linear estimate
        system.record("inflection_insert", i + 1, before, after,
                      float((x2 - x1) * 0.5 * (u1 + u2)),
                      _local_area(flux, *after))
        inserted += vals.size
        i += vals.size + 1
    return inserted


# ----------------------------------------------------------------------
# the canonical five-point merge

def _bisect(fun: Callable[[float], float], lo: float, hi: float, target: float,
            tol: float) -> float:
    """Root of increasing ``fun(s) = target`` on ``[lo, hi]``."""
    flo = fun(lo) - target
    if abs(flo) <= tol:
        return lo
    fhi = fun(hi) - target
    if abs(fhi) <= tol:
        return hi
    if not flo < 0 < fhi:
        raise MergeError("attempt area function does not bracket the target")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        fm = fun(mid) - target
        if abs(fm) <= tol:
            return mid
        if fm < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def attempt_area_functions(x, w, flux: FluxModel):
    """The three area functions of the canonical merge and their parameter ranges.

    Returns a list of ``(function, lo, hi)``; each function is increasing on
    its range, and consecutive ranges meet at a common area value.
    """
    x1, x2, x3, x4, x5 = map(float, x)
    w1, w2, ws, w4, w5 = map(float, w)
    a = flux.nonlinear_average
    a1s = a(w1, ws)
    a45 = a(w4, w5)
    as4 = a(ws, w4)

    def area1(s):
        return (s - x1) * a1s + (x4 - s) * as4 + (x5 - x4) * a45

    def area2(s):
        return (s - x1) * a1s + (x5 - s) * a45

    def area3(v):
        return (x2 - x1) * a(w1, v) + (x5 - x2) * a(v, ws)

    return [(area1, x3, x4), (area2, x4, x5), (area3, ws, w2)]


def attempt_area_ranges(x, w, flux: FluxModel):
    """Area interval covered by each attempt, as ``[(lo, hi), ...]``.

    The third attempt starts where the second ends: lowering ``u2`` stops at
    the value lying on the interpolant from particle 1 to ``(x5, u*)``.
    """
    fns = attempt_area_functions(x, w, flux)
    r1 = (fns[0][0](fns[0][1]), fns[0][0](fns[0][2]))
    r2 = (fns[1][0](fns[1][1]), fns[1][0](fns[1][2]))
    r3 = (r2[1], fns[2][0](fns[2][2]))
    return [r1, r2, r3]


def canonical_inflection_merge(x, w, flux: FluxModel):
    """Merge five canonical particles; particle 3 is the inflection particle.

    Parameters
    ----------
    x, w : array_like of length 5
        Positions with ``x2 == x3`` (or within ``d_min``) and values with
        ``w2 > w3 = u* > w4``.
    flux : FluxModel
        Flux in the canonical frame (``f''' > 0`` at ``u*``).

    Returns
    -------
    x_new, w_new : ndarray of length 4
    changed : ndarray of bool
        Which of the four output particles were moved or altered.
    attempt : int
        1, 2 or 3.
    """
    x = np.asarray(x, float)
    w = np.asarray(w, float)
    area = _local_area(flux, x, w)
    tol = AREA_ULPS * np.finfo(float).eps * (abs(area) + (x[-1] - x[0]) * np.max(np.abs(w)))
    fns = attempt_area_functions(x, w, flux)
    x1, x2, x3, x4, x5 = x
    w1, w2, ws, w4, w5 = w

    f1, lo1, hi1 = fns[0]
    if f1(hi1) >= area - tol:
        lo = lo1
        if f1(lo) > area + tol:
            # particles 2 and 3 overlapped instead of touching; search leftwards
            lo = x1
        s = _bisect(f1, lo, hi1, area, tol)
        return (np.array([x1, s, x4, x5]), np.array([w1, ws, w4, w5]),
                np.array([False, True, False, False]), 1)
    f2, lo2, hi2 = fns[1]
    if f2(hi2) >= area - tol:
        s = _bisect(f2, lo2, hi2, area, tol)
        return (np.array([x1, s, s, x5]), np.array([w1, ws, w4, w5]),
                np.array([False, True, True, False]), 2)
    f3, lo3, hi3 = fns[2]
    v = _bisect(f3, lo3, hi3, area, tol)
    return (np.array([x1, x2, x5, x5]), np.array([w1, v, ws, w5]),
            np.array([False, True, True, False]), 3)


def _canonical_frame(system: ParticleSystem, i: int):
    """Indices, canonical coordinates and case for a collision at pair ``(i, i+1)``."""
    k = i + 1 if system.is_inflection[i + 1] else i
    mirrored = k == i
    if mirrored:
        idx = np.array([k + 2, k + 1, k, k - 1, k - 2])
    else:
        idx = np.array([k - 2, k - 1, k, k + 1, k + 2])
    if idx.min() < 0 or idx.max() >= len(system):
        raise MergeError("an inflection merge needs two particles on each side")
    x = system.x[idx]
    u = system.u[idx]
    flux = system.flux
    if mirrored:
        x = -x
        flux = flux.negated()
    ustar = u[2]
    reflected = bool(u[1] < ustar)
    if reflected:
        u = 2.0 * ustar - u
        u[2] = ustar
        flux = flux.reflected(ustar)
    return k, idx, x, u, flux, InflectionMergeCase(mirrored, reflected)


def merge_involving_inflection(system: ParticleSystem, i: int, entropy_fix: bool = True,
                               max_rounds: int = 10) -> int:
    """Merge colliding pair ``(i, i+1)`` where one particle is an inflection particle.

    When the colliding neighbor and the particle beyond the inflection
    particle lie on the same side of ``u*`` nothing straddles the inflection
    value, and the ordinary four-point merge applies.
    """
    k = i + 1 if system.is_inflection[i + 1] else i
    other = i if k == i + 1 else i + 1
    beyond = k + 1 if k == i + 1 else k - 1
    ustar = system.u[k]
    if not 0 <= beyond < len(system) or (
            (system.u[other] - ustar) * (system.u[beyond] - ustar) >= 0):
        return merge_standard(system, i, entropy_fix=entropy_fix, max_rounds=max_rounds)
    k, idx, xc, wc, fc, case = _canonical_frame(system, i)
    x_new, w_new, changed, attempt = canonical_inflection_merge(xc, wc, fc)
    infl_new = np.array([False, False, False, False])
    # position of the inflection particle among the four outputs
    infl_new[1 if attempt in (1, 2) else 2] = True
    if case.reflected:
        w_new = 2.0 * ustar - w_new
        w_new[infl_new] = ustar
    if case.mirrored:
        x_new = -x_new[::-1]
        w_new = w_new[::-1]
        changed = changed[::-1]
        infl_new = infl_new[::-1]
    lo, hi = idx.min(), idx.max()
    before = (system.x[lo:hi + 1].copy(), system.u[lo:hi + 1].copy())
    old_shock = system.is_shock[[lo, hi]]
    shock = changed.copy()
    shock[0] |= old_shock[0]
    shock[-1] |= old_shock[1]
    system.splice(lo, hi + 1, x_new, w_new, shock=shock, inflection=infl_new)
    system.record("merge_inflection", k, before, (x_new, w_new),
                  _local_area(system.flux, *before), _local_area(system.flux, x_new, w_new),
                  attempt=attempt, mirrored=case.mirrored, reflected=case.reflected)
    return int(lo + np.argmax(infl_new))
