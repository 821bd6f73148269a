"""Problem presets and the drivers behind the command line.

A :class:`Problem` fixes flux, initial data, source, final time and the
window over which errors are measured, and knows how to produce a
reference: an exact solution where one is available, otherwise a fine
finite-volume run.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .engine import reconstruct_shocks, run, shock_positions
from .flux import FluxModel, make_flux
from .geometry import total_area, total_variation
from .particles import ParticleSystem
from .reference import (BuckleyJumpsExact, ExactSolution, FvGrid, LaxOleinikExact,
                        RiemannExact, fit_order, fv_error, fv_run, l1_error_vs_reference,
                        particle_error)
from .sampling import (InitialCondition, buckley_jumps, constant, gaussian_cosine,
                       piecewise_constant, piecewise_polynomial, riemann, sample,
                       sampling_error)
from .sources import SourceModel, run_with_source


@dataclass
class Problem:
    """Everything needed to run and score one experiment.

    ``ic.domain`` is where particles are sampled; ``fv_domain`` is the grid
    of the finite-volume oracle; ``window`` is where errors are measured.
    """

    name: str
    flux: FluxModel
    ic: InitialCondition
    t_end: float
    window: tuple
    source: SourceModel = field(default_factory=SourceModel.none)
    fv_ic: Optional[InitialCondition] = None
    exact: Optional[Callable[[float], ExactSolution]] = None
    moving_window: Optional[Callable[[float], tuple]] = None

    def window_at(self, t: float) -> tuple:
        """Error window at time ``t`` (the fixed window unless it moves)."""
        if self.moving_window is not None:
            return tuple(self.moving_window(t))
        return tuple(self.window)

    @property
    def fv_initial(self) -> InitialCondition:
        return self.fv_ic if self.fv_ic is not None else self.ic

    @property
    def fv_domain(self):
        return self.fv_initial.domain

    def particles_for(self, n: int) -> int:
        """Particles sampled for nominal resolution ``n``.

        ``n`` itself when particles and oracle share a domain; otherwise the
        count giving the spacing of ``n`` points on the oracle domain.
        """
        if tuple(self.fv_domain) == tuple(self.ic.domain):
            return int(n)
        h = (self.fv_domain[1] - self.fv_domain[0]) / (n - 1)
        return int(round(self.ic.length / h)) + 1


def quartic_problem() -> Problem:
    """Quartic flux with a smooth bump that breaks into two shocks."""
    flux = FluxModel.quartic()
    ic = gaussian_cosine()
    # the far field moves at f'(0.5); a margin keeps the window inside the particles
    drift = float(flux.df(0.5))

    def window(t):
        return (-3.75 + drift * t, 3.75 + drift * t)

    return Problem("quartic", flux, ic, 10.0, window(10.0),
                   exact=lambda t: LaxOleinikExact(flux, ic, t, window(t)),
                   moving_window=window)


def buckley_problem() -> Problem:
    """Buckley-Leverett flux, a large jump across the inflection and a small one."""
    flux = FluxModel.buckley_leverett()
    ic = buckley_jumps()
    return Problem("buckley", flux, ic, 0.4, ic.domain,
                   exact=lambda t: BuckleyJumpsExact(flux, t))


def bottom_problem(t_end: float = 6.0) -> Problem:
    """Burgers with ``g = b'(x) u`` over ``b = cos(pi x)`` on ``[4.5, 5.5]``.

    Inflow enters from the left, so particles are sampled on a domain
    extended by ``max u * t_end`` to keep ``[0, 10]`` covered.
    """
    flux = FluxModel.burgers()
    values, breaks = [2.0, 1.5], [2.0]
    extent = max(values) * t_end
    ic = piecewise_constant(values, breaks, (-extent, 10.0), name="bottom-jump")
    fv_ic = piecewise_constant(values, breaks, (0.0, 10.0), name="bottom-jump")
    return Problem("bottom", flux, ic, t_end, (0.0, 10.0), SourceModel.bottom_profile(),
                   fv_ic=fv_ic)


def riemann_problem(u_left: float, u_right: float, x0: float = 0.0, domain=(-4.0, 4.0),
                    flux: Optional[FluxModel] = None, t_end: float = 2.0) -> Problem:
    flux = flux if flux is not None else FluxModel.burgers()
    ic = riemann(u_left, u_right, x0, domain)
    return Problem("riemann", flux, ic, t_end, tuple(domain),
                   exact=lambda t: RiemannExact(flux, u_left, u_right, x0, t))


PRESETS = {
    "quartic": quartic_problem,
    "buckley": buckley_problem,
    "bottom": bottom_problem,
    "riemann-shock": lambda: riemann_problem(1.0, 0.0),
    "riemann-rarefaction": lambda: riemann_problem(0.0, 1.0),
}


# ----------------------------------------------------------------------
# building problems from flat configuration dictionaries

class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


def _initial_condition(cfg: dict) -> InitialCondition:
    kind = cfg.get("ic", "gaussian-cosine")
    domain = tuple(cfg.get("domain", (-4.0, 4.0)))
    if kind == "gaussian-cosine":
        return gaussian_cosine(domain, cfg.get("base", 0.5), cfg.get("amplitude", 0.2))
    if kind == "riemann":
        return riemann(cfg["u_left"], cfg["u_right"], cfg.get("x0", 0.0), domain)
    if kind == "buckley-jumps":
        return buckley_jumps(tuple(cfg.get("domain", (4.0, 7.0))))
    if kind == "constant":
        return constant(cfg["value"], domain)
    if kind == "piecewise-constant":
        return piecewise_constant(cfg["values"], cfg["breaks"], domain)
    if kind == "piecewise-polynomial":
        return piecewise_polynomial(cfg["breaks"], cfg["coefficients"], domain)
    raise ConfigError(f"unknown initial condition {kind!r}")


def _source(cfg: dict) -> SourceModel:
    kind = cfg.get("source", "none")
    if kind == "none":
        return SourceModel.none()
    if kind == "bottom":
        return SourceModel.bottom_profile(support=tuple(cfg.get("source_support", (4.5, 5.5))))
    if kind == "piecewise-bottom":
        return SourceModel.piecewise_polynomial_bottom(cfg["source_breaks"],
                                                       cfg["source_coefficients"])
    raise ConfigError(f"unknown source {kind!r}")


def problem_from_config(cfg: dict) -> Problem:
    """A preset (``"problem"`` key) with overrides, or a problem built from keys."""
    try:
        if "problem" in cfg:
            name = cfg["problem"]
            if name not in PRESETS:
                raise ConfigError(f"unknown problem {name!r}; choose from {sorted(PRESETS)}")
            if name == "bottom" and "t_end" in cfg:
                # the sampling domain depends on the final time
                prob = bottom_problem(float(cfg["t_end"]))
            else:
                prob = PRESETS[name]()
            if "t_end" in cfg:
                prob.t_end = float(cfg["t_end"])
            if "window" in cfg:
                prob.window = tuple(cfg["window"])
                prob.moving_window = None
            return prob
        flux = make_flux(cfg.get("flux", "burgers"), cfg.get("flux_coefficients"))
        ic = _initial_condition(cfg)
        src = _source(cfg)
        exact = None
        if ic.name == "riemann" and src.is_zero:
            ul, ur, x0 = cfg["u_left"], cfg["u_right"], cfg.get("x0", 0.0)
            if not flux.inflection_points(min(ul, ur), max(ul, ur)):
                exact = lambda t: RiemannExact(flux, ul, ur, x0, t)  # noqa: E731
        elif ic.name == "gaussian-cosine" and src.is_zero and flux.inflection_values == ():
            exact = lambda t: LaxOleinikExact(flux, ic, t, tuple(cfg.get("window", ic.domain)))  # noqa: E731
        return Problem(cfg.get("name", ic.name), flux, ic, float(cfg.get("t_end", 1.0)),
                       tuple(cfg.get("window", ic.domain)), src, exact=exact)
    except KeyError as exc:
        raise ConfigError(f"missing configuration key {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None


# ----------------------------------------------------------------------
# drivers

def simulate(problem: Problem, n: int, t_values: Sequence[float], mode: str = "equidistant",
             d_min: Optional[float] = None, d_max: Optional[float] = None,
             dt: Optional[float] = None) -> tuple:
    """Sample ``n`` particles and evolve them; returns ``(initial, snapshots)``.

    Snapshots are returned in the order of sorted ``t_values``.
    """
    kw = {}
    if d_max is not None:
        kw["d_max"] = d_max
    system = sample(problem.ic, n, problem.flux, mode, **kw)
    if d_min is not None:
        system.d_min = float(d_min)
    initial = system.copy()
    times = sorted(float(t) for t in t_values)
    t_end = times[-1] if times else 0.0
    if problem.source.is_zero:
        result = run(system, t_end, times)
    else:
        result = run_with_source(system, problem.source, t_end, dt=dt, output_times=times)
    snaps = [result.at(t) for t in times]
    return initial, snaps, system


def snapshot_diagnostics(initial: ParticleSystem, snap: ParticleSystem) -> dict:
    """Area and variation drift of a snapshot relative to the initial state.

    The corrected area drift removes the area carried through the domain ends
    at the rate ``F(u_last) - F(u_first)`` of the initial end values.
    """
    a0 = total_area(initial)
    a1 = total_area(snap)
    flux = snap.flux
    carried = 0.0
    if len(initial) >= 2:
        carried = float((flux.legendre(initial.u[-1]) - flux.legendre(initial.u[0]))
                        * (snap.time - initial.time))
    scale = max(abs(a0), 1e-300)
    tv0, tv1 = total_variation(initial), total_variation(snap)
    return {
        "time": snap.time,
        "particles": len(snap),
        "total_area": a1,
        "area_drift_rel": (a1 - a0) / scale,
        "area_drift_corrected_rel": (a1 - a0 - carried) / scale,
        "total_variation": tv1,
        "tv_drift": tv1 - tv0,
        "shocks": shock_positions(snap),
    }


class Scorer:
    """Error of particle and finite-volume solutions at one time.

    Uses the problem's exact solution when it has one, otherwise a fine
    finite-volume run with ``multiplier`` times the finest resolution.
    """

    def __init__(self, problem: Problem, t: float, finest: int, multiplier: int = 16):
        self.problem, self.t = problem, float(t)
        self.window = problem.window_at(self.t)
        self.exact = problem.exact(self.t) if problem.exact is not None else None
        self.fine: Optional[FvGrid] = None
        if self.exact is None:
            src = None if problem.source.is_zero else problem.source
            self.fine = fv_run(problem.fv_initial, problem.flux, finest * multiplier,
                               self.t, source=src)[-1]

    def shocks(self) -> list:
        if self.exact is not None:
            return list(self.exact.shocks)
        return []

    def particles(self, system: ParticleSystem, exclude=(), width: float = 0.0) -> float:
        if self.exact is not None:
            return particle_error(system, self.exact, self.window, exclude, width)
        lo, hi = self.window
        if width <= 0 or not exclude:
            return l1_error_vs_reference(system, self.fine, (lo, hi))
        total = 0.0
        for a, b in _pieces((lo, hi), exclude, width):
            total += l1_error_vs_reference(system, self.fine, (a, b))
        return total

    def grid(self, grid: FvGrid, exclude=(), width: float = 0.0) -> float:
        if self.exact is not None:
            return fv_error(grid, self.exact, self.window, exclude, width)
        if width <= 0 or not exclude:
            return l1_error_vs_reference(grid, self.fine, self.window)
        # per-cell error with excluded cells removed
        r = self.fine.cells // grid.cells
        fine_areas = self.fine.values.reshape(grid.cells, r).sum(axis=1) * self.fine.dx
        err = np.abs(grid.values * grid.dx - fine_areas)
        c = grid.centers
        keep = (c >= self.window[0]) & (c <= self.window[1])
        for s in exclude:
            keep &= np.abs(c - s) > 0.5 * width
        return float(np.sum(err[keep]))


def _pieces(window, exclude, width):
    pieces = [tuple(window)]
    for s in sorted(exclude):
        a, b = s - 0.5 * width, s + 0.5 * width
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
    return [(p, q) for p, q in pieces if q > p]


def default_shock_width(problem: Problem, ns: Sequence[int]) -> float:
    """Ten times the finest particle spacing."""
    return 10.0 * problem.ic.length / (max(ns) - 1)


def convergence_rows(problem: Problem, ns: Sequence[int], t: float,
                     modes: Sequence[str] = ("equidistant",), shock_width: Optional[float] = None,
                     multiplier: int = 16, runner=map, spec: Optional[dict] = None) -> tuple:
    """Error table over resolutions and sampling modes.

    Returns ``(rows, orders)``: one dict per ``(mode, n)`` with keys
    ``n, mode, t, err_post, err_raw, err_noshock, order_running``, and per
    mode the least-squares orders of the three error columns.
    """
    ns = sorted(int(n) for n in ns)
    if len(ns) < 3:
        raise ConfigError("a convergence study needs at least three resolutions")
    width = default_shock_width(problem, ns) if shock_width is None else shock_width
    scorer = Scorer(problem, t, ns[-1], multiplier)
    job_problem = spec if spec is not None else problem
    jobs = [(job_problem, n, t, mode) for mode in modes for n in ns]
    finals = [_unpack(problem, r) for r in runner(_evolve_job, jobs)]
    rows, orders = [], {}
    for mode in modes:
        mrows = []
        for (p, n, _, m), fin in zip(jobs, finals):
            if m != mode:
                continue
            post = reconstruct_shocks(fin)
            shocks = shock_positions(fin) or scorer.shocks()
            mrows.append({
                "n": n, "mode": mode, "t": t,
                "err_post": scorer.particles(post),
                "err_raw": scorer.particles(fin),
                "err_noshock": scorer.particles(post, shocks, width),
            })
        for k, r in enumerate(mrows):
            prev = mrows[k - 1] if k else None
            if prev is None or prev["err_post"] <= 0 or r["err_post"] <= 0:
                # exact solutions leave nothing to fit
                r["order_running"] = float("nan")
            else:
                r["order_running"] = float(np.log(prev["err_post"] / r["err_post"])
                                           / np.log(r["n"] / prev["n"]))
        orders[mode] = {key: fit_order([r["n"] for r in mrows], [r[key] for r in mrows])
                        for key in ("err_post", "err_raw", "err_noshock")}
        rows += mrows
    return rows, orders


def _evolve_job(job):
    """Final state of one run as plain arrays (picklable for worker processes).

    The problem may be given as a configuration dict.
    """
    problem, n, t, mode = job
    if isinstance(problem, dict):
        problem = problem_from_config(problem)
    _, snaps, _ = simulate(problem, problem.particles_for(n), [t], mode)
    s = snaps[-1]
    return s.x, s.u, s.is_shock, s.is_inflection, s.time, s.h, s.d_min, s.d_max


def _unpack(problem: Problem, state) -> ParticleSystem:
    x, u, shock, infl, time, h, d_min, d_max = state
    return ParticleSystem(x, u, problem.flux, is_shock=shock, is_inflection=infl,
                          d_min=d_min, d_max=d_max, time=time, h=h)


def comparison_rows(problem: Problem, ns: Sequence[int], t: float,
                    shock_width: Optional[float] = None, multiplier: int = 16,
                    self_check: bool = False, runner=map, spec: Optional[dict] = None) -> list:
    """Particle method against the finite-volume oracle at matched resolution.

    With ``self_check`` the oracle is scored against itself run at the same
    resolution, which must give zero error.
    """
    ns = sorted(int(n) for n in ns)
    width = default_shock_width(problem, ns) if shock_width is None else shock_width
    scorer = Scorer(problem, t, ns[-1], multiplier)
    job_problem = spec if spec is not None else problem
    finals = [_unpack(problem, r)
              for r in runner(_evolve_job, [(job_problem, n, t, "equidistant") for n in ns])]
    src = None if problem.source.is_zero else problem.source
    rows = []
    for n, fin in zip(ns, finals):
        cells = n
        grid = fv_run(problem.fv_initial, problem.flux, cells, t, source=src)[-1]
        post = reconstruct_shocks(fin)
        shocks = shock_positions(fin) or scorer.shocks()
        row = {
            "n": n, "cells": cells, "t": t,
            "err_particle": scorer.particles(post),
            "err_fv": scorer.grid(grid),
            "err_particle_noshock": scorer.particles(post, shocks, width),
            "err_fv_noshock": scorer.grid(grid, shocks, width),
        }
        if self_check:
            again = fv_run(problem.fv_initial, problem.flux, cells, t, source=src)[-1]
            row["err_fv_self"] = l1_error_vs_reference(grid, again, scorer.window)
        rows.append(row)
    return rows


def sampling_rows(problem: Problem, ns: Sequence[int],
                  modes: Sequence[str] = ("equidistant", "adaptive")) -> tuple:
    """Initial (t = 0) interpolation error per resolution and sampling mode."""
    ns = sorted(int(n) for n in ns)
    rows, orders = [], {}
    for mode in modes:
        errs = []
        for n in ns:
            system = sample(problem.ic, n, problem.flux, mode)
            e = sampling_error(system, problem.ic)
            errs.append(e)
            rows.append({"n": n, "mode": mode, "err": e})
        orders[mode] = fit_order(ns, errs) if len(ns) >= 2 else float("nan")
    return rows, orders
