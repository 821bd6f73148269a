"""Particle containers and the management event log."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .flux import FluxModel


@dataclass
class Particle:
    """One Lagrangian sample of the solution."""

    x: float
    u: float
    is_shock: bool = False
    is_inflection: bool = False


@dataclass
class Event:
    """A particle-management event together with the local stencil it touched.

    ``before`` and ``after`` are ``(x, u)`` arrays spanning the same outer
    particles, so local area, variation and entropy can be compared directly.
    """

    kind: str
    time: float
    index: int
    x: float
    before: tuple
    after: tuple
    area_before: float
    area_after: float
    detail: dict = field(default_factory=dict)

    def to_record(self) -> dict:
        return {
            "kind": self.kind,
            "time": self.time,
            "index": self.index,
            "x": self.x,
            "x_before": [float(v) for v in self.before[0]],
            "u_before": [float(v) for v in self.before[1]],
            "x_after": [float(v) for v in self.after[0]],
            "u_after": [float(v) for v in self.after[1]],
            "area_before": self.area_before,
            "area_after": self.area_after,
            **{k: v for k, v in self.detail.items()},
        }


def write_events(events: Iterable[Event], path) -> None:
    """Write events as JSON lines."""
    with open(path, "w") as fh:
        for ev in events:
            fh.write(json.dumps(ev.to_record()) + "\n")


class ParticleSystem:
    """Ordered particles stored as parallel numpy arrays.

    Parameters
    ----------
    x, u : array_like
        Positions (non-decreasing) and values.
    flux : FluxModel
    d_min, d_max : float
        Merge and insertion distance thresholds.
    h : float, optional
        Initial sampling spacing; ``d_max`` defaults to ``4/3 h``.
    """

    def __init__(self, x, u, flux: FluxModel, *, is_shock=None, is_inflection=None,
                 d_min: float = 0.0, d_max: Optional[float] = None, time: float = 0.0,
                 h: Optional[float] = None):
        self.x = np.array(x, dtype=float)
        self.u = np.array(u, dtype=float)
        if self.x.shape != self.u.shape or self.x.ndim != 1:
            raise ValueError("x and u must be 1-d arrays of equal length")
        n = self.x.size
        self.is_shock = np.zeros(n, bool) if is_shock is None else np.array(is_shock, bool)
        self.is_inflection = (np.zeros(n, bool) if is_inflection is None
                              else np.array(is_inflection, bool))
        self.flux = flux
        self.h = h
        self.d_min = float(d_min)
        if d_max is None:
            d_max = 4.0 / 3.0 * h if h is not None else np.inf
        self.d_max = float(d_max)
        self.time = float(time)
        self.events: list[Event] = []
        self.log_events = True

    # ------------------------------------------------------------------
    @classmethod
    def from_particles(cls, particles: Iterable[Particle], flux: FluxModel, **kw):
        ps = list(particles)
        return cls([p.x for p in ps], [p.u for p in ps], flux,
                   is_shock=[p.is_shock for p in ps],
                   is_inflection=[p.is_inflection for p in ps], **kw)

    @property
    def particles(self) -> list[Particle]:
        return [Particle(float(a), float(b), bool(s), bool(i)) for a, b, s, i in
                zip(self.x, self.u, self.is_shock, self.is_inflection)]

    def __len__(self) -> int:
        return self.x.size

    def __repr__(self) -> str:
        return (f"ParticleSystem(n={len(self)}, t={self.time:.6g}, "
                f"d_min={self.d_min:.3g}, d_max={self.d_max:.3g})")

    def velocities(self) -> np.ndarray:
        return np.asarray(self.flux.df(self.u), dtype=float)

    def copy(self, events: bool = False) -> "ParticleSystem":
        out = ParticleSystem(self.x, self.u, self.flux, is_shock=self.is_shock,
                             is_inflection=self.is_inflection, d_min=self.d_min,
                             d_max=self.d_max, time=self.time, h=self.h)
        out.log_events = self.log_events
        if events:
            out.events = list(self.events)
        return out

    # ------------------------------------------------------------------
    # structural edits; callers are responsible for area bookkeeping

    def splice(self, start: int, stop: int, x, u, shock=None, inflection=None) -> None:
        """Replace particles ``start:stop`` by the given ones."""
        x = np.atleast_1d(np.asarray(x, float))
        u = np.atleast_1d(np.asarray(u, float))
        shock = np.zeros(x.size, bool) if shock is None else np.atleast_1d(np.asarray(shock, bool))
        inflection = (np.zeros(x.size, bool) if inflection is None
                      else np.atleast_1d(np.asarray(inflection, bool)))
        self.x = np.concatenate([self.x[:start], x, self.x[stop:]])
        self.u = np.concatenate([self.u[:start], u, self.u[stop:]])
        self.is_shock = np.concatenate([self.is_shock[:start], shock, self.is_shock[stop:]])
        self.is_inflection = np.concatenate([self.is_inflection[:start], inflection,
                                             self.is_inflection[stop:]])

    def insert_many(self, positions, x, u, inflection=None) -> None:
        """Insert particles before the given indices (as ``np.insert``)."""
        positions = np.asarray(positions, int)
        infl = np.zeros(positions.size, bool) if inflection is None else np.asarray(inflection, bool)
        self.x = np.insert(self.x, positions, x)
        self.u = np.insert(self.u, positions, u)
        self.is_shock = np.insert(self.is_shock, positions, False)
        self.is_inflection = np.insert(self.is_inflection, positions, infl)

    def keep(self, mask) -> None:
        mask = np.asarray(mask, bool)
        self.x = self.x[mask]
        self.u = self.u[mask]
        self.is_shock = self.is_shock[mask]
        self.is_inflection = self.is_inflection[mask]

    def record(self, kind: str, index: int, before, after, area_before: float,
               area_after: float, **detail) -> None:
        if not self.log_events:
            return
        self.events.append(Event(kind, self.time, int(index),
                                 float(np.mean(after[0])) if len(after[0]) else float("nan"),
                                 (np.array(before[0]), np.array(before[1])),
                                 (np.array(after[0]), np.array(after[1])),
                                 float(area_before), float(area_after), detail))

    def check_finite(self) -> None:
        if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.u))):
            raise FloatingPointError("non-finite particle position or value")
