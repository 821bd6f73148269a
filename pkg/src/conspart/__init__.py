"""Exactly conservative characteristic particle method for 1-d scalar conservation laws."""
from .flux import FluxModel, make_flux
from .particles import Event, Particle, ParticleSystem
from .geometry import (Interpolant, kruzkov_entropy, l1_distance, segment_areas,
                       total_area, total_variation)
from .engine import (MergeError, advance, insert_particle, merge_pair, next_collision,
                     reconstruct_shocks, run, shock_positions)

__all__ = [
    "FluxModel", "make_flux", "Particle", "ParticleSystem", "Event", "Interpolant",
    "kruzkov_entropy", "l1_distance", "segment_areas", "total_area", "total_variation",
    "MergeError", "advance", "insert_particle", "merge_pair", "next_collision",
    "reconstruct_shocks", "run", "shock_positions",
]
