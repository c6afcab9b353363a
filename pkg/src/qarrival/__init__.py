"""Arrival-time detection for 1D wave packets via an irreversible absorbing detector."""

__version__ = "0.1.0"

from .grid import (
    Grid1D,
    ModelParams,
    PotentialProfile,
    WaveFunction,
    gaussian_packet,
    make_grid,
    region_probability,
    step_indicator,
)
from .dynamics import (
    EvolutionMethod,
    PropagatorMatrix,
    build_nd_propagator,
    crank_nicolson,
    crossing_kernel,
    evolve_complex_potential,
    evolve_free,
    free_kernel,
    restricted_kernel,
    strang_split,
)

__all__ = [
    "Grid1D",
    "ModelParams",
    "PotentialProfile",
    "WaveFunction",
    "gaussian_packet",
    "make_grid",
    "region_probability",
    "step_indicator",
    "EvolutionMethod",
    "PropagatorMatrix",
    "build_nd_propagator",
    "crank_nicolson",
    "crossing_kernel",
    "evolve_complex_potential",
    "evolve_free",
    "free_kernel",
    "restricted_kernel",
    "strang_split",
]
