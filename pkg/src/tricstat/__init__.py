"""Exact equilibrium statistics of ATP binding on a double-ring enzyme lattice."""
from .energy import TABLE1, Bath, RawParams, ReducedParams, bath_from_conc, load_params, reduce_params
from .ensemble import (
    OccupancyDistribution,
    distribution,
    dominant_state,
    dominant_state_given_n,
    find_mode_crossover,
    mean_occupancy,
    occupancy_distribution,
    state_probabilities,
    sweep,
)
from .lattice import LatticeSpec, MicroState, canonicalize, decode_state, encode_state, format_state, parse_state

__version__ = "0.1.0"
