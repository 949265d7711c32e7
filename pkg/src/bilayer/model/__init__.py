"""Continuous model: parameters, mobilities, potentials, pressures, energy and entropy."""

from .mobility import (
    MOBILITY_MODELS,
    MobilityModel,
    NavierSlip,
    NoSlip,
    PhysicalParams,
    SymMatrix2,
    WeakSlip,
    mobility_eval,
    mobility_partials,
)
from .potential import (
    BornVdW,
    ForceFree,
    PotentialModel,
    potential_difference_quotient,
    potential_energy,
    potential_force,
    potential_force_derivative,
)
from .state import FilmPair, PressurePair
from .functionals import energy, pressures
from .entropy import EntropyConfig, check_cap, default_cap, entropy_total, entropy_value

__all__ = [
    "MOBILITY_MODELS", "MobilityModel", "NavierSlip", "NoSlip", "PhysicalParams", "SymMatrix2",
    "WeakSlip", "mobility_eval", "mobility_partials", "BornVdW", "ForceFree", "PotentialModel",
    "potential_difference_quotient", "potential_energy", "potential_force", "potential_force_derivative", "FilmPair",
    "PressurePair", "energy", "pressures", "EntropyConfig", "check_cap", "default_cap",
    "entropy_total", "entropy_value",
]
