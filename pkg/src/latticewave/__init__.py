"""Traveling waves of a lattice SVIR epidemic model with vaccination."""

from .dispersion import critical_speed, delta, kappa0, lambda_roots, speed_sensitivities
from .model import (
    ModelParams,
    basic_reproduction_number,
    derived_rates,
    disease_free_equilibrium,
    endemic_equilibrium,
)

__all__ = [
    "ModelParams",
    "basic_reproduction_number",
    "critical_speed",
    "delta",
    "derived_rates",
    "disease_free_equilibrium",
    "endemic_equilibrium",
    "kappa0",
    "lambda_roots",
    "speed_sensitivities",
]
__version__ = "0.1.0"
