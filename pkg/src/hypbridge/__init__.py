"""Hyperbolic Brownian bridges, square-root diffusions and their large-deviation rates."""

from . import bridge, estimators, experiments, geometry, kernels, reference, rng, sde
from .errors import NumericalFailure

__version__ = "0.1.0"

__all__ = [
    "bridge",
    "estimators",
    "experiments",
    "geometry",
    "kernels",
    "reference",
    "rng",
    "sde",
    "NumericalFailure",
]
