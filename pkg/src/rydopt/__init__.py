"""Optimal-control toolkit for state preparation in Rydberg lattice gases."""

from rydopt.errors import (
    AmbiguityError,
    ConfigError,
    ConstraintError,
    DomainError,
    ModelValidityError,
    NumericalError,
    RydoptError,
    UsageError,
)
from rydopt.model import PhysicalModel, default_model, vdw_interaction

__version__ = "0.1.0"

__all__ = [
    "AmbiguityError",
    "ConfigError",
    "ConstraintError",
    "DomainError",
    "ModelValidityError",
    "NumericalError",
    "PhysicalModel",
    "RydoptError",
    "UsageError",
    "default_model",
    "vdw_interaction",
]
