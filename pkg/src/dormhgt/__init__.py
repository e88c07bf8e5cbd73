"""Two-trait bacterial population model with competition-induced dormancy
and horizontal gene transfer: closed-form equilibria, branching-process
invasion predictions, stability classification, mean-field integration and
exact stochastic simulation."""

from __future__ import annotations

from .errors import (
    BoundaryCase,
    ConvergenceError,
    CriticalCase,
    DegenerateCase,
    InapplicableError,
    InvalidParameters,
    ResidentUnfit,
)
from .model import ModelParams, chain, coexistence_equilibrium, equilibria

__version__ = "0.1.0"

__all__ = [
    "BoundaryCase",
    "ConvergenceError",
    "CriticalCase",
    "DegenerateCase",
    "InapplicableError",
    "InvalidParameters",
    "ModelParams",
    "ResidentUnfit",
    "chain",
    "coexistence_equilibrium",
    "equilibria",
]
