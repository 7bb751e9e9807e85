"""Qudit state-vector simulation of lattice phi^4 theory with SNAP and displacement gates."""
from __future__ import annotations

from ._kernels import BACKEND as KERNEL_BACKEND
from .model import ModelParams, Schedule
from .state import (
    DenseGate,
    DiagonalGate,
    QuditSpec,
    StateVector,
    apply_single_site,
    apply_two_site_diagonal,
    bumper_leakage,
    field_expectations,
    marginal_probabilities,
    new_vacuum,
    overlap,
    product_state,
)

__version__ = "0.1.0"

__all__ = [
    "KERNEL_BACKEND",
    "DenseGate",
    "DiagonalGate",
    "ModelParams",
    "QuditSpec",
    "Schedule",
    "StateVector",
    "apply_single_site",
    "apply_two_site_diagonal",
    "bumper_leakage",
    "field_expectations",
    "marginal_probabilities",
    "new_vacuum",
    "overlap",
    "product_state",
]
