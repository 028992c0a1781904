"""Repeated pulsed measurements of a driven three-level atom: ideal, quantum-jump and master-equation models."""
from .model import AtomParams, PulseSchedule, RegimeViolation, ValidationError, compute_epsilons
from .qcore import EigSystem, eig_with_reciprocal, mat_exp

__all__ = [
    "AtomParams",
    "PulseSchedule",
    "RegimeViolation",
    "ValidationError",
    "compute_epsilons",
    "EigSystem",
    "eig_with_reciprocal",
    "mat_exp",
]
