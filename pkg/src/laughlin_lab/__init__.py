"""Desk-scale numerical laboratory for the Laughlin phase and its perturbations."""

__version__ = "0.1.0"

from .model import (
    CorrelationFactor,
    PlasmaParams,
    PotentialSpec,
    QuasiHoleSet,
    SuperharmonicPotential,
    cleaned_gradient,
    cleaned_hamiltonian,
    cleaned_scale,
    log_plasma_weight,
    scaled_potentials,
)

__all__ = [
    "CorrelationFactor",
    "PlasmaParams",
    "PotentialSpec",
    "QuasiHoleSet",
    "SuperharmonicPotential",
    "cleaned_gradient",
    "cleaned_hamiltonian",
    "cleaned_scale",
    "log_plasma_weight",
    "scaled_potentials",
]
