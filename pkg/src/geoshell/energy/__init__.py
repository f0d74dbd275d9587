"""Deformation energies W[s, t] and their derivatives."""
from .backends import (BACKENDS, BoundEnergy, DiscreteShells, EnergyBackend, FlatQuadratic,
                       SubdivisionFEM, eval_w, grad_w1, grad_w2, hess_w, make_backend)
from .densities import MaterialParams, bending_density, membrane_density

__all__ = [
    "BACKENDS", "BoundEnergy", "DiscreteShells", "EnergyBackend", "FlatQuadratic",
    "SubdivisionFEM", "eval_w", "grad_w1", "grad_w2", "hess_w", "make_backend",
    "MaterialParams", "bending_density", "membrane_density",
]
