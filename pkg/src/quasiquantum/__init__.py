"""Quasi-quantum states over the qubit SIC-POVM basis: validity checks, local
Hamiltonians, lambda-solutions, the 3-coloring reduction and energy optimizers."""

from .hamiltonians import LocalHamiltonian, energy, verify_witness
from .optimizer import exact_qq_ground_energy, fixed_support_minimize, heuristic_ground_energy
from .qq_state import SparseDistribution, is_k_local_qq
from .sic_basis import build_sic_basis

__all__ = [
    "LocalHamiltonian",
    "SparseDistribution",
    "build_sic_basis",
    "energy",
    "exact_qq_ground_energy",
    "fixed_support_minimize",
    "heuristic_ground_energy",
    "is_k_local_qq",
    "verify_witness",
]
