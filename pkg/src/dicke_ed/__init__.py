"""Exact diagonalization of the finite-size Dicke model in a displaced-Fock
basis, with a bare-Fock baseline and finite-size scaling extraction."""

__version__ = "0.1.0"

from .model import ModelParams, SectorIndex, critical_coupling, ladder_coeff
from .dcs_basis import (
    OverlapKernel,
    displaced_overlap,
    displacement_table,
    overlap_kernel,
    unitarity_defect,
)
from .hamiltonian import (
    BlockHamiltonian,
    ParityOperator,
    ProjectedHamiltonian,
    assemble_dcs,
    assemble_dfs,
    parity_operator,
    project_parity,
)
from .eigen import GroundState, ground_state, lowest_pair
from .observables import (
    ConvergedResult,
    berry_phase,
    concurrence,
    converge,
    magnetization_x,
    spin_expectations,
)
from .scaling import (
    ExponentFit,
    ScalingSeries,
    berry_deviation_series,
    concurrence_deviation_series,
    energy_deviation_series,
    extrapolate_exponent,
)

__all__ = [
    "ModelParams", "SectorIndex", "critical_coupling", "ladder_coeff",
    "OverlapKernel", "displaced_overlap", "displacement_table",
    "overlap_kernel", "unitarity_defect",
    "BlockHamiltonian", "ParityOperator", "ProjectedHamiltonian",
    "assemble_dcs", "assemble_dfs", "parity_operator", "project_parity",
    "GroundState", "ground_state", "lowest_pair",
    "ConvergedResult", "berry_phase", "concurrence", "converge",
    "magnetization_x", "spin_expectations",
    "ExponentFit", "ScalingSeries", "berry_deviation_series",
    "concurrence_deviation_series", "energy_deviation_series",
    "extrapolate_exponent",
]
