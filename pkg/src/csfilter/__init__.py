"""Simulation of a compressive sensing filter bank and sparse recovery from its samples."""

__version__ = "0.1.0"

from .basis import SparsityBasis
from .errors import CSFilterError
from .filter_bank import BandPlan, FilterSpec, FrequencyResponse, build_band_plan, design_chebyshev
from .recovery import RecoveryResult, SolverConfig, l0_oracle, solve_l1, solve_omp
from .sensing import (
    SampleMask,
    SensingOperator,
    Transfer,
    apply_adjoint,
    apply_forward,
    assemble_filterbank_transfer,
    assemble_ideal_transfer,
    coherence,
    make_mask,
)

__all__ = [
    "BandPlan",
    "CSFilterError",
    "FilterSpec",
    "FrequencyResponse",
    "RecoveryResult",
    "SampleMask",
    "SensingOperator",
    "SolverConfig",
    "SparsityBasis",
    "Transfer",
    "apply_adjoint",
    "apply_forward",
    "assemble_filterbank_transfer",
    "assemble_ideal_transfer",
    "build_band_plan",
    "coherence",
    "design_chebyshev",
    "l0_oracle",
    "make_mask",
    "solve_l1",
    "solve_omp",
]
