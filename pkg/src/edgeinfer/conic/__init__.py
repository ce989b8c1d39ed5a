"""Conic programming substrate: program containers, solvers, matrix primitives."""

from .complexify import ComplexConicProgram, complex_psd_dual, embed_complex, hermitian_tril
from .matrix import kyfan_norm, kyfan_subgradient, nuclear_norm, psd_project, singular_values, svt
from .program import (
    NONNEG,
    PSD,
    SOC,
    ZERO,
    Cone,
    ConicProgram,
    ConicSolution,
    cone_violation,
    project_cone,
    residuals,
    smat,
    svec,
)
from .solve import available_solvers, register_solver, solve_conic

__all__ = [
    "NONNEG",
    "PSD",
    "SOC",
    "ZERO",
    "ComplexConicProgram",
    "Cone",
    "ConicProgram",
    "ConicSolution",
    "available_solvers",
    "complex_psd_dual",
    "cone_violation",
    "embed_complex",
    "hermitian_tril",
    "kyfan_norm",
    "kyfan_subgradient",
    "nuclear_norm",
    "project_cone",
    "psd_project",
    "register_solver",
    "residuals",
    "singular_values",
    "smat",
    "solve_conic",
    "svec",
    "svt",
]
