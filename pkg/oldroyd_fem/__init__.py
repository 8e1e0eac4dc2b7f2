"""
oldroyd-fem: energy-stable finite element schemes for the regularized Oldroyd-B model
"""

__version__ = "1.0.0"

from oldroyd_fem.models import (
    EnergyBreakdown,
    FluidParams,
    RegParams,
    RunCertificate,
    SolverOpts,
)
from oldroyd_fem.tensor import Regularization, SymMat

__all__ = [
    "EnergyBreakdown",
    "FluidParams",
    "RegParams",
    "Regularization",
    "RunCertificate",
    "SolverOpts",
    "SymMat",
    "__version__",
]
