"""Kinetic transport solver and experiment harness for boundary-reflectance
reconstruction studies in the diffusive scaling regime."""

__version__ = "0.1.0"

from .materials import (
    MaterialModel,
    InterfaceCoefficients,
    compute_c_tau,
    reduce_interface_coefficients,
    temperature_deviation,
)
from .grids import PhaseSpaceGrid, DistributionField, build_paper_grid, build_desk_grid, moment
from .sources import ReflectionModel, SourceSpec, TestFunctionSpec, eta_tanh
from .solver import SolverConfig, SolverRun, solve
from .ballistic import BallisticSpec, ballistic_value, measurement_split, m0_asymptotic

__all__ = [
    "MaterialModel",
    "InterfaceCoefficients",
    "compute_c_tau",
    "reduce_interface_coefficients",
    "temperature_deviation",
    "PhaseSpaceGrid",
    "DistributionField",
    "build_paper_grid",
    "build_desk_grid",
    "moment",
    "ReflectionModel",
    "SourceSpec",
    "TestFunctionSpec",
    "eta_tanh",
    "SolverConfig",
    "SolverRun",
    "solve",
    "BallisticSpec",
    "ballistic_value",
    "measurement_split",
    "m0_asymptotic",
    "__version__",
]
