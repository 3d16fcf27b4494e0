"""Cointegrated delay equations: spectral checks, Granger kernels, simulation and oracles."""

from .errors import *  # noqa: F401,F403
from .kernel import KernelGrid, laplace_check, solve_kernel, truncation_horizon
from .levy import LevyModel, granger_path, sample_levy, simulate_ensemble, variance_profile
from .mcarma import MCARMASpec, carma_c0, check_cointegrated_conditions, msdde_from_mcarma
from .measure import MatExpDensity, SampledDensity, SignedMatrixMeasure, laplace, total_mass
from .spectral import (
    COINTEGRATED,
    REJECTED,
    STATIONARY,
    CharacteristicFunction,
    check_conditions,
    cointegration_structure,
)
from .var_oracle import VARSpec, discretization_bridge, var_granger

__version__ = "0.1.0"
