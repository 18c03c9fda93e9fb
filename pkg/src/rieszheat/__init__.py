"""Numerical laboratory for heat-equation systems driven by Riesz-kernel noise.

Submodules
----------
kernels    heat-kernel / Riesz-kernel quadrature oracles and scaling laws
noise      spectral synthesis of the correlated driving noise on a torus
solver     exponential-Euler mild-solution integrator
moments    Monte Carlo increment moments and Holder-exponent regression
gaussian   exact covariance oracle, eigenvalue and density-envelope checks
capacity   Riesz-kernel capacities of compact sets by energy minimization
hitting    hitting-probability experiments and the capacity lower bound
cli        experiment orchestration (`rieszheat` command)
"""

from .kernels import (KernelParams, SpectralConstant, heat_kernel,
                      increment_energy_spatial, increment_energy_temporal,
                      kernel_l1_increment, riesz_convolution,
                      riesz_weighted_increment, spectral_constant,
                      variance_rate)
from .quadrature import QuadratureError

__all__ = [
    "KernelParams", "SpectralConstant", "QuadratureError", "heat_kernel",
    "riesz_convolution", "kernel_l1_increment", "riesz_weighted_increment",
    "increment_energy_spatial", "increment_energy_temporal", "variance_rate",
    "spectral_constant",
]

__version__ = "0.1.0"
