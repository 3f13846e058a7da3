"""Damped KdV-family simulation lab on a bounded interval.

Core pipeline: build a grid, pick a model and a damping mechanism, integrate
with the semi-implicit stepper, then measure decay rates, observability
quotients, and weighted-estimate ratios from the recorded trace.
"""

__version__ = "0.1.0"

from .damping import DampingSpec, apply_h_minus_one, apply_multiplicative, apply_weak_g, dissipation_functional
from .grid import BandedMatrix, Grid1D, OmegaWindow, banded_solve, boundary_derivative, build_derivative_matrix, quadrature
from .models import ModelSpec, ModelState, boundary_dissipation, energy, linear_operator, nonlinear_term
from .timestepper import SimConfig, SimTrace, run, step

__all__ = [
    "__version__",
    "Grid1D", "OmegaWindow", "BandedMatrix",
    "build_derivative_matrix", "banded_solve", "quadrature", "boundary_derivative",
    "DampingSpec", "apply_weak_g", "apply_multiplicative", "apply_h_minus_one",
    "dissipation_functional",
    "ModelSpec", "ModelState", "linear_operator", "nonlinear_term", "energy",
    "boundary_dissipation",
    "SimConfig", "SimTrace", "run", "step",
]
