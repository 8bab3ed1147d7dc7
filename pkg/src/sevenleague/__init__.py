"""Large-time-step SDE simulation with learned stochastic collocation points.

The 7L sampler steps paths with a neural surrogate that predicts conditional
collocation points; the 7L-CDC variant precomputes those points on a small
matrix and interpolates per path. Classical Euler/Milstein/exact schemes,
pricing, sensitivities and studies are included for comparison.
"""
from .kernels import BACKEND as KERNEL_BACKEND
from .models import ModelKind, SdeParams, TimeGrid
from .paths import PathEnsemble
from .probability import gauss_hermite_normal
from .schemes import Scheme, simulate_paths

__version__ = "0.1.0"

__all__ = ["KERNEL_BACKEND", "ModelKind", "PathEnsemble", "Scheme", "SdeParams", "TimeGrid",
           "gauss_hermite_normal", "simulate_paths", "__version__"]
