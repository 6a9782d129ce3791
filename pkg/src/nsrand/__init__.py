"""Randomized initial data for Navier-Stokes on the periodic box."""

from .decomp import CubeFamily, DecompParams, build_cubes
from .errors import NSRandError
from .norms import NormSpec, besov_norm, lp_norm, sobolev_norm
from .randomize import RandomDraw, randomize
from .solver import SolverConfig, integrate, picard_iterate
from .spectral import SpectralGrid, VectorField

__version__ = "0.1.0"

__all__ = [
    "CubeFamily", "DecompParams", "build_cubes", "NSRandError", "NormSpec", "besov_norm",
    "lp_norm", "sobolev_norm", "RandomDraw", "randomize", "SolverConfig", "integrate",
    "picard_iterate", "SpectralGrid", "VectorField",
]
