"""
hsifusion
=========

Blind fusion of a low-resolution hyperspectral image with a high-resolution
multispectral image: the blur kernel and spectral response are estimated
alongside the latent cube, which is parameterized by a guided reconstruction
network optimized per scene.
"""

from .core import BlurKernel, HsiCube, Rng, SrfMatrix
from .exceptions import (
    ConfigError,
    FormatError,
    FusionException,
    GraphError,
    OptimizerError,
    ParameterError,
    ShapeError,
    SolverError,
)

__version__ = '0.1.0'

__all__ = [
    'HsiCube', 'BlurKernel', 'SrfMatrix', 'Rng',
    'FusionException', 'ShapeError', 'ParameterError', 'SolverError', 'GraphError',
    'OptimizerError', 'FormatError', 'ConfigError',
]
