"""
Minimal reverse-mode autodiff: static graph, layer ops, Adam, gradient checks
"""

from .gradcheck import GradCheckReport, grad_check
from .graph import Gradients, Graph
from .ops import (
    Add,
    BandMix,
    Concat,
    Conv2d,
    Dense,
    Identity,
    LeakyReLU,
    MAELoss,
    MSELoss,
    Mul,
    Reshape,
    Scale,
    ScaleShift,
    SpatialDegradeOp,
    SpectralDegradeOp,
    UpsampleBilinear,
    UpsampleNearest,
)
from .optim import AdamState, adam_step
from .params import LEAKY_SLOPE, NetworkParams, kaiming_uniform

__all__ = [
    'Graph', 'Gradients', 'NetworkParams', 'AdamState', 'adam_step', 'grad_check', 'GradCheckReport',
    'kaiming_uniform', 'LEAKY_SLOPE',
    'Identity', 'Add', 'Mul', 'Scale', 'Reshape', 'Conv2d', 'BandMix', 'Dense', 'LeakyReLU',
    'UpsampleNearest', 'UpsampleBilinear', 'Concat', 'ScaleShift',
    'SpatialDegradeOp', 'SpectralDegradeOp', 'MSELoss', 'MAELoss',
]
