"""
Reconstruction paths: MAP baseline, backbone F, guided network G with DIP optimization
"""

from .backbone import (
    BackboneConfig,
    FusionBackbone,
    TrainingResult,
    TrainingSample,
    backbone_forward,
    train_backbone,
)
from .dip import DipResult, dip_optimize, iterations_to_threshold
from .map import Regularizer, data_residuals, map_reconstruct, total_variation
from .recon_net import ReconNet, ReconNetConfig, recon_forward

__all__ = [
    'Regularizer', 'map_reconstruct', 'data_residuals', 'total_variation',
    'BackboneConfig', 'FusionBackbone', 'TrainingSample', 'TrainingResult', 'backbone_forward', 'train_backbone',
    'ReconNetConfig', 'ReconNet', 'recon_forward',
    'DipResult', 'dip_optimize', 'iterations_to_threshold',
]
