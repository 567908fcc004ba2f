"""
Persistence connectors for cubes, checkpoints and text matrices
"""

from .base import ArtifactConnector, create_connector
from .checkpoint import CheckpointConnector, load_checkpoint, save_checkpoint
from .cube_file import CubeFileConnector, load_cube, save_cube
from .text_matrix import MatrixTextConnector, load_matrix, load_srf, save_matrix

__all__ = [
    'ArtifactConnector', 'create_connector',
    'CubeFileConnector', 'save_cube', 'load_cube',
    'CheckpointConnector', 'save_checkpoint', 'load_checkpoint',
    'MatrixTextConnector', 'save_matrix', 'load_matrix', 'load_srf',
]
