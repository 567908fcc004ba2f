"""
Artifact Connector Base Class
=============================

Every persisted artifact (cubes, network checkpoints, text matrices) goes
through a connector with the same load / save surface. Binary formats are
little-endian throughout.
"""

from abc import ABC, abstractmethod
from pathlib import Path
from typing import Any, Dict, Optional, Union
import logging

from ...exceptions import ParameterError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


class ArtifactConnector(ABC):
    """Base class for all artifact connectors"""

    def __init__(self, config: Optional[Dict[str, Any]] = None):
        self.config = config or {}

    @abstractmethod
    def load(self, path: PathLike) -> Any:
        """Read an artifact"""
        pass

    @abstractmethod
    def save(self, obj: Any, path: PathLike) -> Path:
        """Write an artifact, creating parent directories"""
        pass


# Factory function to create connectors
def create_connector(connector_type: str, config: Optional[Dict] = None) -> ArtifactConnector:
    """
    Factory function to create the connector for an artifact kind

    Args:
        connector_type: One of 'cube', 'checkpoint', 'matrix'
        config: Configuration dictionary

    Returns:
        ArtifactConnector instance
    """
    from .checkpoint import CheckpointConnector
    from .cube_file import CubeFileConnector
    from .text_matrix import MatrixTextConnector

    config = config or {}

    connectors = {
        'cube': CubeFileConnector,
        'checkpoint': CheckpointConnector,
        'matrix': MatrixTextConnector,
    }

    if connector_type not in connectors:
        raise ParameterError(f"Unknown connector type: {connector_type}")

    return connectors[connector_type](config)
