"""
Data layer: persistence connectors, figure export and synthetic scenes
"""

from .connectors import (
    ArtifactConnector,
    create_connector,
    load_checkpoint,
    load_cube,
    load_matrix,
    load_srf,
    save_checkpoint,
    save_cube,
    save_matrix,
)
from .export import (
    export_error_map,
    export_kernel,
    export_pseudocolor,
    export_spectral_curves,
    export_srf,
)
from .synthetic import crop_patches, synthetic_scene

__all__ = [
    'ArtifactConnector', 'create_connector',
    'save_cube', 'load_cube', 'save_checkpoint', 'load_checkpoint',
    'save_matrix', 'load_matrix', 'load_srf',
    'export_pseudocolor', 'export_error_map', 'export_kernel', 'export_srf', 'export_spectral_curves',
    'synthetic_scene', 'crop_patches',
]
