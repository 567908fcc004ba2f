"""
Configuration Management for hsifusion
======================================

Two layers:
- Config: environment-driven settings (log level, output directory, default
  seed, worker count), read once from the process environment / .env file.
- ExperimentConfig: a validated experiment description parsed from a plain
  key=value file. Unknown keys are rejected.
"""

import os
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Union

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .exceptions import ConfigError

# Load environment variables
load_dotenv()

logger = logging.getLogger(__name__)


class Config:
    """Application configuration with environment-based settings"""

    LOG_LEVEL: str = os.getenv('HSIFUSION_LOG_LEVEL', 'INFO').upper()
    OUTPUT_DIR: Path = Path(os.getenv('HSIFUSION_OUTPUT_DIR', 'data/analysis_reports'))
    DEFAULT_SEED: int = int(os.getenv('HSIFUSION_DEFAULT_SEED', '0'))
    WORKERS: int = max(1, int(os.getenv('HSIFUSION_WORKERS', '1')))

    # Desk-scale defaults used when no experiment file is given
    DEFAULT_SCALE: int = 4
    DEFAULT_MSI_BANDS: int = 4
    DEFAULT_KERNEL_SUPPORT: int = 7

    @classmethod
    def output_dir(cls, override: Optional[Union[str, Path]] = None) -> Path:
        """Resolve (and create) the report directory"""
        path = Path(override) if override else cls.OUTPUT_DIR
        path.mkdir(parents=True, exist_ok=True)
        return path

    @classmethod
    def as_dict(cls) -> Dict[str, Any]:
        return {
            'log_level': cls.LOG_LEVEL,
            'output_dir': str(cls.OUTPUT_DIR),
            'default_seed': cls.DEFAULT_SEED,
            'workers': cls.WORKERS,
        }


# Create singleton instance
config = Config()


_MODES = ('separate', 'joint', 'alternating')


class ExperimentConfig(BaseModel):
    """Validated experiment description (one key=value file)"""

    model_config = ConfigDict(extra='forbid')

    seed: int = Field(default_factory=lambda: Config.DEFAULT_SEED)
    scale: int = Field(default=Config.DEFAULT_SCALE, ge=1)

    # Degeneration used by `simulate`
    kernel: str = 'motion:7:0.6:1'
    msi_bands: int = Field(default=Config.DEFAULT_MSI_BANDS, ge=1)
    srf_path: Optional[str] = None
    srf_c: Optional[float] = Field(default=0.02, ge=0.0)
    snr_hsi: float = 40.0
    snr_msi: float = 40.0

    # Estimation
    kernel_support: int = Field(default=Config.DEFAULT_KERNEL_SUPPORT, ge=1)
    eta: float = Field(default=1e-6, ge=0.0)
    xi: float = Field(default=1e-6, ge=0.0)

    # Schedule
    outer_iters: int = Field(default=40, ge=1)
    inner_iters: int = Field(default=10, ge=1)
    lr_degeneration: float = Field(default=1e-4, gt=0.0)
    lr_reconstruction: float = Field(default=1e-3, gt=0.0)
    mode: str = 'alternating'
    regularizer: str = 'none'

    # Networks
    backbone_width: int = Field(default=32, ge=1)
    backbone_depth: int = Field(default=4, ge=1)
    spatial_width: int = Field(default=32, ge=1)
    spectral_width: int = Field(default=32, ge=1)
    fusion_depth: int = Field(default=2, ge=1)
    branch_depth: int = Field(default=1, ge=1)
    guidance: bool = True

    # Paths
    input: Optional[str] = None
    output_dir: Optional[str] = None
    backbone_checkpoint: Optional[str] = None
    recon_checkpoint: Optional[str] = None

    @field_validator('kernel')
    @classmethod
    def _check_kernel(cls, value: str) -> str:
        parts = value.split(':')
        if parts[0] == 'gaussian' and len(parts) == 3:
            int(parts[1]), float(parts[2])
        elif parts[0] == 'motion' and len(parts) in (3, 4):
            int(parts[1]), [float(p) for p in parts[2:]]
        else:
            raise ValueError(f"kernel must be 'gaussian:<size>:<sigma>' or 'motion:<length>:<angle>[:<thickness>]', got {value!r}")
        return value

    @field_validator('mode')
    @classmethod
    def _check_mode(cls, value: str) -> str:
        value = value.lower()
        if value not in _MODES:
            raise ValueError(f"mode must be one of {_MODES}")
        return value

    @field_validator('regularizer')
    @classmethod
    def _check_regularizer(cls, value: str) -> str:
        parts = value.lower().split(':')
        if parts[0] == 'none' and len(parts) == 1:
            return 'none'
        if parts[0] in ('tikhonov', 'tv') and len(parts) == 2 and float(parts[1]) >= 0:
            return value.lower()
        raise ValueError("regularizer must be 'none', 'tikhonov:<weight>' or 'tv:<weight>'")

    def kernel_spec(self):
        """Kernel spec object for the degeneration module"""
        from .degeneration import GaussianSpec, MotionSpec

        parts = self.kernel.split(':')
        if parts[0] == 'gaussian':
            return GaussianSpec(size=int(parts[1]), sigma=float(parts[2]))
        thickness = float(parts[3]) if len(parts) == 4 else 1.0
        return MotionSpec(length=int(parts[1]), angle=float(parts[2]), thickness=thickness)

    def regularizer_spec(self):
        from .reconstruction.map import Regularizer

        parts = self.regularizer.split(':')
        if parts[0] == 'none':
            return Regularizer(kind='none', weight=0.0)
        return Regularizer(kind=parts[0], weight=float(parts[1]))

    def schedule(self):
        from .driver.schedule import Schedule

        return Schedule(
            outer_iters=self.outer_iters,
            inner_iters=self.inner_iters,
            lr_degeneration=self.lr_degeneration,
            lr_reconstruction=self.lr_reconstruction,
        )


def _coerce(raw: str) -> Any:
    """Keep values as strings; pydantic does the typing. Empty / 'none' for paths become None"""
    value = raw.strip()
    if value.lower() in ('', 'null'):
        return None
    if value.lower() in ('inf', '+inf', 'infinity'):
        return 'inf'
    return value


def parse_key_value(text: str) -> Dict[str, Any]:
    """
    Parse a key=value experiment file

    Blank lines and lines starting with '#' are ignored. Duplicate keys are an error.
    """
    values: Dict[str, Any] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith('#'):
            continue
        if '=' not in stripped:
            raise ConfigError(f"line {lineno}: expected key=value, got {stripped!r}")
        key, raw = stripped.split('=', 1)
        key = key.strip()
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _coerce(raw)
    return values


def load_experiment_config(
    path: Optional[Union[str, Path]] = None,
    overrides: Optional[Dict[str, Any]] = None
) -> ExperimentConfig:
    """
    Build an ExperimentConfig from an optional key=value file plus overrides

    Raises:
        ConfigError: unknown keys or invalid values
    """
    values: Dict[str, Any] = {}
    if path is not None:
        values.update(parse_key_value(Path(path).read_text(encoding='utf-8')))
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value

    try:
        experiment = ExperimentConfig(**values)
    except ValidationError as e:
        messages = [f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors()]
        logger.error(f"Invalid experiment configuration: {messages}")
        raise ConfigError(f"invalid experiment configuration: {'; '.join(messages)}", messages) from e

    logger.debug(f"Experiment configuration: {experiment.model_dump()}")
    return experiment
