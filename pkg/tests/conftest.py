"""
Shared fixtures for the hsifusion test suite

Run with: pytest
Skip the expensive oracles: pytest -m "not slow"
Run with coverage: pytest --cov=hsifusion --cov-report=html
"""

import sys
from pathlib import Path

import pytest

# Add project root to path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

import numpy as np  # noqa: E402

from hsifusion.core import HsiCube, Rng  # noqa: E402
from hsifusion.degeneration import (  # noqa: E402
    GaussianSpec,
    gaussian_kernel,
    gaussian_srf,
    spatial_degrade,
    spectral_degrade,
)


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: expensive end-to-end oracle (minutes)")


@pytest.fixture
def rng():
    return Rng(0)


@pytest.fixture
def random_cube():
    """Factory for uniform [0, 1) cubes from a fixed seed"""
    def make(bands, height, width, seed=0):
        return HsiCube(Rng(seed).uniform(0.0, 1.0, (bands, height, width)))
    return make


@pytest.fixture
def small_cube(random_cube):
    return random_cube(4, 8, 8)


@pytest.fixture
def problem(random_cube):
    """Noise-free 4-band scene observed at scale 2 with a 3x3 blur and 2 MSI bands: (z, x, y, k, p)"""
    rng = Rng(21)
    smooth = np.cumsum(rng.uniform(0.0, 0.1, (4, 16, 16)), axis=2) / 1.6
    z = HsiCube(np.clip(smooth + 0.05 * random_cube(4, 16, 16).data, 0.0, 1.0))
    k = gaussian_kernel(GaussianSpec(3, 0.8))
    p = gaussian_srf(2, 4)
    return z, spatial_degrade(z, k, 2), spectral_degrade(z, p), k, p


def relative_gap(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


@pytest.fixture
def close():
    """Relative comparison helper used by the adjoint / linearity checks"""
    def check(a: float, b: float, tol: float = 1e-10) -> bool:
        return relative_gap(a, b) <= tol or abs(a - b) <= 1e-12
    return check


@pytest.fixture(autouse=True)
def _isolated_output_dir(tmp_path, monkeypatch):
    """Reports never land in the working tree during tests"""
    from hsifusion.config import Config

    monkeypatch.setattr(Config, 'OUTPUT_DIR', tmp_path / 'reports')
