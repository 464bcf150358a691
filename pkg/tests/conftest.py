"""Test configuration and fixtures for photon-trajectories tests."""

import shutil
import tempfile
from pathlib import Path

import numpy as np
import pytest
import yaml

from src.photon_trajectories import config as config_module
from src.photon_trajectories.models import SystemModel, random_model, two_level_atom
from src.photon_trajectories.profiles import discretize_profile, gaussian, matched_exponential, vacuum


@pytest.fixture
def temp_dir():
    """Create a temporary directory for tests."""
    temp_dir = tempfile.mkdtemp()
    yield Path(temp_dir)
    shutil.rmtree(temp_dir)


@pytest.fixture(autouse=True)
def reset_settings(monkeypatch):
    """Every test starts from the default settings without environment overrides."""
    for env_var in config_module.ENV_MAPPING:
        monkeypatch.delenv(env_var, raising=False)
    config_module._config_manager = None
    yield
    config_module._config_manager = None


@pytest.fixture
def settings_file(temp_dir):
    """Settings file with file logging and progress bars switched off."""
    path = temp_dir / "settings.yaml"
    path.write_text(yaml.safe_dump({
        "logging": {"level": "WARNING", "file": ""},
        "output": {"show_progress": False, "max_trajectory_dumps": 2},
        "quadrature": {"points_single": 256, "points_double": 32},
    }))
    return path


@pytest.fixture
def tla():
    """Two-level atom in the ground state, Γ = 1."""
    return two_level_atom(1.0)


@pytest.fixture
def excited_tla():
    return two_level_atom(1.0, excited=True)


@pytest.fixture
def matched_profile():
    """ξ_t = e^{−t/2}, matched to the Γ = 1 atom."""
    return matched_exponential(1.0)


@pytest.fixture
def gaussian_profile():
    return gaussian(3.0, 0.7)


@pytest.fixture
def vacuum_profile():
    return vacuum()


@pytest.fixture
def qubit_model():
    """Random qubit with a fixed seed."""
    return random_model(2, seed=11)


@pytest.fixture
def ladder_model():
    """Driven three-level ladder that can emit two photons."""
    h = np.array([[0.0, 0.3, 0.0], [0.3, 0.5, 0.2], [0.0, 0.2, 1.0]], dtype=complex)
    l_op = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 0.8], [0.0, 0.0, 0.0]], dtype=complex)
    return SystemModel(h, l_op, np.array([1.0, 0.0, 0.0], dtype=complex))


@pytest.fixture
def model_factory():
    """Random models of any dimension, pure or mixed."""
    def make(dim: int, seed: int = 0, mixed: bool = False) -> SystemModel:
        return random_model(dim, seed=seed, mixed=mixed)
    return make


@pytest.fixture
def matched_grid(matched_profile):
    """Matched profile on τ = 0.1 up to t = 2."""
    return discretize_profile(matched_profile, 0.1, 2.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_configure(config):
    """Configure pytest."""
    # Disable logging during tests to reduce noise
    import logging
    logging.disable(logging.CRITICAL)
