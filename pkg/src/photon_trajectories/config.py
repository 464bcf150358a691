"""Configuration management for photon-trajectories."""

import logging
import os
from pathlib import Path
from typing import Any, Dict, Literal, Optional

import yaml
from pydantic import BaseModel, Field, ValidationError as PydanticValidationError

from .errors import ConfigurationError


logger = logging.getLogger(__name__)


class NumericsConfig(BaseModel):
    """Tolerances and thresholds shared by the numerical modules."""
    normalization_eps: float = Field(1e-4, gt=0)
    tail_threshold: float = Field(1e-6, gt=0)
    profile_norm_tol: float = Field(1e-6, gt=0)
    jump_threshold: float = Field(1e-12, ge=0)
    intensity_clamp: float = Field(1e-10, ge=0)
    intensity_error: float = Field(1e-6, gt=0)
    step_guard: float = Field(0.2, gt=0, le=1)
    trace_drift_limit: float = Field(1e-5, gt=0)
    unitarity_tol: float = Field(1e-10, gt=0)


class QuadratureConfig(BaseModel):
    """Grid sizes for the counting-statistics quadrature."""
    points_single: int = Field(2048, ge=8)
    points_double: int = Field(256, ge=8)


class SimulationConfig(BaseModel):
    """Monte Carlo batch settings."""
    threads: int = Field(1, ge=1)
    batch_size: int = Field(500, ge=1)
    renormalize: bool = False
    sampling: Literal["cell", "left"] = "cell"


class OutputConfig(BaseModel):
    """Data-file settings."""
    directory: str = "results"
    float_format: str = "%.17g"
    max_trajectory_dumps: int = Field(5, ge=0)
    show_progress: bool = True


class LoggingConfig(BaseModel):
    """Logging configuration."""
    level: str = "INFO"
    file: str = "photon-trajectories.log"


class Settings(BaseModel):
    """Main configuration class."""
    numerics: NumericsConfig = Field(default_factory=NumericsConfig)
    quadrature: QuadratureConfig = Field(default_factory=QuadratureConfig)
    simulation: SimulationConfig = Field(default_factory=SimulationConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)
    logging: LoggingConfig = Field(default_factory=LoggingConfig)


ENV_MAPPING = {
    "PHOTON_TRAJ_OUT_DIR": ["output", "directory"],
    "PHOTON_TRAJ_THREADS": ["simulation", "threads"],
    "PHOTON_TRAJ_LOG_LEVEL": ["logging", "level"],
    "PHOTON_TRAJ_RENORMALIZE": ["simulation", "renormalize"],
    "PHOTON_TRAJ_SHOW_PROGRESS": ["output", "show_progress"],
}


class ConfigManager:
    """Manages application settings from files and environment variables."""

    def __init__(self, config_file: Optional[str] = None):
        """Initialize configuration manager.

        Args:
            config_file: Path to YAML settings file
        """
        self.config_file = config_file or "config/settings.yaml"
        self._config: Optional[Settings] = None

    def load_config(self) -> Settings:
        """Load settings from file and environment variables.

        Returns:
            Validated settings

        Raises:
            ConfigurationError: If the merged settings fail validation
        """
        if self._config is not None:
            return self._config

        config_data: Dict[str, Any] = {}

        if Path(self.config_file).exists():
            try:
                with open(self.config_file, "r") as f:
                    config_data = yaml.safe_load(f) or {}
            except yaml.YAMLError as e:
                logger.warning(f"Failed to load settings file {self.config_file}: {e}")

        config_data = self._apply_env_overrides(config_data)

        try:
            self._config = Settings(**config_data)
        except PydanticValidationError as e:
            raise ConfigurationError(f"Invalid settings in {self.config_file}: {e}")
        return self._config

    def _apply_env_overrides(self, config_data: Dict[str, Any]) -> Dict[str, Any]:
        """Apply environment variable overrides to settings data.

        Args:
            config_data: Base settings data

        Returns:
            Settings data with environment overrides applied
        """
        for env_var, config_path in ENV_MAPPING.items():
            value = os.environ.get(env_var)
            if value is None:
                continue

            current = config_data
            for key in config_path[:-1]:
                if not isinstance(current.get(key), dict):
                    current[key] = {}
                current = current[key]

            final_key = config_path[-1]
            if value.lower() in ("true", "false"):
                current[final_key] = value.lower() == "true"
            else:
                current[final_key] = value

        return config_data

    def get_config(self) -> Settings:
        """Get the current settings, loading if necessary."""
        if self._config is None:
            return self.load_config()
        return self._config

    def reload_config(self) -> Settings:
        """Reload settings from file."""
        self._config = None
        return self.load_config()

    def get_output_dir(self) -> Path:
        """Get the resolved default output directory."""
        return Path(self.get_config().output.directory).resolve()


# Global configuration manager instance
_config_manager: Optional[ConfigManager] = None


def get_config_manager() -> ConfigManager:
    """Get the global configuration manager instance."""
    global _config_manager
    if _config_manager is None:
        _config_manager = ConfigManager()
    return _config_manager


def set_config_file(config_file: Optional[str]) -> ConfigManager:
    """Point the global manager at another settings file.

    Args:
        config_file: Path to YAML settings file, None for the default

    Returns:
        The new global configuration manager
    """
    global _config_manager
    _config_manager = ConfigManager(config_file)
    return _config_manager


def get_config() -> Settings:
    """Get the current settings."""
    return get_config_manager().get_config()
