"""Tests for settings and experiment configuration."""

import textwrap
from pathlib import Path

import pytest
import yaml

from src.photon_trajectories import config as config_module
from src.photon_trajectories.config import ConfigManager, Settings, get_config, set_config_file
from src.photon_trajectories.errors import ConfigurationError, ValidationError
from src.photon_trajectories.models import BlockMode
from src.photon_trajectories.runner import (
    ExperimentKind,
    apply_overrides,
    load_run_config,
    parse_run_config,
)


MASTER_CONFIG = textwrap.dedent("""\
    kind: master
    model:
      preset: two_level_atom
    continuum:
      dt: 1.0e-2
      t_end: 1.0
""")


class TestSettings:
    """Test the YAML + environment settings layer."""

    def test_defaults(self, temp_dir):
        settings = ConfigManager(str(temp_dir / "missing.yaml")).load_config()
        assert settings == Settings()
        assert settings.quadrature.points_single == 2048
        assert settings.numerics.step_guard == 0.2
        assert settings.simulation.sampling == "cell"

    def test_yaml_values(self, settings_file):
        settings = ConfigManager(str(settings_file)).load_config()
        assert settings.output.show_progress is False
        assert settings.output.max_trajectory_dumps == 2
        assert settings.quadrature.points_double == 32
        assert settings.logging.file == ""

    def test_environment_overrides(self, settings_file, monkeypatch):
        monkeypatch.setenv("PHOTON_TRAJ_THREADS", "4")
        monkeypatch.setenv("PHOTON_TRAJ_SHOW_PROGRESS", "true")
        monkeypatch.setenv("PHOTON_TRAJ_OUT_DIR", "elsewhere")
        settings = ConfigManager(str(settings_file)).load_config()
        assert settings.simulation.threads == 4
        assert settings.output.show_progress is True
        assert settings.output.directory == "elsewhere"

    def test_invalid_settings(self, temp_dir):
        path = temp_dir / "bad.yaml"
        path.write_text(yaml.safe_dump({"numerics": {"step_guard": 1.5}}))
        with pytest.raises(ConfigurationError, match="Invalid settings"):
            ConfigManager(str(path)).load_config()

    def test_settings_are_cached(self, settings_file):
        manager = ConfigManager(str(settings_file))
        assert manager.get_config() is manager.get_config()
        assert manager.reload_config() is not None

    def test_set_config_file(self, settings_file):
        manager = set_config_file(str(settings_file))
        assert config_module.get_config_manager() is manager
        assert get_config().quadrature.points_single == 256


class TestRunConfig:
    """Test experiment-document validation."""

    def test_valid_master_config(self):
        config = parse_run_config(MASTER_CONFIG)
        assert config.kind is ExperimentKind.MASTER
        assert config.continuum.dt == 1e-2
        assert config.profile.name == "matched_exponential"
        assert config.model.build().dim == 2

    def test_example_configs_validate(self):
        examples = sorted((Path(__file__).parent.parent / "config" / "examples").glob("*.yaml"))
        assert examples
        for path in examples:
            assert load_run_config(path).kind in ExperimentKind

    def test_missing_section(self):
        with pytest.raises(ConfigurationError) as exc_info:
            parse_run_config("kind: jump\nmodel:\n  preset: two_level_atom\n")
        assert any("continuum" in line for line in exc_info.value.diagnostics)

    def test_missing_kind(self):
        with pytest.raises(ConfigurationError) as exc_info:
            parse_run_config("model:\n  preset: two_level_atom\n")
        assert any("kind" in line for line in exc_info.value.diagnostics)

    def test_diagnostic_points_at_line(self):
        text = MASTER_CONFIG.replace("dt: 1.0e-2", "dt: -1.0")
        with pytest.raises(ConfigurationError) as exc_info:
            parse_run_config(text, source="master.yaml")
        assert exc_info.value.diagnostics[0].startswith("line 5: continuum.dt:")
        assert "master.yaml" in str(exc_info.value)

    def test_unknown_field(self):
        with pytest.raises(ConfigurationError) as exc_info:
            parse_run_config(MASTER_CONFIG + "speed: 3\n")
        assert any("speed" in line for line in exc_info.value.diagnostics)

    def test_unknown_profile(self):
        with pytest.raises(ConfigurationError):
            parse_run_config(MASTER_CONFIG + "profile:\n  name: lorentzian\n")

    def test_invalid_yaml(self):
        with pytest.raises(ConfigurationError, match="not valid YAML"):
            parse_run_config("kind: [master\n")

    def test_not_a_mapping(self):
        with pytest.raises(ConfigurationError):
            parse_run_config("- 1\n- 2\n")

    def test_explicit_complex_matrices(self):
        text = textwrap.dedent("""\
            kind: discrete-homodyne
            model:
              dimension: 2
              hamiltonian: [[0.0, [0.0, -0.5]], [[0.0, 0.5], 0.0]]
              coupling: [[0.0, 1.0], [0.0, 0.0]]
              initial_state: [1.0, 0.0]
            discretization:
              tau: 0.1
              blocks: first_order
        """)
        config = parse_run_config(text)
        model = config.model.build()
        assert model.hamiltonian[0, 1] == -0.5j
        assert model.hamiltonian[1, 0] == 0.5j
        assert config.discretization.blocks is BlockMode.FIRST_ORDER

    def test_explicit_model_needs_one_initial_state(self):
        text = textwrap.dedent("""\
            kind: master
            model:
              dimension: 2
              hamiltonian: [[0.0, 0.0], [0.0, 0.0]]
              coupling: [[0.0, 1.0], [0.0, 0.0]]
            continuum: {dt: 0.1, t_end: 1.0}
        """)
        with pytest.raises(ConfigurationError) as exc_info:
            parse_run_config(text)
        assert any("initial_state" in line for line in exc_info.value.diagnostics)

    def test_oracle_needs_atom_preset(self):
        with pytest.raises(ConfigurationError):
            parse_run_config("kind: oracle\nmodel:\n  preset: random\n  dimension: 2\n")

    def test_missing_file(self, temp_dir):
        with pytest.raises(ConfigurationError, match="not found"):
            load_run_config(temp_dir / "nope.yaml")

    def test_errors_are_validation_errors(self):
        assert issubclass(ConfigurationError, ValidationError)
        assert issubclass(ConfigurationError, ValueError)


class TestOverrides:
    """Test command-line overrides."""

    def test_overrides_apply(self):
        config = parse_run_config(MASTER_CONFIG)
        updated = apply_overrides(config, seed=9, out_dir="out", threads=None)
        assert updated.seed == 9
        assert updated.out_dir == "out"
        assert updated.threads is None
        assert config.seed == 0

    def test_kind_override(self):
        config = parse_run_config(MASTER_CONFIG)
        updated = apply_overrides(config, kind=ExperimentKind.CONVERGENCE)
        assert updated.kind is ExperimentKind.CONVERGENCE

    def test_no_overrides_returns_same_config(self):
        config = parse_run_config(MASTER_CONFIG)
        assert apply_overrides(config, seed=None) is config

    def test_invalid_override(self):
        config = parse_run_config(MASTER_CONFIG)
        with pytest.raises(ConfigurationError):
            apply_overrides(config, threads=0)
