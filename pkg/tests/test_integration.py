"""End-to-end tests through the command line and the experiment runner."""

import hashlib
import json
import math
from pathlib import Path

import pytest
import yaml
from click.testing import CliRunner

from src.photon_trajectories.cli import main
from src.photon_trajectories.config import set_config_file
from src.photon_trajectories.runner import ExperimentKind, parse_run_config, run


EXAMPLES = Path(__file__).parent.parent / "config" / "examples"

DISCRETE_RUN = {
    "kind": "discrete-counting",
    "model": {"preset": "two_level_atom", "gamma": 1.0},
    "profile": {"name": "matched_exponential", "params": {"gamma_p": 1.0}},
    "discretization": {"tau": 0.05, "horizon": 3.0, "enumerate_steps": 4, "exact_distribution": True},
    "trajectories": 20,
    "seed": 3,
}

JUMP_RUN = {
    "kind": "jump",
    "model": {"preset": "two_level_atom"},
    "continuum": {"dt": 0.01, "t_end": 1.0, "save_every": 10},
    "trajectories": 10,
    "seed": 4,
}


@pytest.fixture
def cli():
    return CliRunner()


@pytest.fixture
def write_config(temp_dir):
    """Write an experiment document and return its path."""
    def write(data, name="experiment.yaml"):
        path = temp_dir / name
        path.write_text(yaml.safe_dump(data, sort_keys=False))
        return path
    return write


def read_manifest(out_dir):
    return json.loads((Path(out_dir) / "manifest.json").read_text())


class TestOracleCommand:
    """Test the oracle command group."""

    def test_json_on_stdout(self, cli, settings_file):
        result = cli.invoke(main, ["--config", str(settings_file), "oracle", "tla", "--t-end", "2", "--points", "3"])
        assert result.exit_code == 0, result.output
        payload = json.loads(result.output)
        assert payload["params"] == {"gamma_p": 1.0}
        last = payload["rows"][-1]
        assert last["t"] == 2.0
        assert last["no_count"] == pytest.approx(5.0 * math.exp(-2.0))
        assert last["excitation"] == pytest.approx(4.0 * math.exp(-2.0))

    def test_json_to_file(self, cli, settings_file, temp_dir):
        out = temp_dir / "oracle.json"
        result = cli.invoke(main, ["--config", str(settings_file), "oracle", "tla", "--profile", "gaussian",
                                   "--param", "t0=3", "--param", "sigma=0.7", "--points", "11", "--out", str(out)])
        assert result.exit_code == 0, result.output
        payload = json.loads(out.read_text())
        assert len(payload["rows"]) == 11
        assert payload["profile"] == "gaussian"

    def test_bad_parameter(self, cli, settings_file):
        result = cli.invoke(main, ["--config", str(settings_file), "oracle", "tla", "--param", "gamma_p"])
        assert result.exit_code == 2
        assert "key=value" in result.output

    def test_bad_rate(self, cli, settings_file):
        result = cli.invoke(main, ["--config", str(settings_file), "oracle", "tla", "--gamma", "-1"])
        assert result.exit_code == 2


class TestRunCommand:
    """Test experiments launched from configuration files."""

    def test_master_run(self, cli, settings_file, temp_dir):
        out = temp_dir / "master"
        result = cli.invoke(main, ["--config", str(settings_file), "run", str(EXAMPLES / "tla_master.yaml"),
                                   "-o", str(out)])
        assert result.exit_code == 0, result.output

        summary = json.loads((out / "summary.json").read_text())
        assert summary["population_max"][1] == pytest.approx(4.0 * math.exp(-2.0), abs=1e-6)
        assert summary["population_argmax_t"][1] == pytest.approx(2.0, abs=1e-3)

        manifest = read_manifest(out)
        assert [f["path"] for f in manifest["files"]] == ["master.csv", "summary.json"]
        digest = hashlib.sha256((out / "master.csv").read_bytes()).hexdigest()
        assert manifest["files"][0]["sha256"] == digest

    def test_discrete_run_is_reproducible(self, cli, settings_file, write_config, temp_dir):
        config = write_config(DISCRETE_RUN)
        for name, threads in (("a", "1"), ("b", "3")):
            result = cli.invoke(main, ["--config", str(settings_file), "run", str(config),
                                       "-o", str(temp_dir / name), "--threads", threads])
            assert result.exit_code == 0, result.output

        first, second = read_manifest(temp_dir / "a"), read_manifest(temp_dir / "b")
        assert first["files"] == second["files"]
        assert {f["path"] for f in first["files"]} == {
            "trajectory_0000.csv", "trajectory_0001.csv", "enumeration.json", "summary.json",
        }
        summary = json.loads((temp_dir / "a" / "summary.json").read_text())
        assert sum(summary["count_histogram"]) == 20
        assert len(summary["count_histogram"]) <= 2
        assert sum(summary["exact_count_distribution"]) == pytest.approx(1.0)

    def test_seed_override_changes_trajectories(self, cli, settings_file, write_config, temp_dir):
        config = write_config(DISCRETE_RUN)
        for name, seed in (("a", "3"), ("b", "4")):
            cli.invoke(main, ["--config", str(settings_file), "run", str(config), "-o", str(temp_dir / name),
                              "--seed", seed])
        assert read_manifest(temp_dir / "a")["seeds"]["base_seed"] == 3
        assert read_manifest(temp_dir / "b")["seeds"]["base_seed"] == 4

    def test_out_dir_from_environment(self, cli, settings_file, write_config, temp_dir):
        config = write_config(JUMP_RUN)
        out = temp_dir / "from-env"
        result = cli.invoke(main, ["--config", str(settings_file), "run", str(config)],
                            env={"PHOTON_TRAJ_OUT_DIR": str(out)})
        assert result.exit_code == 0, result.output
        assert (out / "summary.csv").exists()
        assert (out / "trajectory_0001.csv").exists()
        assert not (out / "trajectory_0002.csv").exists()

    def test_schema_error_exit_code(self, cli, settings_file, write_config, temp_dir):
        bad = {k: v for k, v in JUMP_RUN.items() if k != "continuum"}
        result = cli.invoke(main, ["--config", str(settings_file), "run", str(write_config(bad)),
                                   "-o", str(temp_dir / "out")])
        assert result.exit_code == 2
        assert "continuum" in result.output

    def test_missing_config_file(self, cli, settings_file, temp_dir):
        result = cli.invoke(main, ["--config", str(settings_file), "run", str(temp_dir / "nope.yaml")])
        assert result.exit_code == 2
        assert "ConfigurationError" in result.output

    def test_unnormalized_grid_exit_code(self, cli, settings_file, write_config, temp_dir):
        data = dict(DISCRETE_RUN, discretization={"tau": 0.01, "horizon": 20.0, "sampling": "left"})
        result = cli.invoke(main, ["--config", str(settings_file), "run", str(write_config(data)),
                                   "-o", str(temp_dir / "out")])
        assert result.exit_code == 3
        assert "NormalizationError" in result.output

    def test_counting_stats(self, cli, settings_file, temp_dir):
        out = temp_dir / "stats"
        result = cli.invoke(main, ["--config", str(settings_file), "counting-stats",
                                   str(EXAMPLES / "tla_counting_stats.yaml"), "-o", str(out)])
        assert result.exit_code == 0, result.output
        report = json.loads((out / "counting_stats.json").read_text())
        assert report["max_normalization_residual"] < 1e-4
        for row in report["rows"]:
            assert abs(row["P2"]) < 1e-8
        assert (out / "one_count_density.csv").exists()

    @pytest.mark.slow
    def test_convergence(self, cli, settings_file, temp_dir):
        out = temp_dir / "conv"
        result = cli.invoke(main, ["--config", str(settings_file), "convergence",
                                   str(EXAMPLES / "convergence.yaml"), "-o", str(out)])
        assert result.exit_code == 0, result.output
        report = json.loads((out / "convergence.json").read_text())
        errors = [row["error"] for row in report["rows"]]
        assert errors == sorted(errors, reverse=True)
        assert report["fitted_order"] >= 0.9


class TestInfoCommands:
    """Test informational commands."""

    def test_info(self, cli, settings_file):
        result = cli.invoke(main, ["--config", str(settings_file), "info"])
        assert result.exit_code == 0
        assert "points_single" in result.output

    def test_profiles(self, cli, settings_file):
        result = cli.invoke(main, ["--config", str(settings_file), "profiles"])
        assert result.exit_code == 0
        for name in ("matched_exponential", "gaussian", "vacuum"):
            assert name in result.output

    def test_invalid_settings_file(self, cli, temp_dir):
        path = temp_dir / "bad.yaml"
        path.write_text(yaml.safe_dump({"simulation": {"threads": 0}}))
        result = cli.invoke(main, ["--config", str(path), "info"])
        assert result.exit_code == 2


class TestRunner:
    """Test the runner API directly."""

    def test_progress_callback(self, settings_file, temp_dir, mocker):
        set_config_file(str(settings_file))
        config = parse_run_config(yaml.safe_dump(dict(JUMP_RUN, out_dir=str(temp_dir / "jump"))))
        callback = mocker.Mock()
        result = run(config, progress_callback=callback)

        callback.assert_called_once_with("jump trajectories", 10, 10)
        assert result.kind is ExperimentKind.JUMP
        assert [p.name for p in result.files] == [
            "summary.csv", "trajectory_0000.csv", "trajectory_0001.csv", "summary.json",
        ]
        assert result.manifest.name == "manifest.json"
        assert result.report["n_trajectories"] == 10

    def test_oracle_experiment(self, settings_file, temp_dir):
        set_config_file(str(settings_file))
        config = parse_run_config(yaml.safe_dump({
            "kind": "oracle",
            "model": {"preset": "two_level_atom"},
            "oracle": {"t_end": 2.0, "points": 5},
            "out_dir": str(temp_dir / "oracle"),
        }))
        result = run(config)
        assert result.report["rows"][-1]["no_count"] == pytest.approx(5.0 * math.exp(-2.0))
        assert (temp_dir / "oracle" / "oracle_tla.csv").exists()
