"""Data-file writers: CSV tables, JSON reports and the run manifest."""

import json
import logging
import platform
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import pandas as pd

from . import __version__
from .config import get_config
from .continuous import DiffusivePath, JumpPath, MasterPath, MonteCarloSummary
from .discrete import OUTCOME_LABELS, OUTCOMES, DiscreteTrajectory, MeasurementKind
from .utils import ensure_directory_exists, file_sha256, pick, trace


logger = logging.getLogger(__name__)


def to_jsonable(value: Any) -> Any:
    """Plain Python structure for json.dump (complex numbers become [re, im])."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (complex, np.complexfloating)):
        return [float(value.real), float(value.imag)]
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, Path):
        return str(value)
    return value


def dumps(payload: Any) -> str:
    return json.dumps(to_jsonable(payload), indent=2, sort_keys=True)


class RunWriter:
    """Writes the data files of one run and records them for the manifest."""

    def __init__(self, out_dir: Union[str, Path], float_format: Optional[str] = None):
        self.out_dir = ensure_directory_exists(out_dir)
        self.float_format = pick(float_format, get_config().output.float_format)
        self.files: List[Path] = []

    def _register(self, path: Path) -> Path:
        self.files.append(path)
        logger.info(f"Wrote {path}")
        return path

    def write_csv(self, name: str, frame: pd.DataFrame) -> Path:
        path = self.out_dir / name
        frame.to_csv(path, float_format=self.float_format, index=False, lineterminator="\n")
        return self._register(path)

    def write_json(self, name: str, payload: Any) -> Path:
        path = self.out_dir / name
        with open(path, "w", encoding="utf-8") as f:
            f.write(dumps(payload))
            f.write("\n")
        return self._register(path)

    def write_manifest(self, config_echo: Dict[str, Any], seeds: Dict[str, Any], wall_time: float) -> Path:
        """manifest.json with a SHA-256 for every data file written so far."""
        manifest = {
            "version": __version__,
            "python": platform.python_version(),
            "config": config_echo,
            "seeds": seeds,
            "wall_time": wall_time,
            "files": [
                {"path": p.relative_to(self.out_dir).as_posix(), "sha256": file_sha256(p)}
                for p in self.files
            ],
        }
        path = self.out_dir / "manifest.json"
        with open(path, "w", encoding="utf-8") as f:
            f.write(dumps(manifest))
            f.write("\n")
        logger.info(f"Wrote manifest with {len(self.files)} data file(s) to {path}")
        return path


def _populations(states: np.ndarray) -> Dict[str, np.ndarray]:
    diag = np.real(np.diagonal(states, axis1=-2, axis2=-1))
    return {f"pop_{i}": diag[:, i] for i in range(diag.shape[1])}


def _entries(prefix: str, states: np.ndarray) -> Dict[str, np.ndarray]:
    """Re/Im columns of every matrix entry."""
    d = states.shape[-1]
    cols: Dict[str, np.ndarray] = {}
    for i in range(d):
        for j in range(d):
            cols[f"{prefix}_{i}{j}_re"] = states[:, i, j].real
            cols[f"{prefix}_{i}{j}_im"] = states[:, i, j].imag
    return cols


def discrete_frame(traj: DiscreteTrajectory) -> pd.DataFrame:
    """One row per step: outcome, record weight Tr ρ_j, scenario split and populations."""
    n = traj.steps
    labels = OUTCOME_LABELS[traj.kind]
    outcome_of = dict(zip(OUTCOMES[traj.kind], labels))
    log_weight = np.log(traj.initial_weight) + np.concatenate([[0.0], np.cumsum(traj.log_probs)])
    data: Dict[str, Any] = {
        "step": np.arange(n + 1),
        "time": traj.times,
        "outcome": [""] + [outcome_of[int(o)] for o in traj.outcomes],
        "pair_trace": np.exp(log_weight),
        "log_probability": log_weight,
        "p_future": traj.p_future,
        "p_consumed": 1.0 - traj.p_future,
        "intensity": np.concatenate([traj.intensities, [np.nan]]),
    }
    data.update(_populations(traj.states))
    if traj.kind is MeasurementKind.COUNTING:
        data["counts"] = traj.counts
    else:
        data["wiener"] = traj.wiener
    return pd.DataFrame(data)


def master_frame(path: MasterPath) -> pd.DataFrame:
    data: Dict[str, Any] = {"t": path.times, "trace": trace(path.rho).real}
    data.update(_populations(path.rho))
    data.update(_entries("rho", path.rho))
    data.update(_entries("rho01", path.rho01))
    data["trace_rho00"] = trace(path.rho00).real
    return pd.DataFrame(data)


def jump_frame(path: JumpPath) -> pd.DataFrame:
    data: Dict[str, Any] = {
        "t": path.times,
        "trace": trace(path.rho).real,
        "intensity": np.concatenate([path.intensities, [np.nan]]),
        "counts": path.counts,
    }
    data.update(_populations(path.rho))
    data.update(_entries("rho", path.rho))
    data["trace_rho00"] = trace(path.rho00).real
    return pd.DataFrame(data)


def diffusive_frame(path: DiffusivePath) -> pd.DataFrame:
    data: Dict[str, Any] = {
        "t": path.times,
        "trace": trace(path.rho).real,
        "rate": np.concatenate([path.rates, [np.nan]]),
        "wiener": path.wiener,
        "min_eigenvalue": path.min_eigenvalues,
    }
    data.update(_populations(path.rho))
    data.update(_entries("rho", path.rho))
    data["trace_rho00"] = trace(path.rho00).real
    return pd.DataFrame(data)


def summary_frame(summary: MonteCarloSummary) -> pd.DataFrame:
    """Mean and standard error of every ρ̃ entry at the saved times."""
    data: Dict[str, Any] = {"t": summary.times}
    data.update(_entries("mean", summary.mean.rho))
    d = summary.mean.rho.shape[-1]
    for i in range(d):
        for j in range(d):
            data[f"se_{i}{j}_re"] = summary.stderr_real.rho[:, i, j]
            data[f"se_{i}{j}_im"] = summary.stderr_imag.rho[:, i, j]
    data["mean_trace_rho00"] = trace(summary.mean.rho00).real
    return pd.DataFrame(data)


def summary_payload(summary: MonteCarloSummary) -> Dict[str, Any]:
    counts = summary.total_counts
    histogram = np.bincount(counts).tolist() if counts.size else []
    payload: Dict[str, Any] = {
        "kind": summary.kind.value,
        "n_trajectories": summary.n_trajectories,
        "base_seed": summary.base_seed,
        "final_time": float(summary.times[-1]),
        "final_mean_rho": summary.mean.rho[-1],
        "final_stderr_rho_real": summary.stderr_real.rho[-1],
        "final_stderr_rho_imag": summary.stderr_imag.rho[-1],
    }
    if summary.kind.value == "jump":
        payload["count_histogram"] = histogram
    else:
        payload["min_eigenvalue"] = summary.min_eigenvalue
    return payload
