"""Utility functions and helpers for photon-trajectories."""

import hashlib
import logging
import sys
from pathlib import Path
from typing import Optional, TypeVar, Union

import numpy as np
from rich.console import Console
from rich.progress import (
    BarColumn,
    Progress,
    SpinnerColumn,
    TaskProgressColumn,
    TextColumn,
    TimeElapsedColumn,
)


T = TypeVar("T")


def setup_logging(level: str = "INFO", log_file: Optional[str] = "photon-trajectories.log") -> None:
    """Set up application logging.

    Console output goes to stderr so that JSON printed on stdout stays clean.

    Args:
        level: Logging level (DEBUG, INFO, WARNING, ERROR)
        log_file: Path to log file, None to log to the console only
    """
    handlers: list = [logging.StreamHandler(sys.stderr)]
    if log_file:
        log_path = Path(log_file)
        log_path.parent.mkdir(parents=True, exist_ok=True)
        handlers.insert(0, logging.FileHandler(log_file))

    logging.basicConfig(
        level=getattr(logging, level.upper()),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        handlers=handlers,
        force=True,
    )


def ensure_directory_exists(directory: Union[str, Path]) -> Path:
    """Ensure directory exists, creating it if necessary.

    Args:
        directory: Directory path

    Returns:
        Path object for the directory
    """
    dir_path = Path(directory)
    dir_path.mkdir(parents=True, exist_ok=True)
    return dir_path


def file_sha256(file_path: Union[str, Path]) -> str:
    """Hex SHA-256 digest of a file's bytes."""
    digest = hashlib.sha256()
    with open(file_path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def pick(value: Optional[T], default: T) -> T:
    """Return value unless it is None."""
    return default if value is None else value


def trajectory_rng(base_seed: int, index: int) -> np.random.Generator:
    """Independent random stream for trajectory ``index`` of a batch seeded with ``base_seed``.

    Streams depend only on (base_seed, index), so growing a batch never
    reshuffles earlier trajectories.
    """
    return np.random.default_rng(np.random.SeedSequence([int(base_seed), int(index)]))


def dag(m: np.ndarray) -> np.ndarray:
    """Conjugate transpose over the last two axes."""
    return np.conj(np.swapaxes(m, -1, -2))


def hermitize(m: np.ndarray) -> np.ndarray:
    """Hermitian part (M + M†)/2 over the last two axes."""
    return 0.5 * (m + dag(m))


def trace(m: np.ndarray) -> np.ndarray:
    """Trace over the last two axes (works on stacks of matrices)."""
    return np.trace(m, axis1=-2, axis2=-1)


def _entry(x, name: str) -> complex:
    if isinstance(x, (list, tuple)):
        if len(x) != 2:
            raise ValueError(f"{name} entries must be numbers or [re, im] pairs")
        return complex(float(x[0]), float(x[1]))
    if not isinstance(x, (int, float, complex, np.number)):
        raise ValueError(f"{name} entry {x!r} is not a number")
    return complex(x)


def as_complex_matrix(data, name: str = "matrix") -> np.ndarray:
    """Convert a nested list into a complex 2-D array.

    Accepts a d×d nested list whose entries are either numbers or
    two-element [re, im] lists, freely mixed.
    """
    if isinstance(data, np.ndarray):
        arr = data.astype(complex)
    else:
        if not all(isinstance(row, (list, tuple)) for row in data):
            raise ValueError(f"{name} must be a list of rows")
        rows = [[_entry(x, name) for x in row] for row in data]
        if len({len(row) for row in rows}) > 1:
            raise ValueError(f"{name} has rows of different length")
        arr = np.array(rows, dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {arr.shape}")
    return arr


def as_complex_vector(data, name: str = "vector") -> np.ndarray:
    """Convert a list of numbers or [re, im] pairs into a complex 1-D array."""
    if isinstance(data, np.ndarray):
        arr = data.astype(complex)
    else:
        arr = np.array([_entry(x, name) for x in data], dtype=complex)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be a vector, got shape {arr.shape}")
    return arr


def make_progress(console: Optional[Console] = None) -> Progress:
    """Rich progress bar used by long-running commands."""
    return Progress(
        SpinnerColumn(),
        TextColumn("[progress.description]{task.description}"),
        BarColumn(),
        TaskProgressColumn(),
        TimeElapsedColumn(),
        console=console or Console(stderr=True),
    )
