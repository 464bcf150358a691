"""Photon-counting statistics from the non-Hermitian propagator.

All conditional vectors are built from T_s = exp(−iGs) and the segment operator

    I(a, b) = ∫_a^b T_{b−s} ξ_s L† T_{s−a} ds,

which describes the photon being absorbed somewhere in (a, b) while no count
is registered. Segment integrals use Simpson's rule on every grid interval
with its midpoint, so recursions over the grid stay fourth order for any
number of intervals.
"""

import logging
from dataclasses import dataclass
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate
from scipy.linalg import expm

from .config import get_config
from .errors import InvalidArgumentError, UnsupportedCountError
from .models import NonHermitianGenerator, SystemModel, make_generator
from .profiles import PhotonProfile
from .utils import dag, pick


logger = logging.getLogger(__name__)

MAX_COUNTS = 2


@dataclass(frozen=True)
class CountRecord:
    """Count times 0 < t_1 < … < t_m < t inside the window (0, t]."""

    times: Tuple[float, ...]
    window_end: float

    def __post_init__(self) -> None:
        times = tuple(float(s) for s in self.times)
        object.__setattr__(self, "times", times)
        if self.window_end < 0:
            raise InvalidArgumentError("window end must be non-negative")
        bounds = (0.0,) + times
        if any(b <= a for a, b in zip(bounds, bounds[1:])) or (times and times[-1] >= self.window_end):
            raise InvalidArgumentError(f"count times {times} must satisfy 0 < t_1 < … < t_m < {self.window_end}")

    @property
    def m(self) -> int:
        return len(self.times)


@dataclass(frozen=True, eq=False)
class DensityPair:
    """Conditional vectors with the √dt density factors removed (units (1/time)^{m/2})."""

    alpha_bar: np.ndarray
    beta_bar: np.ndarray
    m: int


@dataclass(frozen=True)
class CountProbability:
    """Probability of exactly m counts in (0, t] with a quadrature-error estimate."""

    t: float
    m: int
    value: float
    error: float


def _check_time(t: float) -> None:
    if not np.isfinite(t) or t < 0:
        raise InvalidArgumentError(f"time must be non-negative, got {t}")


def _points(points: Optional[int], default: int) -> int:
    n = pick(points, default)
    if n < 2:
        raise InvalidArgumentError("quadrature needs at least two intervals")
    return n + (n % 2)


def segment_operator(
    gen: NonHermitianGenerator,
    profile: PhotonProfile,
    coupling: np.ndarray,
    a: float,
    b: float,
    points: Optional[int] = None,
) -> np.ndarray:
    """I(a, b) by Simpson's rule on ``points`` intervals (each with its midpoint)."""
    d = gen.dim
    if b <= a:
        return np.zeros((d, d), dtype=complex)
    m = _points(points, get_config().quadrature.points_single)
    h = (b - a) / m
    half = expm(-0.5j * h * gen.g)
    powers = [np.eye(d, dtype=complex)]
    for _ in range(2 * m):
        powers.append(half @ powers[-1])
    xi = profile.xi(a + 0.5 * h * np.arange(2 * m + 1))
    l_dag = dag(coupling)
    weights = np.ones(2 * m + 1)
    weights[1::2] = 4.0
    weights[2:-1:2] = 2.0
    total = np.zeros((d, d), dtype=complex)
    for k in range(2 * m + 1):
        total += weights[k] * xi[k] * (powers[2 * m - k] @ l_dag @ powers[k])
    return (h / 6.0) * total


def _coarse(n: int) -> int:
    half = max(n // 2, 2)
    return half + (half % 2)


def pure_components(model: SystemModel) -> Iterator[Tuple[float, np.ndarray]]:
    """(weight, ψ) pairs decomposing the initial state."""
    if model.is_pure:
        yield 1.0, model.psi
        return
    values, vectors = np.linalg.eigh(model.rho0)
    for w, v in zip(values, vectors.T):
        if w > 1e-14:
            yield float(w), v


def _psi(model: SystemModel, psi: Optional[np.ndarray]) -> np.ndarray:
    return np.asarray(psi, dtype=complex) if psi is not None else model.psi


def no_count_pair(
    model: SystemModel,
    profile: PhotonProfile,
    t: float,
    points: Optional[int] = None,
    psi: Optional[np.ndarray] = None,
) -> DensityPair:
    """α̅ = T_t ψ, β̅ = −I(0, t) ψ."""
    _check_time(t)
    gen = make_generator(model)
    psi = _psi(model, psi)
    alpha = gen.propagator(t) @ psi
    beta = -segment_operator(gen, profile, model.coupling, 0.0, t, points) @ psi
    return DensityPair(alpha_bar=alpha, beta_bar=beta, m=0)


def one_count_pair(
    model: SystemModel,
    profile: PhotonProfile,
    t: float,
    t1: float,
    points: Optional[int] = None,
    psi: Optional[np.ndarray] = None,
) -> DensityPair:
    """Conditional vectors for a single count at 0 < t1 < t."""
    CountRecord((t1,), t)
    gen = make_generator(model)
    psi = _psi(model, psi)
    l_op = model.coupling
    tp = gen.propagator
    seg = lambda a, b: segment_operator(gen, profile, l_op, a, b, points)  # noqa: E731

    emitted = l_op @ tp(t1) @ psi
    alpha = tp(t - t1) @ emitted
    beta = (profile.xi(t1) * (tp(t) @ psi)
            - tp(t - t1) @ l_op @ seg(0.0, t1) @ psi
            - seg(t1, t) @ emitted)
    return DensityPair(alpha_bar=alpha, beta_bar=beta, m=1)


def two_count_pair(
    model: SystemModel,
    profile: PhotonProfile,
    t: float,
    t1: float,
    t2: float,
    points: Optional[int] = None,
    psi: Optional[np.ndarray] = None,
) -> DensityPair:
    """Conditional vectors for counts at 0 < t1 < t2 < t."""
    CountRecord((t1, t2), t)
    gen = make_generator(model)
    psi = _psi(model, psi)
    l_op = model.coupling
    tp = gen.propagator
    seg = lambda a, b: segment_operator(gen, profile, l_op, a, b, points)  # noqa: E731

    first = l_op @ tp(t1) @ psi
    second = l_op @ tp(t2 - t1) @ first
    alpha = tp(t - t2) @ second
    beta = (profile.xi(t1) * (tp(t - t2) @ l_op @ tp(t2) @ psi)
            + profile.xi(t2) * (tp(t - t1) @ first)
            - tp(t - t2) @ l_op @ tp(t2 - t1) @ l_op @ seg(0.0, t1) @ psi
            - tp(t - t2) @ l_op @ seg(t1, t2) @ first
            - seg(t2, t) @ second)
    return DensityPair(alpha_bar=alpha, beta_bar=beta, m=2)


def _pair_for(model: SystemModel, profile: PhotonProfile, record: CountRecord,
              points: Optional[int], psi: np.ndarray) -> DensityPair:
    t = record.window_end
    if record.m == 0:
        return no_count_pair(model, profile, t, points, psi)
    if record.m == 1:
        return one_count_pair(model, profile, t, record.times[0], points, psi)
    if record.m == 2:
        return two_count_pair(model, profile, t, record.times[0], record.times[1], points, psi)
    raise UnsupportedCountError(f"exclusive densities are available for at most {MAX_COUNTS} counts, got {record.m}")


def exclusive_density_split(
    model: SystemModel, profile: PhotonProfile, record: CountRecord, points: Optional[int] = None
) -> Tuple[float, float]:
    """(photon-still-in-the-future term ‖α̅‖² tail(t), photon-consumed term ‖β̅‖²)."""
    if record.m > MAX_COUNTS:
        raise UnsupportedCountError(f"exclusive densities are available for at most {MAX_COUNTS} counts")
    tail = float(profile.tail(record.window_end))
    future = consumed = 0.0
    for weight, psi in pure_components(model):
        pair = _pair_for(model, profile, record, points, psi)
        future += weight * tail * float(np.vdot(pair.alpha_bar, pair.alpha_bar).real)
        consumed += weight * float(np.vdot(pair.beta_bar, pair.beta_bar).real)
    return future, consumed


def exclusive_density(
    model: SystemModel, profile: PhotonProfile, record: CountRecord, points: Optional[int] = None
) -> float:
    """Density of counts exactly at the record times and nowhere else in (0, t].

    For m = 0 this is the probability of no counts.

    Raises:
        UnsupportedCountError: If the record holds more than two counts
    """
    return sum(exclusive_density_split(model, profile, record, points))


def prob_no_counts(
    model: SystemModel, profile: PhotonProfile, t: float, points: Optional[int] = None
) -> float:
    """P_0^t(0) = ‖α̅‖² tail(t) + ‖β̅‖²."""
    _check_time(t)
    return exclusive_density(model, profile, CountRecord((), t), points)


class PropagatorGrid:
    """T_s on the half-step grid s = k·h/2 of [0, t], built by repeated multiplication."""

    def __init__(self, model: SystemModel, profile: PhotonProfile, t: float, intervals: int):
        self.t = t
        self.n = intervals
        self.h = t / intervals
        gen = make_generator(model)
        half = expm(-0.5j * self.h * gen.g)
        powers = np.empty((2 * intervals + 1, gen.dim, gen.dim), dtype=complex)
        powers[0] = np.eye(gen.dim)
        for k in range(1, 2 * intervals + 1):
            powers[k] = half @ powers[k - 1]
        self.powers = powers
        self.nodes = self.h * np.arange(intervals + 1)
        self.xi_half = np.asarray(profile.xi(0.5 * self.h * np.arange(2 * intervals + 1)), dtype=complex)
        self.xi_nodes = self.xi_half[::2]
        self.l_op = model.coupling
        l_dag = dag(model.coupling)
        p1, p2 = powers[1], powers[2]
        xi = self.xi_half
        # I(t_i, t_{i+1}) for every grid interval
        self.steps = (self.h / 6.0) * (
            xi[0:-1:2, None, None] * (p2 @ l_dag)
            + 4.0 * xi[1::2, None, None] * (p1 @ l_dag @ p1)
            + xi[2::2, None, None] * (l_dag @ p2)
        )

    def T(self, k: int) -> np.ndarray:
        """T at k full steps."""
        return self.powers[2 * k]


def _apply(mat: np.ndarray, vecs: np.ndarray) -> np.ndarray:
    """Apply one matrix to a stack of row vectors."""
    return vecs @ mat.T


@dataclass
class _SingleScan:
    grid: PropagatorGrid
    psi_t: np.ndarray
    forward: np.ndarray
    backward: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray


def _single_scan(grid: PropagatorGrid, psi: np.ndarray) -> _SingleScan:
    """Conditional vectors for one count at every grid node."""
    n = grid.n
    d = psi.shape[0]
    l_op = grid.l_op
    psi_t = np.empty((n + 1, d), dtype=complex)
    for i in range(n + 1):
        psi_t[i] = grid.T(i) @ psi

    # forward[i] = I(0, t_i) ψ
    forward = np.zeros((n + 1, d), dtype=complex)
    for i in range(n):
        forward[i + 1] = grid.T(1) @ forward[i] + grid.steps[i] @ psi_t[i]

    # backward[i] = I(t_i, t)
    backward = np.zeros((n + 1, d, d), dtype=complex)
    for i in range(n - 1, -1, -1):
        backward[i] = backward[i + 1] @ grid.T(1) + grid.T(n - i - 1) @ grid.steps[i]

    emitted = _apply(l_op, psi_t)
    alpha = np.empty((n + 1, d), dtype=complex)
    beta = np.empty((n + 1, d), dtype=complex)
    for i in range(n + 1):
        after = grid.T(n - i)
        alpha[i] = after @ emitted[i]
        beta[i] = (grid.xi_nodes[i] * psi_t[n] - after @ l_op @ forward[i]
                   - backward[i] @ emitted[i])
    return _SingleScan(grid, psi_t, forward, backward, alpha, beta)


def _norms(v: np.ndarray) -> np.ndarray:
    return np.sum(np.abs(v) ** 2, axis=-1)


def single_count_scan(
    model: SystemModel, profile: PhotonProfile, t: float, points: Optional[int] = None
) -> Tuple[np.ndarray, np.ndarray]:
    """Grid t1 ∈ [0, t] and the one-count exclusive density p_0^t(t1) on it."""
    _check_time(t)
    n = _points(points, get_config().quadrature.points_single)
    nodes = np.linspace(0.0, t, n + 1)
    if t == 0:
        return nodes, np.zeros_like(nodes)
    grid = PropagatorGrid(model, profile, t, n)
    tail = float(profile.tail(t))
    density = np.zeros(n + 1)
    for weight, psi in pure_components(model):
        scan = _single_scan(grid, psi)
        density += weight * (tail * _norms(scan.alpha) + _norms(scan.beta))
    return grid.nodes, density


def _double_density(grid: PropagatorGrid, psi: np.ndarray, tail: float) -> np.ndarray:
    """D[i, j] = p_0^t(t_i, t_j) for i ≤ j (zero below the diagonal)."""
    scan = _single_scan(grid, psi)
    n = grid.n
    d = psi.shape[0]
    l_op = grid.l_op
    step = grid.T(1)
    emitted = _apply(l_op, scan.psi_t)            # L T_{t1} ψ
    absorbed = _apply(l_op, scan.forward)         # L I(0, t1) ψ

    u = np.zeros((n + 1, d), dtype=complex)       # T_{t2−t1} L T_{t1} ψ
    w = np.zeros((n + 1, d), dtype=complex)       # T_{t2−t1} L I(0, t1) ψ
    mid = np.zeros((n + 1, d), dtype=complex)     # I(t1, t2) L T_{t1} ψ
    density = np.zeros((n + 1, n + 1))
    for j in range(n + 1):
        if j > 0:
            mid[:j] = _apply(step, mid[:j]) + _apply(grid.steps[j - 1], u[:j])
            u[:j] = _apply(step, u[:j])
            w[:j] = _apply(step, w[:j])
        u[j] = emitted[j]
        w[j] = absorbed[j]
        mid[j] = 0.0

        after = grid.T(n - j) @ l_op
        rows = slice(0, j + 1)
        alpha = _apply(after, u[rows])
        direct_first = grid.xi_nodes[rows, None] * (after @ scan.psi_t[j])[None, :]
        direct_second = grid.xi_nodes[j] * scan.alpha[rows]
        beta = (direct_first + direct_second
                - _apply(after, w[rows])
                - _apply(after, mid[rows])
                - _apply(scan.backward[j] @ l_op, u[rows]))
        density[rows, j] = tail * _norms(alpha) + _norms(beta)
    return density


def _simplex_integral(nodes: np.ndarray, density: np.ndarray) -> float:
    n = nodes.size - 1
    inner = np.zeros(n + 1)
    for i in range(n + 1):
        count = n + 1 - i
        if count >= 3:
            inner[i] = integrate.simpson(density[i, i:], x=nodes[i:])
        elif count == 2:
            inner[i] = integrate.trapezoid(density[i, i:], x=nodes[i:])
    return float(integrate.simpson(inner, x=nodes))


def _prob_one(model: SystemModel, profile: PhotonProfile, t: float, n: int) -> float:
    nodes, density = single_count_scan(model, profile, t, n)
    return float(integrate.simpson(density, x=nodes))


def _prob_two(model: SystemModel, profile: PhotonProfile, t: float, n: int) -> float:
    grid = PropagatorGrid(model, profile, t, n)
    tail = float(profile.tail(t))
    total = 0.0
    for weight, psi in pure_components(model):
        total += weight * _simplex_integral(grid.nodes, _double_density(grid, psi, tail))
    return total


def prob_m_counts(
    model: SystemModel, profile: PhotonProfile, t: float, m: int, points: Optional[int] = None
) -> CountProbability:
    """Probability of exactly m ≤ 2 counts in (0, t].

    The error estimate compares the result with the same computation on half
    the grid: |P_n − P_{n/2}| / 15.

    Raises:
        UnsupportedCountError: If m > 2
    """
    _check_time(t)
    if m < 0:
        raise InvalidArgumentError("count number must be non-negative")
    if m > MAX_COUNTS:
        raise UnsupportedCountError(f"count probabilities are available for at most {MAX_COUNTS} counts, got {m}")
    quad = get_config().quadrature
    if m == 0:
        n = _points(points, quad.points_single)
        value = prob_no_counts(model, profile, t, n)
        coarse = prob_no_counts(model, profile, t, _coarse(n))
    elif t == 0:
        return CountProbability(t=t, m=m, value=0.0, error=0.0)
    elif m == 1:
        n = _points(points, quad.points_single)
        value = _prob_one(model, profile, t, n)
        coarse = _prob_one(model, profile, t, _coarse(n))
    else:
        n = _points(points, quad.points_double)
        value = _prob_two(model, profile, t, n)
        coarse = _prob_two(model, profile, t, _coarse(n))
    error = abs(value - coarse) / 15.0
    logger.debug(f"P_{m}({t:g}) = {value:.12g} ± {error:.2e} on {n} intervals")
    return CountProbability(t=t, m=m, value=value, error=error)


def count_table(
    model: SystemModel,
    profile: PhotonProfile,
    times: Sequence[float],
    max_counts: int = MAX_COUNTS,
    points_single: Optional[int] = None,
    points_double: Optional[int] = None,
) -> List[dict]:
    """Rows {t, P0, P1, P2, quadrature_error, normalization_residual} over a time grid."""
    rows = []
    for t in times:
        row = {"t": float(t)}
        errors = []
        total = 0.0
        for m in range(max_counts + 1):
            pts = points_double if m == 2 else points_single
            result = prob_m_counts(model, profile, float(t), m, pts)
            row[f"P{m}"] = result.value
            errors.append(result.error)
            total += result.value
        row["quadrature_error"] = float(sum(errors))
        row["normalization_residual"] = abs(1.0 - total)
        rows.append(row)
    return rows
