"""Continuous-time filters over the hierarchy (ρ̃, ρ̃01, ρ̃00).

ρ̃01 is the |α̃⟩⟨β̃| sector and ρ̃00 the |α̃⟩⟨α̃| sector of the conditional
state; ρ̃10 is always taken as the conjugate transpose of ρ̃01. Every kernel
accepts arrays with leading batch axes so that Monte Carlo batches advance
all trajectories of a chunk at once.
"""

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, List, Optional, Tuple, Union

import numpy as np

from .config import get_config
from .errors import (
    AccuracyError,
    ForbiddenJumpError,
    InvalidArgumentError,
    ModelInconsistencyError,
    StepSizeError,
)
from .models import SystemModel
from .profiles import PhotonProfile
from .utils import dag, hermitize, pick, trace, trajectory_rng


logger = logging.getLogger(__name__)

ProgressCallback = Callable[[str, int, int], None]


class UnravelingKind(str, Enum):
    """Continuous measurement scheme."""
    JUMP = "jump"
    DIFFUSIVE = "diffusive"


@dataclass(frozen=True, eq=False)
class Hierarchy:
    """Coupled sectors (ρ̃, ρ̃01, ρ̃00); arrays may carry leading batch axes."""

    rho: np.ndarray
    rho01: np.ndarray
    rho00: np.ndarray

    @classmethod
    def initial(cls, model: SystemModel, batch: Optional[int] = None) -> "Hierarchy":
        rho0 = model.rho0
        if batch is not None:
            rho0 = np.broadcast_to(rho0, (batch,) + rho0.shape).copy()
        return cls(rho=rho0.copy(), rho01=np.zeros_like(rho0), rho00=rho0.copy())

    @property
    def rho10(self) -> np.ndarray:
        return dag(self.rho01)

    def trace(self) -> np.ndarray:
        """Tr ρ̃ (real part), one value per batch entry."""
        return trace(self.rho).real

    def axpy(self, c: Union[float, np.ndarray], other: "Hierarchy") -> "Hierarchy":
        """self + c · other."""
        c = _as_batch(c)
        return Hierarchy(self.rho + c * other.rho, self.rho01 + c * other.rho01, self.rho00 + c * other.rho00)

    def scaled(self, c: Union[float, np.ndarray]) -> "Hierarchy":
        c = _as_batch(c)
        return Hierarchy(c * self.rho, c * self.rho01, c * self.rho00)

    def symmetrized(self) -> "Hierarchy":
        return replace(self, rho=hermitize(self.rho), rho00=hermitize(self.rho00))

    def select(self, mask: np.ndarray) -> "Hierarchy":
        return Hierarchy(self.rho[mask], self.rho01[mask], self.rho00[mask])

    def merge(self, mask: np.ndarray, other: "Hierarchy") -> "Hierarchy":
        """Replace the masked batch entries by ``other`` (which holds only those entries)."""
        rho, rho01, rho00 = self.rho.copy(), self.rho01.copy(), self.rho00.copy()
        rho[mask], rho01[mask], rho00[mask] = other.rho, other.rho01, other.rho00
        return Hierarchy(rho, rho01, rho00)


def _as_batch(c: Union[float, complex, np.ndarray]) -> Union[float, complex, np.ndarray]:
    if np.ndim(c):
        return np.asarray(c)[..., None, None]
    return c


def lindblad(model: SystemModel, m: np.ndarray) -> np.ndarray:
    """−i[H, M] − ½{L†L, M} + L M L†."""
    h, l_op = model.hamiltonian, model.coupling
    ldl = dag(l_op) @ l_op
    return -1j * (h @ m - m @ h) - 0.5 * (ldl @ m + m @ ldl) + l_op @ m @ dag(l_op)


def master_derivative(h: Hierarchy, xi_t: complex, model: SystemModel) -> Hierarchy:
    """Right-hand side of the a priori hierarchy.

    ρ̇   = 𝓛ρ + [ρ01, L†] ξ + [L, ρ10] ξ*
    ρ̇01 = 𝓛ρ01 + [L, ρ00] ξ*
    ρ̇00 = 𝓛ρ00
    """
    l_op, l_dag = model.coupling, dag(model.coupling)
    xi = _as_batch(xi_t)
    xc = np.conj(xi)
    rho10 = h.rho10
    d_rho = (lindblad(model, h.rho) + xi * (h.rho01 @ l_dag - l_dag @ h.rho01)
             + xc * (l_op @ rho10 - rho10 @ l_op))
    d_rho01 = lindblad(model, h.rho01) + xc * (l_op @ h.rho00 - h.rho00 @ l_op)
    return Hierarchy(d_rho, d_rho01, lindblad(model, h.rho00))


def _jump_terms(h: Hierarchy, xi_t, model: SystemModel) -> Hierarchy:
    """Unnormalized post-jump sectors (J_ρ, J_01, J_00)."""
    l_op, l_dag = model.coupling, dag(model.coupling)
    xi = _as_batch(xi_t)
    xc = np.conj(xi)
    l_rho00 = l_op @ h.rho00
    j_rho = (l_op @ h.rho @ l_dag + xc * (l_op @ h.rho10) + xi * (h.rho01 @ l_dag)
             + (np.abs(xi) ** 2) * h.rho00)
    j_01 = l_op @ h.rho01 @ l_dag + xc * l_rho00
    j_00 = l_rho00 @ l_dag
    return Hierarchy(j_rho, j_01, j_00)


def _raw_intensity(h: Hierarchy, xi_t, model: SystemModel) -> np.ndarray:
    return trace(_jump_terms(h, xi_t, model).rho)


def jump_intensity(
    h: Hierarchy,
    xi_t,
    model: SystemModel,
    clamp: Optional[float] = None,
    error_below: Optional[float] = None,
):
    """k_t = Tr(L†Lρ̃ + Lρ̃10 ξ* + ρ̃01 L† ξ + ρ̃00 |ξ|²).

    Values in [−clamp, 0) are set to zero.

    Raises:
        ModelInconsistencyError: If k_t < −error_below
    """
    numerics = get_config().numerics
    clamp = pick(clamp, numerics.intensity_clamp)
    error_below = pick(error_below, numerics.intensity_error)
    k = _raw_intensity(h, xi_t, model).real
    if np.any(k < -error_below):
        raise ModelInconsistencyError(
            f"jump intensity {float(np.min(k)):.3e} is strongly negative", residual=float(np.min(k))
        )
    if np.any(k < -clamp):
        logger.warning(f"Jump intensity {float(np.min(k)):.3e} below zero; clamping")
    k = np.where(k < 0, 0.0, k)
    return float(k) if np.ndim(k) == 0 else k


def jump_update(h: Hierarchy, xi_t, model: SystemModel, threshold: Optional[float] = None) -> Hierarchy:
    """State right after a count; Tr ρ̃ = 1 by construction.

    Raises:
        ForbiddenJumpError: If k_t is at or below the jump threshold
    """
    threshold = pick(threshold, get_config().numerics.jump_threshold)
    terms = _jump_terms(h, xi_t, model)
    k = trace(terms.rho).real
    if np.any(k <= threshold):
        raise ForbiddenJumpError(f"jump requested with intensity {float(np.min(k)):.3e}")
    return terms.scaled(1.0 / k).symmetrized()


def _renormalized(h: Hierarchy) -> Hierarchy:
    return h.scaled(1.0 / h.trace())


def no_jump_step(
    h: Hierarchy,
    xi_t,
    dt: float,
    model: SystemModel,
    renormalize: bool = False,
    guard: Optional[float] = None,
) -> Hierarchy:
    """First-order step of the filter when no count is registered.

    Each sector moves by dt·(a priori derivative − (J − k_t·sector)).

    Raises:
        StepSizeError: If k_t·dt reaches the step guard
    """
    guard = pick(guard, get_config().numerics.step_guard)
    k = jump_intensity(h, xi_t, model)
    if np.any(np.asarray(k) * dt >= guard):
        raise StepSizeError(f"k_t*dt = {float(np.max(np.asarray(k)) * dt):.3g} exceeds the guard {guard:g}")
    deriv = master_derivative(h, xi_t, model)
    comp = _jump_terms(h, xi_t, model).axpy(-np.asarray(k) if np.ndim(k) else -k, h)
    out = h.axpy(dt, deriv).axpy(-dt, comp)
    return _renormalized(out) if renormalize else out


def homodyne_rate(h: Hierarchy, xi_t, model: SystemModel):
    """r_t = Tr(Lρ̃ + ρ̃L† + ρ̃10 ξ* + ρ̃01 ξ)."""
    l_op = model.coupling
    xi = _as_batch(xi_t)
    r = trace(l_op @ h.rho + h.rho @ dag(l_op) + np.conj(xi) * h.rho10 + xi * h.rho01).real
    return float(r) if np.ndim(r) == 0 else r


def diffusion_coefficients(h: Hierarchy, xi_t, model: SystemModel) -> Hierarchy:
    """Noise terms multiplying dw for each sector."""
    l_op, l_dag = model.coupling, dag(model.coupling)
    xi = _as_batch(xi_t)
    xc = np.conj(xi)
    r = _as_batch(homodyne_rate(h, xi_t, model))
    g_rho = l_op @ h.rho + h.rho @ l_dag + xi * h.rho01 + xc * h.rho10 - r * h.rho
    g_01 = l_op @ h.rho01 + h.rho01 @ l_dag + xc * h.rho00 - r * h.rho01
    g_00 = l_op @ h.rho00 + h.rho00 @ l_dag - r * h.rho00
    return Hierarchy(g_rho, g_01, g_00)


def diffusive_step(
    h: Hierarchy, xi_t, dt: float, dw, model: SystemModel, renormalize: bool = False
) -> Hierarchy:
    """Euler–Maruyama step with drift = a priori derivative and Hermitian symmetrization."""
    if dt <= 0:
        raise InvalidArgumentError(f"dt must be positive, got {dt}")
    out = h.axpy(dt, master_derivative(h, xi_t, model)).axpy(dw, diffusion_coefficients(h, xi_t, model))
    out = out.symmetrized()
    return _renormalized(out) if renormalize else out


def _grid(t_end: float, dt: float) -> np.ndarray:
    if not dt > 0:
        raise InvalidArgumentError(f"dt must be positive, got {dt}")
    if not t_end >= 0:
        raise InvalidArgumentError(f"t_end must be non-negative, got {t_end}")
    n = int(math.ceil(t_end / dt - 1e-9))
    return dt * np.arange(n + 1)


@dataclass
class MasterPath:
    """A priori hierarchy on a uniform time grid."""

    times: np.ndarray
    rho: np.ndarray
    rho01: np.ndarray
    rho00: np.ndarray
    max_trace_drift: float = 0.0

    def at(self, i: int) -> Hierarchy:
        return Hierarchy(self.rho[i], self.rho01[i], self.rho00[i])

    def index_of(self, t: float) -> int:
        return int(np.argmin(np.abs(self.times - t)))


def integrate_master(
    model: SystemModel,
    profile: PhotonProfile,
    t_end: float,
    dt: float,
    drift_limit: Optional[float] = None,
) -> MasterPath:
    """Classic fixed-step RK4 for the a priori hierarchy.

    Raises:
        AccuracyError: If |Tr ρ − 1| exceeds the drift limit anywhere on the grid
    """
    drift_limit = pick(drift_limit, get_config().numerics.trace_drift_limit)
    times = _grid(t_end, dt)
    d = model.dim
    rho = np.zeros((times.size, d, d), dtype=complex)
    rho01 = np.zeros_like(rho)
    rho00 = np.zeros_like(rho)

    h = Hierarchy.initial(model)
    rho[0], rho01[0], rho00[0] = h.rho, h.rho01, h.rho00
    max_drift = 0.0
    start = time.time()
    for i in range(times.size - 1):
        t = times[i]
        xi0, xim, xi1 = profile.xi(t), profile.xi(t + 0.5 * dt), profile.xi(t + dt)
        k1 = master_derivative(h, xi0, model)
        k2 = master_derivative(h.axpy(0.5 * dt, k1), xim, model)
        k3 = master_derivative(h.axpy(0.5 * dt, k2), xim, model)
        k4 = master_derivative(h.axpy(dt, k3), xi1, model)
        h = h.axpy(dt / 6.0, k1).axpy(dt / 3.0, k2).axpy(dt / 3.0, k3).axpy(dt / 6.0, k4)
        drift = abs(float(h.trace()) - 1.0)
        max_drift = max(max_drift, drift)
        if drift > drift_limit:
            raise AccuracyError(
                f"trace drift {drift:.3e} at t={times[i + 1]:g} exceeds {drift_limit:.1e}; reduce dt={dt:g}",
                residual=drift,
            )
        rho[i + 1], rho01[i + 1], rho00[i + 1] = h.rho, h.rho01, h.rho00

    logger.info(f"Integrated a priori hierarchy to t={times[-1]:g} in {time.time() - start:.2f}s "
                f"(max trace drift {max_drift:.2e})")
    return MasterPath(times=times, rho=rho, rho01=rho01, rho00=rho00, max_trace_drift=max_drift)


@dataclass
class JumpPath:
    """One counting trajectory of the continuous filter."""

    times: np.ndarray
    rho: np.ndarray
    rho01: np.ndarray
    rho00: np.ndarray
    intensities: np.ndarray
    counts: np.ndarray
    jump_times: np.ndarray
    seed: int
    index: int = 0

    def at(self, i: int) -> Hierarchy:
        return Hierarchy(self.rho[i], self.rho01[i], self.rho00[i])


@dataclass
class DiffusivePath:
    """One homodyne trajectory of the continuous filter."""

    times: np.ndarray
    rho: np.ndarray
    rho01: np.ndarray
    rho00: np.ndarray
    rates: np.ndarray
    dw: np.ndarray
    min_eigenvalues: np.ndarray
    seed: int
    index: int = 0

    @property
    def wiener(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum(self.dw)])

    def at(self, i: int) -> Hierarchy:
        return Hierarchy(self.rho[i], self.rho01[i], self.rho00[i])


SaveSink = Callable[[int, Hierarchy], None]

SECTORS = ("rho", "rho01", "rho00")


class _Moments:
    """Running sums for mean and standard error of the hierarchy at the saved times."""

    def __init__(self, n_saved: int, dim: int) -> None:
        shape = (n_saved, dim, dim)
        self.n = 0
        self.s1 = [np.zeros(shape, dtype=complex) for _ in SECTORS]
        self.s2_re = [np.zeros(shape) for _ in SECTORS]
        self.s2_im = [np.zeros(shape) for _ in SECTORS]

    def record(self, slot: int, h: Hierarchy) -> None:
        for k, name in enumerate(SECTORS):
            x = getattr(h, name)
            self.s1[k][slot] += x.sum(axis=0)
            self.s2_re[k][slot] += (x.real ** 2).sum(axis=0)
            self.s2_im[k][slot] += (x.imag ** 2).sum(axis=0)

    def merge(self, other: "_Moments") -> None:
        for k in range(len(SECTORS)):
            self.s1[k] += other.s1[k]
            self.s2_re[k] += other.s2_re[k]
            self.s2_im[k] += other.s2_im[k]
        self.n += other.n

    def summary(self) -> Tuple[Hierarchy, Hierarchy, Hierarchy]:
        n = self.n
        mean = [s / n for s in self.s1]
        if n > 1:
            se_re = [np.sqrt(np.maximum(s2 / n - m.real ** 2, 0.0) / (n - 1)) for s2, m in zip(self.s2_re, mean)]
            se_im = [np.sqrt(np.maximum(s2 / n - m.imag ** 2, 0.0) / (n - 1)) for s2, m in zip(self.s2_im, mean)]
        else:
            se_re = [np.zeros(m.shape) for m in mean]
            se_im = [np.zeros(m.shape) for m in mean]
        return Hierarchy(*mean), Hierarchy(*se_re), Hierarchy(*se_im)


@dataclass
class _BatchResult:
    """Per-chunk output of the batched kernel."""

    rates: np.ndarray
    noise: np.ndarray
    counts: np.ndarray
    final_counts: np.ndarray
    jump_times: List[List[float]]
    min_eigenvalues: np.ndarray


def _random_draws(kind: UnravelingKind, seed: int, indices: range, n_steps: int, dt: float) -> np.ndarray:
    draws = np.empty((len(indices), n_steps))
    for row, i in enumerate(indices):
        rng = trajectory_rng(seed, i)
        if kind is UnravelingKind.JUMP:
            draws[row] = rng.random(n_steps)
        else:
            draws[row] = rng.normal(0.0, math.sqrt(dt), n_steps)
    return draws


def _run_batch(
    kind: UnravelingKind,
    model: SystemModel,
    profile: PhotonProfile,
    times: np.ndarray,
    dt: float,
    seed: int,
    indices: range,
    save_every: int,
    renormalize: bool,
    sink: SaveSink,
    keep_paths: bool = True,
) -> _BatchResult:
    """Advance all trajectories of ``indices`` together; saved states go to ``sink(slot, h)``."""
    n_steps = times.size - 1
    n = len(indices)
    draws = _random_draws(kind, seed, indices, n_steps, dt)
    threshold = get_config().numerics.jump_threshold

    h = Hierarchy.initial(model, batch=n)
    sink(0, h)
    slot = 1
    rates = np.zeros((n, n_steps if keep_paths else 0))
    counts = np.zeros((n, n_steps + 1 if keep_paths else 0), dtype=int)
    running = np.zeros(n, dtype=int)
    jump_times: List[List[float]] = [[] for _ in range(n)]
    min_eigs = [np.linalg.eigvalsh(hermitize(h.rho))[:, 0]]

    for i in range(n_steps):
        t = times[i]
        xi = profile.xi(t)
        if kind is UnravelingKind.JUMP:
            rate = np.atleast_1d(jump_intensity(h, xi, model))
            jumps = (draws[:, i] < rate * dt) & (rate > threshold)
            nxt = no_jump_step(h, xi, dt, model, renormalize=renormalize)
            if np.any(jumps):
                nxt = nxt.merge(jumps, jump_update(h.select(jumps), xi, model))
                running = running + jumps
                for row in np.flatnonzero(jumps):
                    jump_times[row].append(float(times[i + 1]))
            h = nxt
        else:
            rate = np.atleast_1d(homodyne_rate(h, xi, model))
            h = diffusive_step(h, xi, dt, draws[:, i], model, renormalize=renormalize)
        if keep_paths:
            rates[:, i] = rate
            counts[:, i + 1] = running
        if (i + 1) % save_every == 0 or i + 1 == n_steps:
            sink(slot, h)
            slot += 1
            if kind is UnravelingKind.DIFFUSIVE:
                min_eigs.append(np.linalg.eigvalsh(hermitize(h.rho))[:, 0])

    return _BatchResult(
        rates=rates,
        noise=draws if kind is UnravelingKind.DIFFUSIVE and keep_paths else np.zeros((n, 0)),
        counts=counts,
        final_counts=running,
        jump_times=jump_times,
        min_eigenvalues=np.stack(min_eigs, axis=1),
    )


def _saved_indices(n_steps: int, save_every: int) -> np.ndarray:
    idx = list(range(0, n_steps + 1, save_every))
    if idx[-1] != n_steps:
        idx.append(n_steps)
    return np.asarray(idx)


def _single_path(
    kind: UnravelingKind,
    model: SystemModel,
    profile: PhotonProfile,
    t_end: float,
    dt: float,
    seed: int,
    index: int,
    renormalize: Optional[bool],
) -> Tuple[np.ndarray, List[Hierarchy], _BatchResult]:
    renormalize = pick(renormalize, get_config().simulation.renormalize)
    times = _grid(t_end, dt)
    saved: List[Hierarchy] = []
    res = _run_batch(kind, model, profile, times, dt, seed, range(index, index + 1), 1,
                     renormalize, sink=lambda slot, h: saved.append(h))
    return times, saved, res


def _stack(saved: List[Hierarchy], name: str) -> np.ndarray:
    return np.stack([getattr(s, name)[0] for s in saved])


def simulate_jump_trajectory(
    model: SystemModel,
    profile: PhotonProfile,
    t_end: float,
    dt: float,
    seed: int,
    index: int = 0,
    renormalize: Optional[bool] = None,
) -> JumpPath:
    """Counting trajectory with Bernoulli(k_t dt) jumps per step; deterministic for fixed seed."""
    times, saved, res = _single_path(UnravelingKind.JUMP, model, profile, t_end, dt, seed, index, renormalize)
    return JumpPath(
        times=times,
        rho=_stack(saved, "rho"),
        rho01=_stack(saved, "rho01"),
        rho00=_stack(saved, "rho00"),
        intensities=res.rates[0],
        counts=res.counts[0],
        jump_times=np.asarray(res.jump_times[0]),
        seed=seed,
        index=index,
    )


def simulate_diffusive_trajectory(
    model: SystemModel,
    profile: PhotonProfile,
    t_end: float,
    dt: float,
    seed: int,
    index: int = 0,
    renormalize: Optional[bool] = None,
) -> DiffusivePath:
    """Homodyne trajectory driven by Gaussian increments dw ~ N(0, dt)."""
    times, saved, res = _single_path(UnravelingKind.DIFFUSIVE, model, profile, t_end, dt, seed, index, renormalize)
    return DiffusivePath(
        times=times,
        rho=_stack(saved, "rho"),
        rho01=_stack(saved, "rho01"),
        rho00=_stack(saved, "rho00"),
        rates=res.rates[0],
        dw=res.noise[0],
        min_eigenvalues=res.min_eigenvalues[0],
        seed=seed,
        index=index,
    )


@dataclass
class MonteCarloSummary:
    """Trajectory averages with standard errors at the saved times."""

    kind: UnravelingKind
    times: np.ndarray
    n_trajectories: int
    base_seed: int
    mean: Hierarchy
    stderr_real: Hierarchy
    stderr_imag: Hierarchy
    total_counts: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    first_jump_times: np.ndarray = field(default_factory=lambda: np.zeros(0))
    min_eigenvalue: float = float("nan")
    wall_time: float = 0.0

    def index_of(self, t: float) -> int:
        return int(np.argmin(np.abs(self.times - t)))


def monte_carlo_average(
    kind: Union[str, UnravelingKind],
    model: SystemModel,
    profile: PhotonProfile,
    t_end: float,
    dt: float,
    n_trajectories: int,
    base_seed: int,
    save_every: int = 1,
    threads: Optional[int] = None,
    batch_size: Optional[int] = None,
    renormalize: Optional[bool] = None,
    progress_callback: Optional[ProgressCallback] = None,
) -> MonteCarloSummary:
    """Average N independent trajectories of one unraveling.

    Trajectory i always uses the stream derived from (base_seed, i). Chunks
    are fixed by ``batch_size`` and combined in chunk order, so results do not
    depend on the thread count.

    Args:
        kind: "jump" or "diffusive"
        save_every: Keep every n-th step of the time grid (the last step is always kept)
        threads: Worker threads (default from settings)
        batch_size: Trajectories per chunk (default from settings)
        progress_callback: Called as (message, done, total) after each chunk
    """
    try:
        kind = UnravelingKind(kind)
    except ValueError:
        raise InvalidArgumentError(f"unknown unraveling '{kind}'") from None
    if n_trajectories < 1:
        raise InvalidArgumentError("at least one trajectory is required")
    if save_every < 1:
        raise InvalidArgumentError("save_every must be positive")
    settings = get_config().simulation
    threads = pick(threads, settings.threads)
    batch_size = pick(batch_size, settings.batch_size)
    renormalize = pick(renormalize, settings.renormalize)

    times = _grid(t_end, dt)
    saved_times = times[_saved_indices(times.size - 1, save_every)]
    chunks = [range(s, min(s + batch_size, n_trajectories)) for s in range(0, n_trajectories, batch_size)]
    logger.info(f"Running {n_trajectories} {kind.value} trajectories in {len(chunks)} chunks "
                f"on {threads} thread(s), dt={dt:g}, t_end={t_end:g}")

    def work(chunk: range) -> Tuple[_Moments, _BatchResult]:
        moments = _Moments(saved_times.size, model.dim)
        moments.n = len(chunk)
        result = _run_batch(kind, model, profile, times, dt, base_seed, chunk, save_every,
                            renormalize, sink=moments.record, keep_paths=False)
        return moments, result

    start = time.time()
    total = _Moments(saved_times.size, model.dim)
    total_counts: List[np.ndarray] = []
    first_jumps: List[float] = []
    min_eig = float("inf")
    with ThreadPoolExecutor(max_workers=threads) as pool:
        for moments, result in pool.map(work, chunks):
            total.merge(moments)
            total_counts.append(result.final_counts)
            first_jumps.extend(jt[0] if jt else float("nan") for jt in result.jump_times)
            min_eig = min(min_eig, float(np.min(result.min_eigenvalues)))
            logger.debug(f"Finished chunk: {total.n}/{n_trajectories} trajectories")
            if progress_callback:
                progress_callback(f"{kind.value} trajectories", total.n, n_trajectories)

    mean, se_re, se_im = total.summary()
    wall = time.time() - start
    logger.info(f"Monte Carlo average finished in {wall:.2f}s")
    return MonteCarloSummary(
        kind=kind,
        times=saved_times,
        n_trajectories=n_trajectories,
        base_seed=base_seed,
        mean=mean,
        stderr_real=se_re,
        stderr_imag=se_im,
        total_counts=np.concatenate(total_counts),
        first_jump_times=np.asarray(first_jumps),
        min_eigenvalue=min_eig if kind is UnravelingKind.DIFFUSIVE else float("nan"),
        wall_time=wall,
    )
