"""Single-photon wave packets and their discretization on the collision grid."""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Literal, Optional, Sequence

import numpy as np
from scipy import integrate
from scipy.stats import norm

from .config import get_config
from .errors import InvalidArgumentError, NormalizationError
from .utils import pick


logger = logging.getLogger(__name__)

Sampling = Literal["cell", "left"]


@dataclass(frozen=True, eq=False)
class PhotonProfile:
    """Photon amplitude ξ_t (units 1/√time) with its tail mass ∫_t^∞ |ξ_s|² ds.

    ``evaluator`` must accept numpy arrays. When ``tail_fn`` is None the tail
    is integrated numerically up to ``support_hint``.
    """

    name: str
    evaluator: Callable[[np.ndarray], np.ndarray]
    support_hint: float
    tail_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None
    params: Dict[str, Any] = field(default_factory=dict)
    breakpoints: Sequence[float] = ()

    @property
    def analytic_tail(self) -> bool:
        return self.tail_fn is not None

    @property
    def is_vacuum(self) -> bool:
        return self.name == "vacuum"

    def xi(self, t):
        """ξ at time(s) t; zero for t < 0."""
        arr = np.asarray(t, dtype=float)
        out = np.where(arr >= 0, np.asarray(self.evaluator(np.maximum(arr, 0.0)), dtype=complex), 0.0)
        return out if arr.ndim else complex(out)

    def density(self, t):
        return np.abs(self.xi(t)) ** 2

    def tail(self, t):
        """∫_t^∞ |ξ_s|² ds."""
        if self.tail_fn is not None:
            arr = np.asarray(t, dtype=float)
            out = np.clip(np.asarray(self.tail_fn(np.maximum(arr, 0.0)), dtype=float), 0.0, None)
            return out if arr.ndim else float(out)
        if np.ndim(t):
            return np.array([self._numeric_tail(float(s)) for s in np.ravel(t)]).reshape(np.shape(t))
        return self._numeric_tail(float(t))

    def _numeric_tail(self, t: float) -> float:
        t = max(t, 0.0)
        if t >= self.support_hint:
            return 0.0
        points = [p for p in self.breakpoints if t < p < self.support_hint] or None
        value, _ = integrate.quad(
            lambda s: float(abs(self.xi(s)) ** 2), t, self.support_hint, points=points, limit=400
        )
        return max(value, 0.0)

    def cell_mass(self, a: float, b: float) -> float:
        """Photon mass in [a, b)."""
        return max(float(self.tail(a)) - float(self.tail(b)), 0.0)

    def check_normalization(self, tol: Optional[float] = None) -> float:
        """Return tail(0), raising if it is not one within tol."""
        tol = pick(tol, get_config().numerics.profile_norm_tol)
        total = float(self.tail(0.0))
        if abs(total - 1.0) > tol:
            raise NormalizationError(
                f"profile '{self.name}' carries mass {total:.9g}, expected 1 within {tol:g}",
                residual=abs(total - 1.0),
            )
        return total


def _support_for(threshold: Optional[float]) -> float:
    return pick(threshold, get_config().numerics.tail_threshold)


def matched_exponential(gamma_p: float, threshold: Optional[float] = None) -> PhotonProfile:
    """ξ_t = √Γp exp(−Γp t / 2)."""
    if gamma_p <= 0:
        raise InvalidArgumentError("gamma_p must be positive")
    root = math.sqrt(gamma_p)
    return PhotonProfile(
        name="matched_exponential",
        evaluator=lambda t: root * np.exp(-0.5 * gamma_p * t),
        tail_fn=lambda t: np.exp(-gamma_p * t),
        support_hint=math.log(1.0 / _support_for(threshold)) / gamma_p,
        params={"gamma_p": gamma_p},
    )


def constant_window(t0: float, t1: float) -> PhotonProfile:
    """Flat wave packet on [t0, t1)."""
    if t0 < 0 or t1 <= t0:
        raise InvalidArgumentError("constant_window needs 0 <= t0 < t1")
    width = t1 - t0
    height = 1.0 / math.sqrt(width)
    return PhotonProfile(
        name="constant_window",
        evaluator=lambda t: np.where((t >= t0) & (t < t1), height, 0.0),
        tail_fn=lambda t: np.clip((t1 - np.maximum(t, t0)) / width, 0.0, 1.0),
        support_hint=t1,
        params={"t0": t0, "t1": t1},
        breakpoints=(t0, t1),
    )


def gaussian(t0: float, sigma: float, threshold: Optional[float] = None) -> PhotonProfile:
    """Gaussian intensity centred at t0, renormalized to [0, ∞)."""
    if sigma <= 0:
        raise InvalidArgumentError("sigma must be positive")
    z = float(norm.sf(0.0, loc=t0, scale=sigma))
    if z <= 0:
        raise InvalidArgumentError("gaussian profile has no mass on t >= 0")
    return PhotonProfile(
        name="gaussian",
        evaluator=lambda t: np.sqrt(norm.pdf(t, loc=t0, scale=sigma) / z),
        tail_fn=lambda t: norm.sf(t, loc=t0, scale=sigma) / z,
        support_hint=t0 + sigma * float(norm.isf(_support_for(threshold) * z)),
        params={"t0": t0, "sigma": sigma},
    )


def vacuum() -> PhotonProfile:
    """No photon inside any finite window: ξ ≡ 0 with unit tail everywhere."""
    return PhotonProfile(
        name="vacuum",
        evaluator=lambda t: np.zeros_like(t, dtype=complex),
        tail_fn=lambda t: np.ones_like(t, dtype=float),
        support_hint=0.0,
    )


def tabulated(times: Sequence[float], values: Sequence[complex], normalize: bool = True) -> PhotonProfile:
    """Piecewise-linear profile through samples (t_i, ξ_i), zero after the last sample."""
    ts = np.asarray(times, dtype=float)
    vs = np.asarray(values, dtype=complex)
    if ts.ndim != 1 or ts.shape != vs.shape or ts.size < 2:
        raise InvalidArgumentError("tabulated profile needs matching 1-D times and values")
    if ts[0] < 0 or np.any(np.diff(ts) <= 0):
        raise InvalidArgumentError("tabulated times must be non-negative and strictly increasing")

    def raw(t: np.ndarray) -> np.ndarray:
        inside = (t >= ts[0]) & (t <= ts[-1])
        re = np.interp(t, ts, vs.real)
        im = np.interp(t, ts, vs.imag)
        return np.where(inside, re + 1j * im, 0.0)

    scale = 1.0
    if normalize:
        mass, _ = integrate.quad(lambda s: float(abs(raw(np.asarray(s))) ** 2), ts[0], ts[-1],
                                 points=ts[1:-1][:50] if ts.size > 2 else None, limit=400)
        if mass <= 0:
            raise InvalidArgumentError("tabulated profile is identically zero")
        scale = 1.0 / math.sqrt(mass)

    return PhotonProfile(
        name="tabulated",
        evaluator=lambda t: scale * raw(t),
        support_hint=float(ts[-1]),
        params={"samples": int(ts.size)},
        breakpoints=tuple(ts.tolist()),
    )


BUILTIN_PROFILES: Dict[str, Callable[..., PhotonProfile]] = {
    "matched_exponential": matched_exponential,
    "constant_window": constant_window,
    "gaussian": gaussian,
    "vacuum": vacuum,
    "tabulated": tabulated,
}


def make_profile(name: str, **params: Any) -> PhotonProfile:
    """Build a named profile from keyword parameters."""
    try:
        factory = BUILTIN_PROFILES[name]
    except KeyError:
        raise InvalidArgumentError(
            f"unknown profile '{name}'; expected one of {sorted(BUILTIN_PROFILES)}"
        ) from None
    try:
        return factory(**params)
    except TypeError as e:
        raise InvalidArgumentError(f"bad parameters for profile '{name}': {e}") from None


@dataclass(frozen=True, eq=False)
class DiscretizedProfile:
    """Amplitudes ξ_k on the grid kτ and tail weights w_j = Σ_{k≥j} τ|ξ_k|² + remainder."""

    tau: float
    values: np.ndarray
    tail_weights: np.ndarray
    sampling: str = "cell"
    name: str = ""

    def __len__(self) -> int:
        return int(self.values.shape[0])

    @property
    def horizon(self) -> float:
        return len(self) * self.tau

    @property
    def remainder(self) -> float:
        return float(self.tail_weights[-1])

    def masses(self) -> np.ndarray:
        """τ|ξ_k|² per cell."""
        return self.tau * np.abs(self.values) ** 2

    def xi(self, k: int) -> complex:
        """ξ_k, zero past the end of the grid."""
        return complex(self.values[k]) if k < len(self) else 0j

    def weight(self, j: int) -> float:
        return float(self.tail_weights[min(j, len(self))])


def _cell_phases(profile: PhotonProfile, grid: np.ndarray, tau: float) -> np.ndarray:
    left = np.asarray(profile.xi(grid), dtype=complex)
    mid = np.asarray(profile.xi(grid + 0.5 * tau), dtype=complex)
    pick_from = np.where(np.abs(left) > 0, left, mid)
    mag = np.abs(pick_from)
    return np.where(mag > 0, pick_from / np.where(mag > 0, mag, 1.0), 1.0)


def discretize_profile(
    profile: PhotonProfile,
    tau: float,
    horizon: float,
    sampling: Optional[Sampling] = None,
    allow_unnormalized: bool = False,
    eps: Optional[float] = None,
) -> DiscretizedProfile:
    """Sample a profile on the collision grid.

    ``sampling="left"`` uses ξ_k = ξ(kτ). ``sampling="cell"`` keeps the phase of
    ξ(kτ) and sets τ|ξ_k|² to the photon mass in [kτ, (k+1)τ), which makes the
    tail weights exact. The weight beyond the horizon is taken from
    ``profile.tail(Kτ)`` with K = ceil(horizon/τ).

    Raises:
        InvalidArgumentError: On non-positive tau or horizon < tau, or when a
            numeric tail leaves more than the configured mass past the horizon
        NormalizationError: If w_0 deviates from one by more than eps
    """
    settings = get_config()
    sampling = pick(sampling, settings.simulation.sampling)
    eps = pick(eps, settings.numerics.normalization_eps)
    if not np.isfinite(tau) or tau <= 0:
        raise InvalidArgumentError(f"time step must be positive, got {tau}")
    if not np.isfinite(horizon) or horizon <= 0 or horizon < tau:
        raise InvalidArgumentError(f"horizon must be at least tau, got {horizon}")
    if sampling not in ("cell", "left"):
        raise InvalidArgumentError(f"unknown sampling '{sampling}'")

    n_steps = int(math.ceil(horizon / tau - 1e-9))
    grid = tau * np.arange(n_steps)
    edges = tau * np.arange(n_steps + 1)

    remainder = float(profile.tail(edges[-1]))
    if not profile.analytic_tail and remainder >= settings.numerics.tail_threshold:
        raise InvalidArgumentError(
            f"profile mass {remainder:.3e} beyond horizon {edges[-1]:g} exceeds the truncation threshold"
        )

    if sampling == "left":
        values = np.asarray(profile.xi(grid), dtype=complex)
    else:
        tails = np.asarray(profile.tail(edges), dtype=float)
        masses = np.clip(tails[:-1] - tails[1:], 0.0, None)
        values = np.sqrt(masses / tau) * _cell_phases(profile, grid, tau)

    masses = tau * np.abs(values) ** 2
    weights = np.empty(n_steps + 1)
    weights[-1] = remainder
    for j in range(n_steps - 1, -1, -1):
        weights[j] = weights[j + 1] + masses[j]

    if abs(weights[0] - 1.0) > eps:
        message = (
            f"discretized profile '{profile.name}' has w_0 = {weights[0]:.9g} "
            f"(tau={tau:g}, sampling={sampling}), outside 1 ± {eps:g}"
        )
        if not allow_unnormalized:
            raise NormalizationError(message, residual=abs(weights[0] - 1.0))
        logger.warning(message)

    values.setflags(write=False)
    weights.setflags(write=False)
    logger.debug(f"Discretized '{profile.name}': K={n_steps}, w_0={weights[0]:.12g}, remainder={remainder:.3e}")
    return DiscretizedProfile(tau=float(tau), values=values, tail_weights=weights,
                              sampling=sampling, name=profile.name)
