"""Closed-form results for a two-level atom driven by a single photon.

Convention: H_S = 0, L = √Γσ⁻, atom initially in the ground state |0⟩.
"""

import math
from dataclasses import dataclass
from typing import Dict, List, Sequence

import numpy as np
from scipy import integrate

from .errors import InvalidArgumentError
from .models import SystemModel, two_level_atom
from .profiles import PhotonProfile


@dataclass(frozen=True)
class TwoLevelAtomSpec:
    gamma: float
    profile: PhotonProfile

    def __post_init__(self) -> None:
        if not self.gamma > 0:
            raise InvalidArgumentError(f"gamma must be positive, got {self.gamma}")

    def model(self) -> SystemModel:
        return two_level_atom(self.gamma)


def _check_time(t: float) -> None:
    if t < 0:
        raise InvalidArgumentError(f"time must be non-negative, got {t}")


def _drive_integral(spec: TwoLevelAtomSpec, t: float) -> complex:
    """∫_0^t ξ_s e^{Γs/2} ds."""
    gamma = spec.gamma
    profile = spec.profile
    if t == 0:
        return 0j
    if profile.name == "matched_exponential":
        gamma_p = float(profile.params["gamma_p"])
        rate = 0.5 * (gamma - gamma_p)
        if abs(rate) * t < 1e-12:
            return complex(math.sqrt(gamma_p) * t)
        return complex(math.sqrt(gamma_p) * math.expm1(rate * t) / rate)
    if profile.is_vacuum:
        return 0j

    points = [p for p in profile.breakpoints if 0 < p < t] or None
    re, _ = integrate.quad(lambda s: (profile.xi(s) * math.exp(0.5 * gamma * s)).real,
                           0.0, t, points=points, limit=400, epsabs=1e-13, epsrel=1e-11)
    im, _ = integrate.quad(lambda s: (profile.xi(s) * math.exp(0.5 * gamma * s)).imag,
                           0.0, t, points=points, limit=400, epsabs=1e-13, epsrel=1e-11)
    return complex(re, im)


def tla_excitation_probability(spec: TwoLevelAtomSpec, t: float) -> float:
    """A priori excited population p(t) = Γe^{−Γt} |∫_0^t ξ_s e^{Γs/2} ds|²."""
    _check_time(t)
    return spec.gamma * math.exp(-spec.gamma * t) * abs(_drive_integral(spec, t)) ** 2


def tla_no_count_probability(spec: TwoLevelAtomSpec, t: float) -> float:
    """P_0^t(0) = tail(t) + p(t)."""
    _check_time(t)
    return float(spec.profile.tail(t)) + tla_excitation_probability(spec, t)


def tla_apriori_state(spec: TwoLevelAtomSpec, t: float) -> np.ndarray:
    p = tla_excitation_probability(spec, t)
    return np.diag([1.0 - p, p]).astype(complex)


def oracle_table(spec: TwoLevelAtomSpec, times: Sequence[float]) -> List[Dict[str, float]]:
    """Rows {t, excitation, no_count, one_count} for the oracle CLI."""
    rows = []
    for t in times:
        p0 = tla_no_count_probability(spec, float(t))
        rows.append({
            "t": float(t),
            "excitation": tla_excitation_probability(spec, float(t)),
            "no_count": p0,
            "one_count": 1.0 - p0,
        })
    return rows
