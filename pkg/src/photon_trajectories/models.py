"""System model, collision unitaries and the non-Hermitian generator."""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np
from scipy.linalg import expm

from .config import get_config
from .errors import InvalidArgumentError, NumericalError
from .utils import dag, pick


logger = logging.getLogger(__name__)

HERMITIAN_TOL = 1e-12
STATE_TOL = 1e-10


def _frozen(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=complex, copy=True)
    out.setflags(write=False)
    return out


def sigma_minus() -> np.ndarray:
    """Lowering operator |0⟩⟨1| (index 0 is the ground state)."""
    return np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)


def sigma_plus() -> np.ndarray:
    return sigma_minus().T.copy()


class BlockMode(str, Enum):
    """How a set of collision blocks was built."""
    EXACT = "exact"
    FIRST_ORDER = "first_order"


@dataclass(frozen=True, eq=False)
class SystemModel:
    """Quantum system coupled to the photon field.

    Attributes:
        hamiltonian: d×d Hermitian H_S (rates in 1/time, ħ = 1)
        coupling: d×d coupling operator L (units 1/√time)
        initial: unit-norm d-vector ψ or d×d density matrix ρ0
    """

    hamiltonian: np.ndarray
    coupling: np.ndarray
    initial: np.ndarray

    def __post_init__(self) -> None:
        h = np.asarray(self.hamiltonian, dtype=complex)
        c = np.asarray(self.coupling, dtype=complex)
        s = np.asarray(self.initial, dtype=complex)

        if h.ndim != 2 or h.shape[0] != h.shape[1] or h.shape[0] < 1:
            raise InvalidArgumentError(f"hamiltonian must be square, got shape {h.shape}")
        d = h.shape[0]
        if c.shape != (d, d):
            raise InvalidArgumentError(f"coupling must have shape {(d, d)}, got {c.shape}")
        scale = max(1.0, float(np.max(np.abs(h))))
        if np.max(np.abs(h - dag(h))) > HERMITIAN_TOL * scale:
            raise InvalidArgumentError("hamiltonian is not Hermitian")

        if s.ndim == 1:
            if s.shape != (d,):
                raise InvalidArgumentError(f"initial vector must have length {d}")
            if abs(np.linalg.norm(s) - 1.0) > STATE_TOL:
                raise InvalidArgumentError(
                    f"initial vector must have unit norm, got {np.linalg.norm(s):.12g}"
                )
        elif s.ndim == 2:
            if s.shape != (d, d):
                raise InvalidArgumentError(f"initial density matrix must have shape {(d, d)}")
            if np.max(np.abs(s - dag(s))) > STATE_TOL:
                raise InvalidArgumentError("initial density matrix is not Hermitian")
            if abs(np.trace(s).real - 1.0) > STATE_TOL:
                raise InvalidArgumentError("initial density matrix must have unit trace")
            if np.min(np.linalg.eigvalsh(0.5 * (s + dag(s)))) < -HERMITIAN_TOL:
                raise InvalidArgumentError("initial density matrix is not positive semidefinite")
        else:
            raise InvalidArgumentError("initial state must be a vector or a square matrix")

        object.__setattr__(self, "hamiltonian", _frozen(h))
        object.__setattr__(self, "coupling", _frozen(c))
        object.__setattr__(self, "initial", _frozen(s))

    @property
    def dim(self) -> int:
        return int(self.hamiltonian.shape[0])

    @property
    def is_pure(self) -> bool:
        return self.initial.ndim == 1

    @property
    def psi(self) -> np.ndarray:
        """Initial state vector; raises for a mixed initial state."""
        if not self.is_pure:
            raise InvalidArgumentError("model has a mixed initial state")
        return self.initial

    @property
    def rho0(self) -> np.ndarray:
        """Initial density matrix (ψψ† for a pure state)."""
        if self.is_pure:
            return np.outer(self.initial, np.conj(self.initial))
        return np.array(self.initial)

    def with_initial(self, initial: np.ndarray) -> "SystemModel":
        return SystemModel(self.hamiltonian, self.coupling, initial)


def two_level_atom(gamma: float, excited: bool = False, omega: float = 0.0) -> SystemModel:
    """Two-level atom with L = √Γ σ⁻ and H_S = ω|1⟩⟨1|."""
    if gamma < 0:
        raise InvalidArgumentError("gamma must be non-negative")
    h = np.diag([0.0, omega]).astype(complex)
    psi = np.array([0.0, 1.0] if excited else [1.0, 0.0], dtype=complex)
    return SystemModel(h, np.sqrt(gamma) * sigma_minus(), psi)


def random_model(dim: int, seed: int, coupling_scale: float = 1.0, mixed: bool = False) -> SystemModel:
    """Random Hermitian H_S, random L and random initial state.

    Args:
        dim: Hilbert-space dimension
        seed: Seed for numpy's default generator
        coupling_scale: Frobenius-norm scale of L
        mixed: Draw a random full-rank density matrix instead of a pure state
    """
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    h = 0.25 * (a + dag(a))
    l_op = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    l_op *= coupling_scale / np.linalg.norm(l_op)
    if mixed:
        g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        rho = g @ dag(g)
        initial = rho / np.trace(rho).real
    else:
        v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
        initial = v / np.linalg.norm(v)
    return SystemModel(h, l_op, initial)


@dataclass(frozen=True, eq=False)
class CollisionBlocks:
    """System blocks V_ij = ⟨i|V|j⟩ of one collision unitary (environment index first)."""

    v00: np.ndarray
    v01: np.ndarray
    v10: np.ndarray
    v11: np.ndarray
    mode: BlockMode
    tau: float

    @property
    def dim(self) -> int:
        return int(self.v00.shape[0])

    def block(self, i: int, j: int) -> np.ndarray:
        return (self.v00, self.v01, self.v10, self.v11)[2 * i + j]

    def as_matrix(self) -> np.ndarray:
        """The 2d×2d matrix [[v00, v01], [v10, v11]]."""
        return np.block([[self.v00, self.v01], [self.v10, self.v11]])

    def unitarity_residual(self) -> float:
        v = self.as_matrix()
        return float(np.linalg.norm(dag(v) @ v - np.eye(v.shape[0]), "fro"))


@dataclass(frozen=True, eq=False)
class NonHermitianGenerator:
    """G = H_S − (i/2) L†L; T_t = exp(−iGt) is the no-count propagator."""

    g: np.ndarray

    @property
    def dim(self) -> int:
        return int(self.g.shape[0])

    def propagator(self, t: float) -> np.ndarray:
        if t < 0:
            raise InvalidArgumentError(f"propagation time must be non-negative, got {t}")
        return expm(-1j * t * self.g)


def collision_hamiltonian(model: SystemModel, tau: float) -> np.ndarray:
    """H_k = 1⊗H_S + (i/√τ)(σ⁺⊗L − σ⁻⊗L†) as a 2d×2d matrix."""
    h, l_op = model.hamiltonian, model.coupling
    k = 1j / np.sqrt(tau)
    return np.block([[h, -k * dag(l_op)], [k * l_op, h]])


def _check_tau(tau: float) -> None:
    if not np.isfinite(tau) or tau <= 0:
        raise InvalidArgumentError(f"time step must be positive, got {tau}")


def build_collision_exact(
    model: SystemModel, tau: float, unitarity_tol: Optional[float] = None
) -> CollisionBlocks:
    """Blocks of exp(−iτH_k) from a dense Padé scaling-and-squaring exponential.

    Raises:
        InvalidArgumentError: If tau is not positive
        NumericalError: If the result is not unitary to the configured tolerance
    """
    _check_tau(tau)
    tol = pick(unitarity_tol, get_config().numerics.unitarity_tol)
    d = model.dim
    v = expm(-1j * tau * collision_hamiltonian(model, tau))
    blocks = CollisionBlocks(
        v00=_frozen(v[:d, :d]),
        v01=_frozen(v[:d, d:]),
        v10=_frozen(v[d:, :d]),
        v11=_frozen(v[d:, d:]),
        mode=BlockMode.EXACT,
        tau=float(tau),
    )
    residual = blocks.unitarity_residual() if np.all(np.isfinite(v)) else float("inf")
    logger.debug(f"Exact collision blocks for tau={tau:g}: unitarity residual {residual:.3e}")
    if not residual < tol:
        raise NumericalError(
            f"collision unitary residual {residual:.3e} exceeds {tol:.1e} at tau={tau:g}",
            residual=residual,
        )
    return blocks


def build_collision_first_order(model: SystemModel, tau: float) -> CollisionBlocks:
    """Small-τ expansion of the collision unitary.

    v00 = 1 − iτH_S − (τ/2)L†L, v10 = √τ L, v01 = −√τ L†, v11 = 1.
    """
    _check_tau(tau)
    h, l_op = model.hamiltonian, model.coupling
    eye = np.eye(model.dim, dtype=complex)
    spread = float(np.ptp(np.linalg.eigvalsh(h))) if model.dim > 1 else 0.0
    if tau * spread > 0.1:
        logger.warning(
            f"tau={tau:g} is not small against the Hamiltonian spread {spread:g}; "
            "first-order blocks may be inaccurate"
        )
    return CollisionBlocks(
        v00=_frozen(eye - 1j * tau * h - 0.5 * tau * dag(l_op) @ l_op),
        v01=_frozen(-np.sqrt(tau) * dag(l_op)),
        v10=_frozen(np.sqrt(tau) * l_op),
        v11=_frozen(eye),
        mode=BlockMode.FIRST_ORDER,
        tau=float(tau),
    )


def build_collision(model: SystemModel, tau: float, mode: str = "exact") -> CollisionBlocks:
    if BlockMode(mode) is BlockMode.EXACT:
        return build_collision_exact(model, tau)
    return build_collision_first_order(model, tau)


def make_generator(model: SystemModel) -> NonHermitianGenerator:
    l_op = model.coupling
    return NonHermitianGenerator(_frozen(model.hamiltonian - 0.5j * dag(l_op) @ l_op))


def propagate(gen: NonHermitianGenerator, t: float, v: np.ndarray) -> np.ndarray:
    """Apply T_t = exp(−iGt) to a vector (or to the columns of a matrix).

    Raises:
        InvalidArgumentError: If t is negative
    """
    return gen.propagator(t) @ np.asarray(v, dtype=complex)
