"""Exact filtering in the discrete collision model.

The environment chain is never represented explicitly. A single-photon input
leaves the joint state in the form |α_j⟩⊗|1_ξ^{[j}⟩ + |β_j⟩⊗|vac⟩, so the pair
(α_j, β_j) together with the remaining photon weight w_j is the full filter
state. Both measurement kinds reduce to a pair of system operators (A, B) per
outcome:

    α' = A α,    β' = A β + √τ ξ_j B α

with (A, B) = (V_η0, V_η1) for a count outcome η and
((V00 + qV10)/√2, (V01 + qV11)/√2) for a quadrature outcome q = ±1.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import InvalidArgumentError, UndefinedStateError
from .models import CollisionBlocks, SystemModel, build_collision_exact
from .profiles import DiscretizedProfile
from .utils import dag, trajectory_rng


logger = logging.getLogger(__name__)

TAIL_SLACK = 1e-12
MAX_ENUMERATION_STEPS = 16


class MeasurementKind(str, Enum):
    """Measurement performed on each outgoing environment qubit."""
    COUNTING = "counting"
    HOMODYNE = "homodyne"


OUTCOMES = {
    MeasurementKind.COUNTING: (0, 1),
    MeasurementKind.HOMODYNE: (1, -1),
}

OUTCOME_LABELS = {
    MeasurementKind.COUNTING: {0: "0", 1: "1"},
    MeasurementKind.HOMODYNE: {1: "+", -1: "-"},
}


@dataclass(frozen=True, eq=False)
class ConditionalPair:
    """Unnormalized conditional vectors (α_j, β_j) with the photon weight w_j still to come."""

    alpha: np.ndarray
    beta: np.ndarray
    step: int
    tail: float

    @classmethod
    def initial(cls, psi: np.ndarray, dprofile: DiscretizedProfile) -> "ConditionalPair":
        psi = np.asarray(psi, dtype=complex)
        return cls(alpha=psi.copy(), beta=np.zeros_like(psi), step=0, tail=dprofile.weight(0))

    def scaled(self, factor: float) -> "ConditionalPair":
        return replace(self, alpha=self.alpha * factor, beta=self.beta * factor)


@dataclass(frozen=True, eq=False)
class MixedPairState:
    """Mixed-state filter: X plays |α⟩⟨α|, Y plays |α⟩⟨β|, rho is the unnormalized posterior."""

    x: np.ndarray
    y: np.ndarray
    rho: np.ndarray
    step: int
    tail: float

    @classmethod
    def initial(cls, rho0: np.ndarray, dprofile: DiscretizedProfile) -> "MixedPairState":
        rho0 = np.asarray(rho0, dtype=complex)
        w0 = dprofile.weight(0)
        return cls(x=rho0.copy(), y=np.zeros_like(rho0), rho=w0 * rho0, step=0, tail=w0)

    @classmethod
    def from_pair(cls, pair: ConditionalPair) -> "MixedPairState":
        a, b = pair.alpha, pair.beta
        return cls(
            x=np.outer(a, np.conj(a)),
            y=np.outer(a, np.conj(b)),
            rho=posterior_density(pair),
            step=pair.step,
            tail=pair.tail,
        )

    def scaled(self, factor: float) -> "MixedPairState":
        return replace(self, x=self.x * factor, y=self.y * factor, rho=self.rho * factor)


FilterState = Union[ConditionalPair, MixedPairState]


@dataclass(frozen=True)
class CountRecordDiscrete:
    """Steps l_1 < … < l_m (1-based) at which a count was registered, out of j steps."""

    steps_of_counts: Tuple[int, ...]
    horizon: int

    def __post_init__(self) -> None:
        steps = tuple(int(s) for s in self.steps_of_counts)
        object.__setattr__(self, "steps_of_counts", steps)
        if self.horizon < 0:
            raise InvalidArgumentError("record horizon must be non-negative")
        if any(b <= a for a, b in zip(steps, steps[1:])):
            raise InvalidArgumentError(f"count steps must be strictly increasing: {steps}")
        if steps and (steps[0] < 1 or steps[-1] > self.horizon):
            raise InvalidArgumentError(f"count steps {steps} must lie in 1..{self.horizon}")

    @property
    def m(self) -> int:
        return len(self.steps_of_counts)

    @classmethod
    def from_outcomes(cls, outcomes: Sequence[int]) -> "CountRecordDiscrete":
        return cls(tuple(i + 1 for i, eta in enumerate(outcomes) if eta == 1), len(outcomes))

    def outcomes(self) -> List[int]:
        counted = set(self.steps_of_counts)
        return [1 if s in counted else 0 for s in range(1, self.horizon + 1)]


def _kind(kind: Union[str, MeasurementKind]) -> MeasurementKind:
    try:
        return MeasurementKind(kind)
    except ValueError:
        raise InvalidArgumentError(f"unknown measurement kind '{kind}'") from None


def branch_operators(
    blocks: CollisionBlocks, kind: Union[str, MeasurementKind], outcome: int
) -> Tuple[np.ndarray, np.ndarray]:
    """System operators (A, B) driving α and the photon-absorption term for one outcome."""
    kind = _kind(kind)
    if outcome not in OUTCOMES[kind]:
        raise InvalidArgumentError(f"outcome {outcome!r} is not valid for {kind.value} measurement")
    if kind is MeasurementKind.COUNTING:
        return blocks.block(outcome, 0), blocks.block(outcome, 1)
    s = 1.0 / math.sqrt(2.0)
    return s * (blocks.v00 + outcome * blocks.v10), s * (blocks.v01 + outcome * blocks.v11)


def _consume(tail: float, tau: float, xi_j: complex) -> float:
    mass = tau * abs(xi_j) ** 2
    if tail < mass - TAIL_SLACK:
        raise InvalidArgumentError(f"photon weight {tail:.3e} smaller than the cell mass {mass:.3e}")
    return tail - mass


def _advance(pair: ConditionalPair, a: np.ndarray, b: np.ndarray, xi_j: complex, tau: float) -> ConditionalPair:
    tail = _consume(pair.tail, tau, xi_j)
    alpha = a @ pair.alpha
    beta = a @ pair.beta + math.sqrt(tau) * xi_j * (b @ pair.alpha)
    return ConditionalPair(alpha=alpha, beta=beta, step=pair.step + 1, tail=tail)


def counting_step(pair: ConditionalPair, blocks: CollisionBlocks, xi_j: complex, outcome: int) -> ConditionalPair:
    """One collision followed by photon counting with result η ∈ {0, 1}."""
    a, b = branch_operators(blocks, MeasurementKind.COUNTING, outcome)
    return _advance(pair, a, b, complex(xi_j), blocks.tau)


def homodyne_step(pair: ConditionalPair, blocks: CollisionBlocks, xi_j: complex, outcome: int) -> ConditionalPair:
    """One collision followed by a σ_x measurement with result q ∈ {+1, −1}."""
    a, b = branch_operators(blocks, MeasurementKind.HOMODYNE, outcome)
    return _advance(pair, a, b, complex(xi_j), blocks.tau)


def mixed_step(
    state: MixedPairState,
    blocks: CollisionBlocks,
    xi_j: complex,
    kind: Union[str, MeasurementKind],
    outcome: int,
) -> MixedPairState:
    """Mixed-state version of the pair recurrences.

    X' = A X A†
    Y' = A Y A† + √τ ξ* A X B†
    ρ' = A ρ A† − τ|ξ|² A X A† + √τ (ξ B Y A† + h.c.) + τ|ξ|² B X B†
    """
    a, b = branch_operators(blocks, kind, outcome)
    tau = blocks.tau
    xi_j = complex(xi_j)
    tail = _consume(state.tail, tau, xi_j)
    root = math.sqrt(tau)
    a_dag, b_dag = dag(a), dag(b)
    axa = a @ state.x @ a_dag
    cross = root * xi_j * (b @ state.y @ a_dag)
    rho = a @ state.rho @ a_dag - tau * abs(xi_j) ** 2 * axa + cross + dag(cross)
    rho = rho + tau * abs(xi_j) ** 2 * (b @ state.x @ b_dag)
    y = a @ state.y @ a_dag + root * np.conj(xi_j) * (a @ state.x @ b_dag)
    return MixedPairState(x=axa, y=y, rho=rho, step=state.step + 1, tail=tail)


def mixed_counting_step(state: MixedPairState, blocks: CollisionBlocks, xi_j: complex, outcome: int) -> MixedPairState:
    return mixed_step(state, blocks, xi_j, MeasurementKind.COUNTING, outcome)


def step_state(
    state: FilterState, blocks: CollisionBlocks, xi_j: complex, kind: Union[str, MeasurementKind], outcome: int
) -> FilterState:
    if isinstance(state, MixedPairState):
        return mixed_step(state, blocks, xi_j, kind, outcome)
    a, b = branch_operators(blocks, kind, outcome)
    return _advance(state, a, b, complex(xi_j), blocks.tau)


def posterior_density(pair: ConditionalPair) -> np.ndarray:
    """Unnormalized a posteriori state αα† w_j + ββ†."""
    a, b = pair.alpha, pair.beta
    return pair.tail * np.outer(a, np.conj(a)) + np.outer(b, np.conj(b))


def pair_trace(pair: FilterState) -> float:
    """Probability weight of the record that produced this state."""
    if isinstance(pair, MixedPairState):
        return float(np.trace(pair.rho).real)
    return float(pair.tail * np.vdot(pair.alpha, pair.alpha).real + np.vdot(pair.beta, pair.beta).real)


def _require_trace(state: FilterState) -> float:
    total = pair_trace(state)
    if not total > 0:
        raise UndefinedStateError(f"conditional state at step {state.step} has zero weight")
    return total


def scenario_probabilities(pair: FilterState) -> Tuple[float, float]:
    """(photon still in the future, photon already consumed)."""
    total = _require_trace(pair)
    if isinstance(pair, MixedPairState):
        future = pair.tail * float(np.trace(pair.x).real)
    else:
        future = pair.tail * float(np.vdot(pair.alpha, pair.alpha).real)
    future = future / total
    return future, 1.0 - future


def normalized_state(state: FilterState) -> np.ndarray:
    """ρ̃ = posterior / trace."""
    total = _require_trace(state)
    rho = state.rho if isinstance(state, MixedPairState) else posterior_density(state)
    return rho / total


def outcome_distribution(
    pair: FilterState, blocks: CollisionBlocks, xi_j: complex, kind: Union[str, MeasurementKind]
) -> np.ndarray:
    """Conditional probabilities of the next outcome, ordered as ``OUTCOMES[kind]``."""
    kind = _kind(kind)
    total = _require_trace(pair)
    weights = np.array([pair_trace(step_state(pair, blocks, xi_j, kind, o)) for o in OUTCOMES[kind]])
    return weights / total


def _sectors(state: FilterState) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Normalized (ρ̃, α̃β̃†, α̃α̃†)."""
    total = _require_trace(state)
    if isinstance(state, MixedPairState):
        return state.rho / total, state.y / total, state.x / total
    a, b = state.alpha, state.beta
    return posterior_density(state) / total, np.outer(a, np.conj(b)) / total, np.outer(a, np.conj(a)) / total


def first_order_intensities(
    pair: FilterState, model: SystemModel, xi_j: complex, return_complex: bool = False
) -> Tuple[complex, complex]:
    """Count intensity k_j and homodyne rate r_j of the small-τ expansion.

    k_j = Tr(L†Lρ̃ + ξ* L β̃α̃† + ξ α̃β̃† L† + |ξ|² α̃α̃†)
    r_j = Tr(Lρ̃ + ρ̃L† + ξ* β̃α̃† + ξ α̃β̃†)
    """
    rho, y, x = _sectors(pair)
    l_op = model.coupling
    xi_j = complex(xi_j)
    k = np.trace(dag(l_op) @ l_op @ rho + np.conj(xi_j) * l_op @ dag(y) + xi_j * y @ dag(l_op)
                 + abs(xi_j) ** 2 * x)
    r = np.trace(l_op @ rho + rho @ dag(l_op) + np.conj(xi_j) * dag(y) + xi_j * y)
    if return_complex:
        return complex(k), complex(r)
    return float(k.real), float(r.real)


def _check_blocks(blocks: CollisionBlocks, dprofile: DiscretizedProfile) -> None:
    if abs(blocks.tau - dprofile.tau) > 1e-12 * max(1.0, dprofile.tau):
        raise InvalidArgumentError(
            f"collision blocks built for tau={blocks.tau:g} but profile uses tau={dprofile.tau:g}"
        )


def _power_cache(v00: np.ndarray, n: int) -> List[np.ndarray]:
    powers = [np.eye(v00.shape[0], dtype=complex)]
    for _ in range(n):
        powers.append(v00 @ powers[-1])
    return powers


def _explicit_pair(
    record: CountRecordDiscrete, blocks: CollisionBlocks, dprofile: DiscretizedProfile, psi: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """Closed forms for zero, one and two counts written with powers of V00."""
    j = record.horizon
    pw = _power_cache(blocks.v00, j)
    v01, v10, v11 = blocks.v01, blocks.v10, blocks.v11
    x = dprofile.xi
    root = math.sqrt(dprofile.tau)
    beta = np.zeros_like(psi)

    if record.m == 0:
        alpha = pw[j] @ psi
        for k in range(j):
            beta += x(k) * (pw[j - 1 - k] @ v01 @ pw[k] @ psi)
        return alpha, root * beta

    if record.m == 1:
        (l1,) = record.steps_of_counts
        a1 = v10 @ pw[l1 - 1] @ psi
        alpha = pw[j - l1] @ a1
        head = pw[j - l1] @ v10
        for k in range(l1 - 1):
            beta += x(k) * (head @ pw[l1 - 2 - k] @ v01 @ pw[k] @ psi)
        beta += x(l1 - 1) * (pw[j - l1] @ v11 @ pw[l1 - 1] @ psi)
        for k in range(l1, j):
            beta += x(k) * (pw[j - 1 - k] @ v01 @ pw[k - l1] @ a1)
        return alpha, root * beta

    l1, l2 = record.steps_of_counts
    a1 = v10 @ pw[l1 - 1] @ psi
    a2 = v10 @ pw[l2 - l1 - 1] @ a1
    alpha = pw[j - l2] @ a2
    head2 = pw[j - l2] @ v10
    head1 = head2 @ pw[l2 - l1 - 1] @ v10
    for k in range(l1 - 1):
        beta += x(k) * (head1 @ pw[l1 - 2 - k] @ v01 @ pw[k] @ psi)
    beta += x(l1 - 1) * (head2 @ pw[l2 - l1 - 1] @ v11 @ pw[l1 - 1] @ psi)
    for k in range(l1, l2 - 1):
        beta += x(k) * (head2 @ pw[l2 - 2 - k] @ v01 @ pw[k - l1] @ a1)
    beta += x(l2 - 1) * (pw[j - l2] @ v11 @ pw[l2 - l1 - 1] @ a1)
    for k in range(l2, j):
        beta += x(k) * (pw[j - 1 - k] @ v01 @ pw[k - l2] @ a2)
    return alpha, root * beta


def _positioned_pair(
    record: CountRecordDiscrete, blocks: CollisionBlocks, dprofile: DiscretizedProfile, psi: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """General m: β = √τ Σ_s ξ_{s−1} A_j…A_{s+1} B_s A_{s−1}…A_1 ψ.

    A_s is V10 at count steps and V00 otherwise, B_s is V11 at count steps and
    V01 otherwise. Forward states and backward products are accumulated
    separately so V00 is never inverted.
    """
    j = record.horizon
    counted = set(record.steps_of_counts)
    a_ops = [blocks.v10 if s in counted else blocks.v00 for s in range(1, j + 1)]
    b_ops = [blocks.v11 if s in counted else blocks.v01 for s in range(1, j + 1)]

    forward = [psi]
    for a in a_ops:
        forward.append(a @ forward[-1])

    beta = np.zeros_like(psi)
    suffix = np.eye(psi.shape[0], dtype=complex)
    for s in range(j, 0, -1):
        beta += dprofile.xi(s - 1) * (suffix @ (b_ops[s - 1] @ forward[s - 1]))
        suffix = suffix @ a_ops[s - 1]
    return forward[-1], math.sqrt(dprofile.tau) * beta


def closed_form_pair(
    record: CountRecordDiscrete,
    blocks: CollisionBlocks,
    profile: DiscretizedProfile,
    psi: np.ndarray,
    general: bool = False,
) -> ConditionalPair:
    """Conditional pair for a count record without iterating the filter.

    Zero, one and two counts use the explicit power formulas; ``general=True``
    (or m ≥ 3) uses the positioned-factor product for arbitrary m.

    Raises:
        InvalidArgumentError: If the record does not fit the profile grid or
            the blocks were built for another τ
    """
    _check_blocks(blocks, profile)
    if record.horizon > len(profile):
        raise InvalidArgumentError(f"record horizon {record.horizon} exceeds profile length {len(profile)}")
    psi = np.asarray(psi, dtype=complex)
    if general or record.m > 2:
        alpha, beta = _positioned_pair(record, blocks, profile, psi)
    else:
        alpha, beta = _explicit_pair(record, blocks, profile, psi)
    return ConditionalPair(alpha=alpha, beta=beta, step=record.horizon, tail=profile.weight(record.horizon))


def iterate_record(
    outcomes: Sequence[int],
    blocks: CollisionBlocks,
    dprofile: DiscretizedProfile,
    initial: FilterState,
    kind: Union[str, MeasurementKind] = MeasurementKind.COUNTING,
) -> FilterState:
    """Run the filter along a fixed outcome sequence without renormalizing."""
    _check_blocks(blocks, dprofile)
    state = initial
    for j, outcome in enumerate(outcomes):
        state = step_state(state, blocks, dprofile.xi(j), kind, outcome)
    return state


def initial_state(model: SystemModel, dprofile: DiscretizedProfile) -> FilterState:
    if model.is_pure:
        return ConditionalPair.initial(model.psi, dprofile)
    return MixedPairState.initial(model.rho0, dprofile)


@dataclass
class DiscreteTrajectory:
    """One sampled record of the discrete filter."""

    kind: MeasurementKind
    tau: float
    seed: int
    index: int
    outcomes: np.ndarray
    log_probs: np.ndarray
    states: np.ndarray
    p_future: np.ndarray
    intensities: np.ndarray
    wiener: Optional[np.ndarray] = None
    initial_weight: float = 1.0
    final_state: Optional[FilterState] = field(default=None, repr=False)

    @property
    def steps(self) -> int:
        return int(self.outcomes.shape[0])

    @property
    def times(self) -> np.ndarray:
        return self.tau * np.arange(self.steps + 1)

    @property
    def log_probability(self) -> float:
        return math.log(self.initial_weight) + float(np.sum(self.log_probs))

    @property
    def probability(self) -> float:
        return math.exp(self.log_probability)

    @property
    def counts(self) -> np.ndarray:
        """Cumulative counts after each step (counting kind)."""
        return np.concatenate([[0], np.cumsum(self.outcomes == 1)])

    @property
    def count_steps(self) -> List[int]:
        return [i + 1 for i, o in enumerate(self.outcomes) if o == 1]

    @property
    def total_counts(self) -> int:
        return int(np.sum(self.outcomes == 1)) if self.kind is MeasurementKind.COUNTING else 0


def sample_trajectory(
    model: SystemModel,
    dprofile: DiscretizedProfile,
    kind: Union[str, MeasurementKind],
    steps: int,
    seed: int,
    blocks: Optional[CollisionBlocks] = None,
    index: int = 0,
    stop_after_counts: Optional[int] = None,
) -> DiscreteTrajectory:
    """Draw one record from the exact conditional outcome distributions.

    The filter state is renormalized after every step and the log of each
    outcome probability is kept, so long records do not underflow.

    Args:
        model: System model (pure or mixed initial state)
        dprofile: Discretized photon profile
        kind: "counting" or "homodyne"
        steps: Number of collisions J (at most the profile length)
        seed: Base seed
        blocks: Collision blocks; exact blocks are built when omitted
        index: Trajectory index within a batch (selects the random stream)
        stop_after_counts: Stop once this many counts were registered
    """
    kind = _kind(kind)
    if steps < 0 or steps > len(dprofile):
        raise InvalidArgumentError(f"steps must lie in 0..{len(dprofile)}, got {steps}")
    blocks = blocks or build_collision_exact(model, dprofile.tau)
    _check_blocks(blocks, dprofile)

    rng = trajectory_rng(seed, index)
    uniforms = rng.random(steps)
    labels = OUTCOMES[kind]
    root = math.sqrt(dprofile.tau)

    state = initial_state(model, dprofile)
    d = model.dim
    outcomes = np.zeros(steps, dtype=int)
    log_probs = np.zeros(steps)
    states = np.zeros((steps + 1, d, d), dtype=complex)
    p_future = np.zeros(steps + 1)
    intensities = np.zeros(steps)
    wiener = np.zeros(steps + 1) if kind is MeasurementKind.HOMODYNE else None

    states[0] = normalized_state(state)
    p_future[0] = scenario_probabilities(state)[0]
    counts = 0
    done = steps
    for j in range(steps):
        xi_j = dprofile.xi(j)
        k_j, r_j = first_order_intensities(state, model, xi_j)
        intensities[j] = k_j if kind is MeasurementKind.COUNTING else r_j
        branches = [step_state(state, blocks, xi_j, kind, o) for o in labels]
        weights = np.array([pair_trace(b) for b in branches])
        probs = weights / pair_trace(state)
        choice = 0 if uniforms[j] < probs[0] else 1
        if probs[choice] <= 0:
            choice = 1 - choice
        outcome = labels[choice]
        outcomes[j] = outcome
        log_probs[j] = math.log(probs[choice])
        if isinstance(state, ConditionalPair):
            state = branches[choice].scaled(1.0 / math.sqrt(weights[choice]))
        else:
            state = branches[choice].scaled(1.0 / weights[choice])
        states[j + 1] = normalized_state(state)
        p_future[j + 1] = scenario_probabilities(state)[0]
        if wiener is not None:
            wiener[j + 1] = wiener[j] + root * (outcome - r_j * root)
        if outcome == 1 and kind is MeasurementKind.COUNTING:
            counts += 1
            if stop_after_counts is not None and counts >= stop_after_counts:
                done = j + 1
                break

    logger.debug(f"Sampled {kind.value} trajectory seed={seed} index={index}: {done} steps")
    return DiscreteTrajectory(
        kind=kind,
        tau=dprofile.tau,
        seed=seed,
        index=index,
        outcomes=outcomes[:done],
        log_probs=log_probs[:done],
        states=states[: done + 1],
        p_future=p_future[: done + 1],
        intensities=intensities[:done],
        wiener=None if wiener is None else wiener[: done + 1],
        initial_weight=dprofile.weight(0),
        final_state=state,
    )


def enumerate_outcomes(
    model: SystemModel,
    dprofile: DiscretizedProfile,
    kind: Union[str, MeasurementKind],
    steps: int,
    blocks: Optional[CollisionBlocks] = None,
) -> Dict[str, float]:
    """Probability of every outcome string of length ``steps``.

    Strings use "0"/"1" for counting and "+"/"-" for homodyne outcomes, first
    collision first.
    """
    kind = _kind(kind)
    if steps < 0 or steps > min(len(dprofile), MAX_ENUMERATION_STEPS):
        raise InvalidArgumentError(
            f"enumeration needs 0 <= steps <= {min(len(dprofile), MAX_ENUMERATION_STEPS)}"
        )
    blocks = blocks or build_collision_exact(model, dprofile.tau)
    _check_blocks(blocks, dprofile)
    labels = OUTCOME_LABELS[kind]

    frontier: List[Tuple[str, FilterState]] = [("", initial_state(model, dprofile))]
    for j in range(steps):
        xi_j = dprofile.xi(j)
        frontier = [
            (prefix + labels[o], step_state(state, blocks, xi_j, kind, o))
            for prefix, state in frontier
            for o in OUTCOMES[kind]
        ]
    return {prefix: pair_trace(state) for prefix, state in frontier}


def discrete_count_distribution(
    model: SystemModel,
    dprofile: DiscretizedProfile,
    steps: int,
    blocks: Optional[CollisionBlocks] = None,
) -> np.ndarray:
    """Exact probability of n counts after ``steps`` collisions, n = 0..steps.

    The mixed-state recurrences are linear in (X, Y, ρ), so summing the states
    of all records with the same count number gives a closed recursion over n.
    """
    if steps < 0 or steps > len(dprofile):
        raise InvalidArgumentError(f"steps must lie in 0..{len(dprofile)}, got {steps}")
    blocks = blocks or build_collision_exact(model, dprofile.tau)
    _check_blocks(blocks, dprofile)

    start = MixedPairState.initial(model.rho0, dprofile)
    by_count: List[Optional[MixedPairState]] = [start]
    for j in range(steps):
        xi_j = dprofile.xi(j)
        nxt: List[Optional[MixedPairState]] = [None] * (len(by_count) + 1)
        for n, state in enumerate(by_count):
            if state is None:
                continue
            for eta in (0, 1):
                branch = mixed_counting_step(state, blocks, xi_j, eta)
                acc = nxt[n + eta]
                nxt[n + eta] = branch if acc is None else MixedPairState(
                    x=acc.x + branch.x, y=acc.y + branch.y, rho=acc.rho + branch.rho,
                    step=branch.step, tail=branch.tail,
                )
        by_count = nxt
    return np.array([0.0 if s is None else pair_trace(s) for s in by_count])
