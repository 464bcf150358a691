"""Experiment configuration and orchestration."""

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Dict, List, Literal, Optional, Tuple, Union

import numpy as np
import pandas as pd
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError as PydanticValidationError
from pydantic import field_validator, model_validator

from .config import get_config
from .continuous import (
    UnravelingKind,
    integrate_master,
    monte_carlo_average,
    simulate_diffusive_trajectory,
    simulate_jump_trajectory,
)
from .counting import count_table, no_count_pair, pure_components, single_count_scan
from .discrete import (
    MeasurementKind,
    discrete_count_distribution,
    enumerate_outcomes,
    initial_state,
    iterate_record,
    normalized_state,
    sample_trajectory,
)
from .errors import ConfigurationError, InvalidArgumentError
from .export import (
    RunWriter,
    diffusive_frame,
    discrete_frame,
    jump_frame,
    master_frame,
    summary_frame,
    summary_payload,
)
from .models import BlockMode, SystemModel, build_collision, random_model, two_level_atom
from .oracles import TwoLevelAtomSpec, oracle_table
from .profiles import BUILTIN_PROFILES, PhotonProfile, discretize_profile, make_profile, tabulated
from .utils import as_complex_matrix, as_complex_vector, pick


logger = logging.getLogger(__name__)

ProgressCallback = Callable[[str, int, int], None]


class ExperimentKind(str, Enum):
    DISCRETE_COUNTING = "discrete-counting"
    DISCRETE_HOMODYNE = "discrete-homodyne"
    JUMP = "jump"
    DIFFUSIVE = "diffusive"
    MASTER = "master"
    COUNTING_STATS = "counting-stats"
    CONVERGENCE = "convergence"
    ORACLE = "oracle"


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ModelSpec(_Strict):
    """System model: either a preset or explicit matrices.

    Matrices and vectors are nested lists whose entries are numbers or
    [re, im] pairs.
    """

    preset: Optional[Literal["two_level_atom", "random"]] = None
    dimension: Optional[int] = Field(None, ge=1)
    hamiltonian: Optional[List[Any]] = None
    coupling: Optional[List[Any]] = None
    initial_state: Optional[List[Any]] = None
    initial_density: Optional[List[Any]] = None
    gamma: float = Field(1.0, gt=0)
    omega: float = 0.0
    excited: bool = False
    seed: int = Field(0, ge=0)
    mixed: bool = False
    coupling_scale: float = Field(1.0, gt=0)

    @model_validator(mode="after")
    def _check_shapes(self) -> "ModelSpec":
        if self.preset == "random":
            if self.dimension is None:
                raise ValueError("the random preset needs 'dimension'")
            return self
        if self.preset == "two_level_atom":
            return self
        missing = [name for name in ("dimension", "hamiltonian", "coupling") if getattr(self, name) is None]
        if missing:
            raise ValueError(f"explicit models need {', '.join(missing)} (or a preset)")
        if (self.initial_state is None) == (self.initial_density is None):
            raise ValueError("give exactly one of initial_state and initial_density")
        d = self.dimension
        for name in ("hamiltonian", "coupling", "initial_density"):
            data = getattr(self, name)
            if data is not None and as_complex_matrix(data, name).shape != (d, d):
                raise ValueError(f"{name} must be {d}x{d}")
        if self.initial_state is not None and as_complex_vector(self.initial_state).shape != (d,):
            raise ValueError(f"initial_state must have {d} entries")
        return self

    def build(self) -> SystemModel:
        if self.preset == "two_level_atom":
            return two_level_atom(self.gamma, excited=self.excited, omega=self.omega)
        if self.preset == "random":
            return random_model(self.dimension, self.seed, self.coupling_scale, self.mixed)
        initial = (as_complex_vector(self.initial_state) if self.initial_state is not None
                   else as_complex_matrix(self.initial_density, "initial_density"))
        return SystemModel(
            as_complex_matrix(self.hamiltonian, "hamiltonian"),
            as_complex_matrix(self.coupling, "coupling"),
            initial,
        )


class ProfileSpec(_Strict):
    """Named profile with parameters, or tabulated samples [t, re] / [t, re, im]."""

    name: str = "matched_exponential"
    params: Dict[str, float] = Field(default_factory=dict)
    samples: Optional[List[List[float]]] = None

    @field_validator("name")
    @classmethod
    def _known(cls, v: str) -> str:
        if v not in BUILTIN_PROFILES:
            raise ValueError(f"unknown profile '{v}', expected one of {sorted(BUILTIN_PROFILES)}")
        return v

    @model_validator(mode="after")
    def _samples(self) -> "ProfileSpec":
        if self.name == "tabulated":
            if not self.samples or len(self.samples) < 2:
                raise ValueError("tabulated profiles need at least two samples")
            if any(len(row) not in (2, 3) for row in self.samples):
                raise ValueError("samples must be [t, re] or [t, re, im] rows")
        return self

    def build(self) -> PhotonProfile:
        if self.name == "tabulated":
            rows = [list(r) + [0.0] * (3 - len(r)) for r in self.samples or []]
            times = [r[0] for r in rows]
            values = [complex(r[1], r[2]) for r in rows]
            return tabulated(times, values)
        params = {} if self.name == "vacuum" else dict(self.params)
        return make_profile(self.name, **params)


class DiscretizationSpec(_Strict):
    tau: float = Field(..., gt=0)
    horizon: Optional[float] = Field(None, gt=0)
    steps: Optional[int] = Field(None, ge=0)
    sampling: Optional[Literal["cell", "left"]] = None
    blocks: BlockMode = BlockMode.EXACT
    enumerate_steps: Optional[int] = Field(None, ge=0, le=16)
    exact_distribution: bool = False


class ContinuumSpec(_Strict):
    dt: float = Field(..., gt=0)
    t_end: float = Field(..., ge=0)
    save_every: int = Field(1, ge=1)


class CountingSpec(_Strict):
    times: Optional[List[float]] = None
    t_end: float = Field(5.0, ge=0)
    n_times: int = Field(11, ge=1)
    max_counts: int = Field(2, ge=0, le=2)
    points_single: Optional[int] = Field(None, ge=8)
    points_double: Optional[int] = Field(None, ge=8)
    scan_window: Optional[float] = Field(None, gt=0)

    def grid(self) -> List[float]:
        if self.times is not None:
            return [float(t) for t in self.times]
        return np.linspace(0.0, self.t_end, self.n_times).tolist()


class ConvergenceSpec(_Strict):
    tau0: float = Field(1e-2, gt=0)
    levels: int = Field(4, ge=2)
    t_end: float = Field(2.0, gt=0)
    blocks: BlockMode = BlockMode.EXACT
    reference_points: int = Field(4096, ge=8)


class OracleSpec(_Strict):
    t_end: float = Field(10.0, ge=0)
    points: int = Field(101, ge=1)


class RunConfig(_Strict):
    """One experiment."""

    kind: ExperimentKind
    model: ModelSpec
    profile: ProfileSpec = Field(default_factory=lambda: ProfileSpec(params={"gamma_p": 1.0}))
    discretization: Optional[DiscretizationSpec] = None
    continuum: Optional[ContinuumSpec] = None
    counting: CountingSpec = Field(default_factory=CountingSpec)
    convergence: ConvergenceSpec = Field(default_factory=ConvergenceSpec)
    oracle: OracleSpec = Field(default_factory=OracleSpec)
    trajectories: int = Field(1, ge=1)
    seed: int = Field(0, ge=0)
    out_dir: Optional[str] = None
    threads: Optional[int] = Field(None, ge=1)
    renormalize: Optional[bool] = None
    allow_unnormalized_profile: bool = False

    @model_validator(mode="after")
    def _sections(self) -> "RunConfig":
        if self.kind in (ExperimentKind.DISCRETE_COUNTING, ExperimentKind.DISCRETE_HOMODYNE):
            if self.discretization is None:
                raise ValueError(f"kind '{self.kind.value}' needs a 'discretization' section")
        if self.kind in (ExperimentKind.JUMP, ExperimentKind.DIFFUSIVE, ExperimentKind.MASTER):
            if self.continuum is None:
                raise ValueError(f"kind '{self.kind.value}' needs a 'continuum' section")
        if self.kind is ExperimentKind.ORACLE and self.model.preset != "two_level_atom":
            raise ValueError("the oracle experiment needs the two_level_atom model preset")
        return self

    def output_dir(self) -> Path:
        return Path(self.out_dir) if self.out_dir else Path(get_config().output.directory)


def _node_line(node: Optional[yaml.Node], loc: Tuple[Union[str, int], ...]) -> Optional[int]:
    """1-based line of the deepest YAML node along a pydantic error location."""
    line = node.start_mark.line + 1 if node is not None else None
    for key in loc:
        if isinstance(node, yaml.MappingNode):
            match = next((v for k, v in node.value if k.value == key), None)
            if match is None:
                match = next((k for k, _ in node.value if k.value == key), None)
            node = match
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            node = node.value[key]
        else:
            break
        if node is None:
            break
        line = node.start_mark.line + 1
    return line


def parse_run_config(text: str, source: str = "<config>") -> RunConfig:
    """Validate a YAML (or JSON) experiment document.

    Raises:
        ConfigurationError: With one ``line N: field: message`` diagnostic per problem
    """
    try:
        root = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        where = f"line {mark.line + 1}: " if mark is not None else ""
        raise ConfigurationError(f"{source} is not valid YAML", [f"{where}{e}"]) from None
    if not isinstance(data, dict):
        raise ConfigurationError(f"{source} must contain a mapping", ["line 1: expected key: value pairs"])
    try:
        return RunConfig.model_validate(data)
    except PydanticValidationError as e:
        diagnostics = []
        for err in e.errors():
            loc = tuple(err["loc"])
            line = _node_line(root, loc)
            name = ".".join(str(p) for p in loc) or "<root>"
            prefix = f"line {line}: " if line is not None else ""
            diagnostics.append(f"{prefix}{name}: {err['msg']}")
        raise ConfigurationError(f"{source} failed validation with {len(diagnostics)} error(s)", diagnostics) from None


def load_run_config(path: Union[str, Path]) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"configuration file {path} not found")
    return parse_run_config(path.read_text(encoding="utf-8"), source=str(path))


@dataclass
class RunResult:
    kind: ExperimentKind
    out_dir: Path
    files: List[Path]
    manifest: Path
    report: Dict[str, Any]
    wall_time: float


@dataclass
class _Context:
    config: RunConfig
    model: SystemModel
    profile: PhotonProfile
    writer: RunWriter
    progress: Optional[ProgressCallback]
    seeds: Dict[str, Any] = field(default_factory=dict)


def _check_profile(config: RunConfig, profile: PhotonProfile) -> None:
    if profile.is_vacuum:
        return
    if config.allow_unnormalized_profile:
        total = float(profile.tail(0.0))
        if abs(total - 1.0) > get_config().numerics.profile_norm_tol:
            logger.warning(f"profile '{profile.name}' carries mass {total:.9g}")
        return
    profile.check_normalization()


def _horizon(profile: PhotonProfile, needed: float) -> float:
    if profile.analytic_tail:
        return needed
    return max(needed, profile.support_hint)


def _discretization(ctx: _Context):
    spec = ctx.config.discretization
    assert spec is not None
    needed = spec.horizon or (spec.steps * spec.tau if spec.steps else ctx.profile.support_hint)
    horizon = max(_horizon(ctx.profile, needed), spec.tau)
    dprofile = discretize_profile(ctx.profile, spec.tau, horizon, sampling=spec.sampling,
                                  allow_unnormalized=ctx.config.allow_unnormalized_profile)
    steps = len(dprofile) if spec.steps is None else spec.steps
    if steps > len(dprofile):
        raise InvalidArgumentError(f"{steps} steps exceed the discretized horizon of {len(dprofile)} steps")
    blocks = build_collision(ctx.model, spec.tau, spec.blocks.value)
    return spec, dprofile, steps, blocks


def _run_discrete(ctx: _Context) -> Dict[str, Any]:
    kind = (MeasurementKind.COUNTING if ctx.config.kind is ExperimentKind.DISCRETE_COUNTING
            else MeasurementKind.HOMODYNE)
    spec, dprofile, steps, blocks = _discretization(ctx)
    n = ctx.config.trajectories
    seed = ctx.config.seed
    threads = pick(ctx.config.threads, get_config().simulation.threads)
    dumps = get_config().output.max_trajectory_dumps
    ctx.seeds.update({"base_seed": seed, "trajectory_indices": [0, n - 1]})
    logger.info(f"Sampling {n} discrete {kind.value} trajectories, tau={spec.tau:g}, steps={steps}")

    done = 0

    def work(i: int):
        return sample_trajectory(ctx.model, dprofile, kind, steps, seed, blocks=blocks, index=i)

    totals: List[int] = []
    log_probs: List[float] = []
    final_future: List[float] = []
    with ThreadPoolExecutor(max_workers=threads) as pool:
        for i, traj in enumerate(pool.map(work, range(n))):
            if i < dumps:
                ctx.writer.write_csv(f"trajectory_{i:04d}.csv", discrete_frame(traj))
            totals.append(traj.total_counts)
            log_probs.append(traj.log_probability)
            final_future.append(float(traj.p_future[-1]))
            done += 1
            if ctx.progress and (done % 50 == 0 or done == n):
                ctx.progress(f"{kind.value} trajectories", done, n)

    report: Dict[str, Any] = {
        "kind": ctx.config.kind.value,
        "tau": spec.tau,
        "steps": steps,
        "w0": dprofile.weight(0),
        "trajectories": n,
        "mean_log_probability": float(np.mean(log_probs)),
        "mean_final_p_future": float(np.mean(final_future)),
    }
    if kind is MeasurementKind.COUNTING:
        report["count_histogram"] = np.bincount(np.asarray(totals, dtype=int)).tolist()
        if spec.exact_distribution:
            report["exact_count_distribution"] = discrete_count_distribution(
                ctx.model, dprofile, steps, blocks=blocks).tolist()
    if spec.enumerate_steps is not None:
        ctx.writer.write_json("enumeration.json",
                              enumerate_outcomes(ctx.model, dprofile, kind, spec.enumerate_steps, blocks=blocks))
    ctx.writer.write_json("summary.json", report)
    return report


def _run_master(ctx: _Context) -> Dict[str, Any]:
    spec = ctx.config.continuum
    assert spec is not None
    path = integrate_master(ctx.model, ctx.profile, spec.t_end, spec.dt)
    frame = master_frame(path)
    if spec.save_every > 1:
        keep = list(range(0, len(frame), spec.save_every))
        if keep[-1] != len(frame) - 1:
            keep.append(len(frame) - 1)
        frame = frame.iloc[keep]
    ctx.writer.write_csv("master.csv", frame)
    pops = np.real(np.diagonal(path.rho, axis1=-2, axis2=-1))
    peak = np.argmax(pops, axis=0)
    report = {
        "kind": "master",
        "dt": spec.dt,
        "t_end": float(path.times[-1]),
        "max_trace_drift": path.max_trace_drift,
        "population_max": pops.max(axis=0).tolist(),
        "population_argmax_t": path.times[peak].tolist(),
        "final_rho": path.rho[-1],
    }
    ctx.writer.write_json("summary.json", report)
    return report


def _run_unraveling(ctx: _Context) -> Dict[str, Any]:
    spec = ctx.config.continuum
    assert spec is not None
    kind = UnravelingKind.JUMP if ctx.config.kind is ExperimentKind.JUMP else UnravelingKind.DIFFUSIVE
    seed = ctx.config.seed
    n = ctx.config.trajectories
    ctx.seeds.update({"base_seed": seed, "trajectory_indices": [0, n - 1]})

    summary = monte_carlo_average(
        kind, ctx.model, ctx.profile, spec.t_end, spec.dt, n, seed,
        save_every=spec.save_every, threads=ctx.config.threads,
        renormalize=ctx.config.renormalize, progress_callback=ctx.progress,
    )
    ctx.writer.write_csv("summary.csv", summary_frame(summary))

    simulate = simulate_jump_trajectory if kind is UnravelingKind.JUMP else simulate_diffusive_trajectory
    to_frame = jump_frame if kind is UnravelingKind.JUMP else diffusive_frame
    for i in range(min(n, get_config().output.max_trajectory_dumps)):
        path = simulate(ctx.model, ctx.profile, spec.t_end, spec.dt, seed, index=i,
                        renormalize=ctx.config.renormalize)
        ctx.writer.write_csv(f"trajectory_{i:04d}.csv", to_frame(path))

    report = summary_payload(summary)
    ctx.writer.write_json("summary.json", report)
    return report


def stats_report(config: RunConfig) -> Dict[str, Any]:
    """Count-number probabilities over the configured time grid."""
    model = config.model.build()
    profile = config.profile.build()
    _check_profile(config, profile)
    spec = config.counting
    rows = count_table(model, profile, spec.grid(), spec.max_counts,
                       points_single=spec.points_single, points_double=spec.points_double)
    return {
        "kind": "counting-stats",
        "max_counts": spec.max_counts,
        "rows": rows,
        "max_normalization_residual": max(r["normalization_residual"] for r in rows),
    }


def _run_counting(ctx: _Context) -> Dict[str, Any]:
    report = stats_report(ctx.config)
    ctx.writer.write_csv("counting_stats.csv", pd.DataFrame(report["rows"]))
    window = ctx.config.counting.scan_window
    if window is not None:
        nodes, density = single_count_scan(ctx.model, ctx.profile, window, ctx.config.counting.points_single)
        ctx.writer.write_csv("one_count_density.csv", pd.DataFrame({"t1": nodes, "density": density}))
    ctx.writer.write_json("counting_stats.json", report)
    return report


def _continuum_no_count_state(model: SystemModel, profile: PhotonProfile, t: float, points: int) -> np.ndarray:
    """ρ̃ conditioned on no counts in (0, t] from the propagator formulas."""
    tail = float(profile.tail(t))
    rho = np.zeros((model.dim, model.dim), dtype=complex)
    for weight, psi in pure_components(model):
        pair = no_count_pair(model, profile, t, points, psi=psi)
        a, b = pair.alpha_bar, pair.beta_bar
        rho += weight * (tail * np.outer(a, np.conj(a)) + np.outer(b, np.conj(b)))
    return rho / np.trace(rho).real


def convergence_report(config: RunConfig) -> Dict[str, Any]:
    """Discrete no-count state at τ0/2^k against the continuum limit, with the fitted order."""
    model = config.model.build()
    profile = config.profile.build()
    _check_profile(config, profile)
    spec = config.convergence
    sampling = config.discretization.sampling if config.discretization else None

    reference = _continuum_no_count_state(model, profile, spec.t_end, spec.reference_points)
    rows = []
    for level in range(spec.levels):
        tau = spec.tau0 / 2 ** level
        steps = int(round(spec.t_end / tau))
        if abs(steps * tau - spec.t_end) > 1e-9 * spec.t_end:
            raise InvalidArgumentError(f"t_end={spec.t_end:g} is not a multiple of tau={tau:g}")
        dprofile = discretize_profile(profile, tau, _horizon(profile, spec.t_end), sampling=sampling,
                                      allow_unnormalized=config.allow_unnormalized_profile)
        blocks = build_collision(model, tau, spec.blocks.value)
        state = iterate_record([0] * steps, blocks, dprofile, initial_state(model, dprofile))
        error = float(np.linalg.norm(normalized_state(state) - reference))
        rows.append({"tau": tau, "steps": steps, "error": error})
        logger.debug(f"convergence tau={tau:g}: error {error:.3e}")

    taus = np.array([r["tau"] for r in rows])
    errors = np.array([r["error"] for r in rows])
    positive = errors > 0
    order = float(np.polyfit(np.log(taus[positive]), np.log(errors[positive]), 1)[0]) \
        if positive.sum() >= 2 else float("nan")
    pairwise = [math.log(errors[i] / errors[i + 1]) / math.log(2.0)
                if errors[i] > 0 and errors[i + 1] > 0 else float("nan")
                for i in range(len(rows) - 1)]
    logger.info(f"Fitted convergence order {order:.3f} over {len(rows)} step sizes")
    return {
        "kind": "convergence",
        "t_end": spec.t_end,
        "blocks": spec.blocks.value,
        "rows": rows,
        "fitted_order": order,
        "pairwise_orders": pairwise,
        "reference_rho": reference,
    }


def _run_convergence(ctx: _Context) -> Dict[str, Any]:
    report = convergence_report(ctx.config)
    ctx.writer.write_csv("convergence.csv", pd.DataFrame(report["rows"]))
    ctx.writer.write_json("convergence.json", report)
    return report


def _run_oracle(ctx: _Context) -> Dict[str, Any]:
    spec = TwoLevelAtomSpec(ctx.config.model.gamma, ctx.profile)
    times = np.linspace(0.0, ctx.config.oracle.t_end, ctx.config.oracle.points).tolist()
    rows = oracle_table(spec, times)
    ctx.writer.write_csv("oracle_tla.csv", pd.DataFrame(rows))
    report = {"kind": "oracle", "gamma": spec.gamma, "profile": ctx.profile.name, "rows": rows}
    ctx.writer.write_json("oracle_tla.json", report)
    return report


_HANDLERS: Dict[ExperimentKind, Callable[[_Context], Dict[str, Any]]] = {
    ExperimentKind.DISCRETE_COUNTING: _run_discrete,
    ExperimentKind.DISCRETE_HOMODYNE: _run_discrete,
    ExperimentKind.JUMP: _run_unraveling,
    ExperimentKind.DIFFUSIVE: _run_unraveling,
    ExperimentKind.MASTER: _run_master,
    ExperimentKind.COUNTING_STATS: _run_counting,
    ExperimentKind.CONVERGENCE: _run_convergence,
    ExperimentKind.ORACLE: _run_oracle,
}


def apply_overrides(config: RunConfig, **overrides: Any) -> RunConfig:
    """Copy of the config with the non-None overrides applied (and re-validated)."""
    update = {k: v for k, v in overrides.items() if v is not None}
    if not update:
        return config
    data = config.model_dump(mode="json")
    data.update({k: (v.value if isinstance(v, Enum) else v) for k, v in update.items()})
    try:
        return RunConfig.model_validate(data)
    except PydanticValidationError as e:
        raise ConfigurationError("overrides failed validation",
                                 [f"{'.'.join(map(str, err['loc']))}: {err['msg']}" for err in e.errors()]) from None


def run(config: RunConfig, progress_callback: Optional[ProgressCallback] = None) -> RunResult:
    """Run one experiment and write its data files plus manifest.json.

    Args:
        config: Validated experiment configuration
        progress_callback: Optional (message, done, total) callback for batch progress

    Returns:
        RunResult with the written files and the experiment report
    """
    start = time.time()
    model = config.model.build()
    profile = config.profile.build()
    _check_profile(config, profile)
    writer = RunWriter(config.output_dir())
    ctx = _Context(config=config, model=model, profile=profile, writer=writer, progress=progress_callback)
    ctx.seeds["base_seed"] = config.seed

    logger.info(f"Starting {config.kind.value} experiment (d={model.dim}, profile={profile.name})")
    report = _HANDLERS[config.kind](ctx)
    wall = time.time() - start
    manifest = writer.write_manifest(config.model_dump(mode="json"), ctx.seeds, wall)
    logger.info(f"Finished {config.kind.value} experiment in {wall:.2f}s, {len(writer.files)} data file(s)")
    return RunResult(kind=config.kind, out_dir=writer.out_dir, files=list(writer.files),
                     manifest=manifest, report=report, wall_time=wall)
