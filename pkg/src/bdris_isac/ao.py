"""Alternating optimization driver: normalization, initialization and the outer loop."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
import logging
import time

import numpy as np

from .geometry import Scenario
from .manifold import DegenerateProjectionError, project_power, project_scattering, random_feasible
from .metrics import Beamformer, JointProblem, SingularFimError, effective_channels
from .psca_psi import solve_psi_subproblem
from .psca_w import solve_w_subproblem

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverSettings:
    outer_tol: float = 1e-3
    inner_tol: float = 1e-5
    max_outer: int = 200
    max_inner: int = 100
    mu_multiplier: float = 1.0
    max_backtracks: int = 40

    def __post_init__(self):
        if not (self.outer_tol > 0 and self.inner_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.max_outer < 1 or self.max_inner < 1:
            raise ValueError("iteration limits must be positive")
        if self.mu_multiplier < 1:
            raise ValueError("mu_multiplier must be >= 1")


@dataclass(frozen=True)
class NormalizationConstants:
    vc: float  # best sum rate, bits per channel use
    vs: float  # best CRB trace


@dataclass(frozen=True)
class OuterRecord:
    objective: float
    sum_rate: float
    crb: float
    psi_objectives: tuple[float, ...]
    w_objectives: tuple[float, ...]
    wall_time: float

    @property
    def psi_iterations(self) -> int:
        return len(self.psi_objectives) - 1

    @property
    def w_iterations(self) -> int:
        return len(self.w_objectives) - 1


@dataclass
class RunTrace:
    initial_objective: float
    records: list[OuterRecord] = field(default_factory=list)
    converged: bool = False

    @property
    def objectives(self) -> list[float]:
        return [self.initial_objective] + [r.objective for r in self.records]

    @property
    def n_outer(self) -> int:
        return len(self.records)


@dataclass(frozen=True)
class RunResult:
    psi: np.ndarray
    beam: Beamformer
    trace: RunTrace
    problem: JointProblem

    @property
    def final(self) -> OuterRecord | None:
        return self.trace.records[-1] if self.trace.records else None


class NumericalAbort(RuntimeError):
    """A run had to stop because the sensing term became undefined."""


def build_problem(scn: Scenario, rho: float | None = None, norm: NormalizationConstants | None = None) -> JointProblem:
    cfg = scn.cfg
    norm = norm or NormalizationConstants(1.0, 1.0)
    return JointProblem(
        bundle=scn.bundle,
        feed=scn.channels.feed,
        users=scn.channels.users,
        topology=scn.topology,
        power=cfg.power_budget,
        noise_comm=cfg.noise_comm,
        noise_sense=cfg.noise_sense,
        cpi_len=cfg.cpi_len,
        rho=cfg.weight_rho if rho is None else rho,
        vc=norm.vc,
        vs=norm.vs,
    )


def matched_scattering_seed(scn: Scenario) -> np.ndarray:
    """Rank-one seed aligning the feed output with the users' and targets' directions."""
    h_c, feed, a = scn.channels.users, scn.channels.feed, scn.bundle.a_mat
    out_dir = h_c.sum(axis=1) + a.conj().sum(axis=1)
    in_dir = feed.sum(axis=1)
    return np.outer(out_dir, in_dir.conj())


def initialize(scn: Scenario, rho: float | None = None, rng: np.random.Generator | None = None):
    """Feasible starting point (Psi0, W0).

    W_c starts as MRT on the effective channels, W_s as a Gaussian draw; the
    two halves are normalized and weighted by rho and 1 - rho.
    """
    cfg = scn.cfg
    rho = cfg.weight_rho if rho is None else rho
    rng = scn.init_rng() if rng is None else rng
    w_s = (rng.standard_normal((cfg.n_tx, cfg.n_tx)) + 1j * rng.standard_normal((cfg.n_tx, cfg.n_tx))) / np.sqrt(2)
    fallback = random_feasible(scn.topology, rng)

    psi = fallback
    if cfg.psi_init == "matched":
        try:
            psi = project_scattering(matched_scattering_seed(scn), scn.topology)
        except DegenerateProjectionError:
            log.warning("matched initialization degenerate, using random feasible scattering matrix")

    w_c = effective_channels(psi, scn.channels.feed, scn.channels.users)
    parts = []
    for weight, block in ((rho, w_c), (1.0 - rho, w_s)):
        if weight > 0 and np.any(block):
            parts.append(weight * project_power(block, cfg.power_budget))
        else:
            parts.append(np.zeros_like(block))
    w0 = project_power(np.concatenate(parts, axis=1), cfg.power_budget)
    return psi, Beamformer.from_matrix(w0, cfg.n_users)


def run_problem(problem: JointProblem, psi: np.ndarray, beam: Beamformer, settings: SolverSettings) -> RunResult:
    """Alternate the two PSCA solvers from (psi, beam) until the objective settles."""
    try:
        obj = problem.objective(psi, beam.w)
    except SingularFimError as exc:
        raise NumericalAbort(f"initial point: {exc}") from exc
    trace = RunTrace(initial_objective=obj)
    for _ in range(settings.max_outer):
        t0 = time.perf_counter()
        try:
            psi_res = solve_psi_subproblem(problem, psi, beam, settings)
            psi = psi_res.value
            w_res = solve_w_subproblem(problem, psi, beam, settings)
            beam = w_res.value
            ev = problem.evaluate(psi, beam.w, full=True)
        except SingularFimError as exc:
            raise NumericalAbort(f"outer iteration {trace.n_outer + 1}: {exc}") from exc
        trace.records.append(
            OuterRecord(
                objective=ev.objective,
                sum_rate=ev.sum_rate,
                crb=ev.crb,
                psi_objectives=tuple(psi_res.objectives),
                w_objectives=tuple(w_res.objectives),
                wall_time=time.perf_counter() - t0,
            )
        )
        if abs(ev.objective - obj) <= settings.outer_tol:
            trace.converged = True
            obj = ev.objective
            break
        obj = ev.objective
    if not trace.converged:
        log.info("AO stopped after %d outer iterations without meeting tolerance", trace.n_outer)
    return RunResult(psi=psi, beam=beam, trace=trace, problem=problem)


def run(
    scn: Scenario,
    settings: SolverSettings = SolverSettings(),
    norm: NormalizationConstants | None = None,
    rho: float | None = None,
) -> RunResult:
    """Full AO-PSCA run on one realization; normalizers are computed when not given."""
    rho = scn.cfg.weight_rho if rho is None else rho
    if norm is None:
        norm = compute_normalizers(scn, settings)
    problem = build_problem(scn, rho, norm)
    psi, beam = initialize(scn, rho)
    return run_problem(problem, psi, beam, settings)


def _endpoint_run(scn: Scenario, settings: SolverSettings, rho: float, max_rescales: int = 5) -> RunResult:
    # The endpoint objective is rescaled by its own current value so that the
    # absolute outer tolerance means the same thing as in the weighted run.
    # Rescaling does not move the maximizer, only the stopping test, so the run
    # is restarted from its own end point until the scale has settled.
    psi, beam = initialize(scn, rho)
    res = None
    for _ in range(max_rescales + 1):
        probe = build_problem(scn, rho).evaluate(psi, beam.w)
        if rho == 1.0:
            prov = NormalizationConstants(vc=probe.sum_rate if probe.sum_rate > 0 else 1.0, vs=1.0)
        else:
            prov = NormalizationConstants(vc=1.0, vs=probe.crb)
        res = run_problem(build_problem(scn, rho, prov), psi, beam, settings)
        psi, beam = res.psi, res.beam
        if res.trace.n_outer <= 1:
            break
    return res


_NORMALIZER_CACHE: dict = {}


def _cache_key(scn: Scenario, settings: SolverSettings):
    return (replace(scn.cfg, weight_rho=0.5), scn.seed, scn.topology, settings)


def compute_normalizers(scn: Scenario, settings: SolverSettings = SolverSettings(), use_cache: bool = True) -> NormalizationConstants:
    """V_c from the communication-only run and V_s from the sensing-only run on ``scn``."""
    key = _cache_key(scn, settings)
    if use_cache and key in _NORMALIZER_CACHE:
        return _NORMALIZER_CACHE[key]
    comm = _endpoint_run(scn, settings, 1.0)
    sense = _endpoint_run(scn, settings, 0.0)
    vc, vs = comm.final.sum_rate, sense.final.crb
    if not (vc > 0 and vs > 0):
        raise NumericalAbort(f"non-positive normalizer (vc={vc}, vs={vs})")
    norm = NormalizationConstants(vc=vc, vs=vs)
    if use_cache:
        _NORMALIZER_CACHE[key] = norm
    return norm


def clear_normalizer_cache() -> None:
    _NORMALIZER_CACHE.clear()
