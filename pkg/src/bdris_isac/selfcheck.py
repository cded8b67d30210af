"""Quick invariant and oracle self-test on a small instance (``bdris-isac check``)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ao import NormalizationConstants, SolverSettings, build_problem, initialize, run_problem
from .geometry import ScenarioConfig, make_scenario
from .manifold import feasibility_residual, project_power, random_feasible
from .metrics import Beamformer, fim_blocks_from_beams, fim_matrix
from .oracles import fd_complex_gradient, numeric_fim, relative_error
from .psca_psi import analytic_gradient_psi, build_psi_iterate, sigma_blocks
from .psca_w import analytic_gradient_w, build_w_iterate

SMALL = ScenarioConfig(n_tx=2, n_ris=4, n_sensor=3, n_users=2, n_targets=2, topology="fully")


@dataclass(frozen=True)
class CheckResult:
    name: str
    value: float
    tol: float

    @property
    def ok(self) -> bool:
        return bool(np.isfinite(self.value) and self.value <= self.tol)

    def line(self) -> str:
        return f"{'PASS' if self.ok else 'FAIL'}  {self.name:<38s} {self.value:.3e} (tol {self.tol:.0e})"


def _random_point(scn, rng):
    psi = random_feasible(scn.topology, rng)
    n_tx, k = scn.cfg.n_tx, scn.cfg.n_users
    g = rng.standard_normal((n_tx, k + n_tx)) + 1j * rng.standard_normal((n_tx, k + n_tx))
    return psi, Beamformer.from_matrix(project_power(g, scn.cfg.power_budget), k)


def run_checks(seed: int = 0) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    scn = make_scenario(SMALL, seed)
    psi, beam = _random_point(scn, rng)
    problem = build_problem(scn, 0.6, NormalizationConstants(1.0, 1e-3))
    out = []

    fim = fim_matrix(fim_blocks_from_beams(scn.bundle, psi, scn.channels.feed, beam.w), SMALL.cpi_len, SMALL.noise_sense)
    ref = numeric_fim(scn.geometry, scn.targets, psi, scn.channels.feed, beam.w, SMALL.cpi_len, SMALL.noise_sense)
    out.append(CheckResult("FIM vs numeric Jacobian", relative_error(fim, ref), 1e-4))

    it = build_psi_iterate(problem, psi, beam)
    fd = fd_complex_gradient(lambda p: problem.objective(p, beam.w), psi)
    out.append(CheckResult("scattering-matrix gradient", relative_error(analytic_gradient_psi(it), fd), 1e-5))

    wit = build_w_iterate(problem, psi, beam.w)
    fd = fd_complex_gradient(lambda w: problem.objective(psi, w), beam.w)
    out.append(CheckResult("beamformer gradient", relative_error(analytic_gradient_w(wit), fd), 1e-5))

    fisher = problem.fisher(psi, beam.w)
    sig = sigma_blocks(scn.bundle, fisher, SMALL.cpi_len, SMALL.noise_sense)
    psi2, _ = _random_point(scn, rng)
    hw = scn.channels.feed @ beam.w
    lhs = np.real(np.trace(psi2 @ hw @ hw.conj().T @ psi2.conj().T @ sig.total))
    f2 = fim_matrix(fim_blocks_from_beams(scn.bundle, psi2, scn.channels.feed, beam.w), SMALL.cpi_len, SMALL.noise_sense)
    rhs = np.trace(fisher.j_mat @ f2)
    out.append(CheckResult("trace identity Re tr(PCP^H S)=tr(JF)", abs(lhs - rhs) / abs(rhs), 1e-8))

    p0, b0 = initialize(scn, 0.6)
    res = run_problem(problem, p0, b0, SolverSettings(max_outer=20))
    objs = res.trace.objectives
    drop = max([0.0] + [max(0.0, a - b) / max(1.0, abs(a)) for a, b in zip(objs[:-1], objs[1:])])
    out.append(CheckResult("outer objective monotone", drop, 1e-8))
    out.append(CheckResult("final iterate feasibility", feasibility_residual(res.psi, scn.topology), 1e-9))
    out.append(CheckResult("final power residual", abs(res.beam.power - SMALL.power_budget) / SMALL.power_budget, 1e-12))
    return out
