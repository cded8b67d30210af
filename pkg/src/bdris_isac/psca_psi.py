"""PSCA solver for the scattering-matrix subproblem at fixed beamformer."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import SteeringBundle
from .manifold import TopologySpec, project_scattering
from .metrics import (
    AuxComm,
    Beamformer,
    FisherState,
    JointProblem,
    comm_aux_from_gains,
    effective_channels,
    link_gains,
)

LIFT_SLACK = 1e-6


@dataclass(frozen=True)
class SigmaBlocks:
    s11: np.ndarray
    s12: np.ndarray
    s13: np.ndarray
    s22: np.ndarray
    s23: np.ndarray
    s33: np.ndarray
    total: np.ndarray


@dataclass(frozen=True)
class PsiIterate:
    psi: np.ndarray
    theta: np.ndarray
    p1: np.ndarray
    p2: np.ndarray
    mu1: float
    c_mat: np.ndarray

    def argument(self, mu: float | None = None) -> np.ndarray:
        mu = self.mu1 if mu is None else mu
        return self.p2 + (self.p1 + mu * np.eye(self.p1.shape[0])) @ self.theta @ self.c_mat


@dataclass
class SubproblemResult:
    value: np.ndarray
    objectives: list[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False


def comm_aux(psi: np.ndarray, feed: np.ndarray, users: np.ndarray, beam: Beamformer, noise_comm: float) -> AuxComm:
    """gamma_k, zeta_k, eta_k at the current scattering matrix."""
    g_cols = effective_channels(psi, feed, users)
    return comm_aux_from_gains(link_gains(g_cols, beam.w), noise_comm)


def sigma_blocks(bundle: SteeringBundle, fisher: FisherState, cpi_len: int, noise_sense: float) -> SigmaBlocks:
    """Weight matrices that turn tr(J F) into Re tr(Psi C Psi^H Sigma).

    Only the steering data and the partition of J = F^{-2} enter; Psi and
    the transmit covariance do not.
    """
    a, dat, dap = bundle.a_mat, bundle.da_theta, bundle.da_phi
    b, dbt, dbp = bundle.b_mat, bundle.db_theta, bundle.db_phi
    u = bundle.u_mat
    uh = u.conj().T
    j = fisher.j_block
    bh = b.conj().T
    bb = bh @ b

    def sand(left, mid, right, with_u=True):
        # left^* U^H (mid) U right^T, U dropped on the right for the alpha blocks
        r = u @ right.T if with_u else right.T
        return left.conj() @ uh @ mid @ r

    j11, j12, j22 = j(1, 1), j(1, 2), j(2, 2)
    s11 = sand(a, (dbt.conj().T @ dbt) * j11, a) + sand(a, (dbt.conj().T @ b) * j11, dat) \
        + sand(dat, (bh @ dbt) * j11, a) + sand(dat, bb * j11, dat)
    s12 = sand(a, (dbt.conj().T @ dbp) * j12, a) + sand(a, (dbt.conj().T @ b) * j12, dap) \
        + sand(dat, (bh @ dbp) * j12, a) + sand(dat, bb * j12, dap)
    s22 = sand(a, (dbp.conj().T @ dbp) * j22, a) + sand(a, (dbp.conj().T @ b) * j22, dap) \
        + sand(dap, (bh @ dbp) * j22, a) + sand(dap, bb * j22, dap)
    j13 = j(1, 3) + 1j * j(1, 4)
    j23 = j(2, 3) + 1j * j(2, 4)
    s13 = sand(a, (dbt.conj().T @ b) * j13, a, False) + sand(dat, bb * j13, a, False)
    s23 = sand(a, (dbp.conj().T @ b) * j23, a, False) + sand(dap, bb * j23, a, False)
    j33 = j(3, 3) + j(4, 4) + 2j * j(3, 4)
    s33 = a.conj() @ (bb * j33) @ a.T
    total = (2.0 * cpi_len / noise_sense) * (s11 + 2 * s12 + 2 * s13 + s22 + 2 * s23 + s33)
    return SigmaBlocks(s11, s12, s13, s22, s23, s33, total)


def assemble_p_matrices(
    aux: AuxComm | None,
    sigma: SigmaBlocks | None,
    users: np.ndarray,
    feed: np.ndarray,
    w_comm: np.ndarray,
    comm_weight: float,
    sense_weight: float,
) -> tuple[np.ndarray, np.ndarray]:
    """P_1 (Hermitian quadratic coefficient) and P_2 (linear coefficient).

    ``comm_weight`` multiplies natural-log rates, i.e. rho / V_c in nats.
    A ``None`` aux or sigma drops that term (endpoint weightings).
    """
    n = users.shape[0]
    p1 = np.zeros((n, n), dtype=complex)
    p2 = np.zeros((n, n), dtype=complex)
    if aux is not None and comm_weight != 0:
        p1 -= comm_weight * (users * aux.etas) @ users.conj().T
        p2 += comm_weight * (users * aux.zetas.conj()) @ w_comm.conj().T @ feed.conj().T
    if sigma is not None and sense_weight != 0:
        p1 += 0.5 * sense_weight * (sigma.total + sigma.total.conj().T)
    return 0.5 * (p1 + p1.conj().T), p2


def lift_constant(p1: np.ndarray, slack: float = LIFT_SLACK) -> float:
    """Smallest shift making P_1 + mu I positive semidefinite, plus a relative slack."""
    evals = np.linalg.eigvalsh(p1)
    return max(0.0, -float(evals[0])) + slack * (1.0 + float(np.max(np.abs(evals))))


def analytic_gradient_psi(it: PsiIterate) -> np.ndarray:
    """Gradient of the subproblem objective at ``it.psi``, convention d g = Re<grad, dPsi>."""
    return 2.0 * it.p2 + 2.0 * it.p1 @ it.psi @ it.c_mat


def surrogate_value(it: PsiIterate, psi: np.ndarray, mu: float | None = None) -> float:
    """Linearized objective 2 Re tr(Psi^H (P_2 + (P_1 + mu I) Theta C)) maximized by the step."""
    return 2.0 * float(np.real(np.vdot(psi, it.argument(mu))))


def psi_step(it: PsiIterate, topo: TopologySpec, mu: float | None = None) -> np.ndarray:
    return project_scattering(it.argument(mu), topo)


def build_psi_iterate(problem: JointProblem, psi: np.ndarray, beam: Beamformer, mu_multiplier: float = 1.0) -> PsiIterate:
    w = beam.w
    hw = problem.feed @ w
    c_mat = hw @ hw.conj().T
    aux = None
    sigma = None
    if problem.uses_comm:
        aux = comm_aux(psi, problem.feed, problem.users, beam, problem.noise_comm)
    if problem.uses_sense:
        fisher = problem.fisher(psi, w)
        sigma = sigma_blocks(problem.bundle, fisher, problem.cpi_len, problem.noise_sense)
    p1, p2 = assemble_p_matrices(
        aux, sigma, problem.users, problem.feed, beam.w_comm, problem.comm_weight, problem.sense_weight
    )
    mu = mu_multiplier * lift_constant(p1)
    return PsiIterate(psi=psi, theta=psi, p1=p1, p2=p2, mu1=mu, c_mat=c_mat)


def ascent_step(objective, current_value: float, make_candidate, mu0: float, mu_scale: float, max_backtracks: int):
    """Accept the projected step only if the true objective does not drop.

    The sensing surrogate is not a minorizer, so a lift that merely makes
    P_1 + mu I PSD may be too small; mu is doubled until ascent holds.
    Returns (candidate, value, mu) or None when every attempt failed.
    """
    mu = mu0
    tol = 1e-12 * max(1.0, abs(current_value))
    for _ in range(max_backtracks + 1):
        cand = make_candidate(mu)
        val = objective(cand)
        if np.isfinite(val) and val >= current_value - tol:
            return cand, val, mu
        mu = 2.0 * mu + mu_scale
    return None


def solve_psi_subproblem(problem: JointProblem, psi: np.ndarray, beam: Beamformer, settings) -> SubproblemResult:
    """Repeat aux refresh, Theta = Psi and the closed-form projection until the objective settles."""
    w = beam.w

    def objective(p):
        return problem.objective(p, w)

    g = objective(psi)
    res = SubproblemResult(value=psi, objectives=[g])
    for _ in range(settings.max_inner):
        it = build_psi_iterate(problem, psi, beam, settings.mu_multiplier)
        scale = max(float(np.linalg.norm(it.p1, 2)), 1e-30)
        step = ascent_step(
            objective, g, lambda mu: psi_step(it, problem.topology, mu), it.mu1, scale, settings.max_backtracks
        )
        res.iterations += 1
        if step is None:
            res.converged = True
            break
        psi_new, g_new, _ = step
        done = abs(g_new - g) <= settings.inner_tol * max(1.0, abs(g))
        psi, g = psi_new, g_new
        res.objectives.append(g)
        if done:
            res.converged = True
            break
    res.value = psi
    return res
