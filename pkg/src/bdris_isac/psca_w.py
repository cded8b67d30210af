"""PSCA solver for the active beamformer at fixed scattering matrix."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .manifold import project_power
from .metrics import AuxComm, Beamformer, JointProblem, comm_aux_from_gains, effective_channels, link_gains
from .psca_psi import SigmaBlocks, SubproblemResult, ascent_step, lift_constant, sigma_blocks


@dataclass(frozen=True)
class WIterate:
    w: np.ndarray
    q_aux: np.ndarray
    p1t: np.ndarray
    p2t: np.ndarray
    mu2: float
    power: float

    def argument(self, mu: float | None = None) -> np.ndarray:
        mu = self.mu2 if mu is None else mu
        return self.p2t + (self.p1t + mu * np.eye(self.p1t.shape[0])) @ self.q_aux


def w_aux(w: np.ndarray, g_cols: np.ndarray, noise_comm: float) -> AuxComm:
    """Tilde auxiliaries; eta uses the full ||g_k^H W||^2 + noise denominator."""
    return comm_aux_from_gains(link_gains(g_cols, w), noise_comm)


def sigma_tilde(problem: JointProblem, psi: np.ndarray, w: np.ndarray) -> SigmaBlocks:
    return sigma_blocks(problem.bundle, problem.fisher(psi, w), problem.cpi_len, problem.noise_sense)


def assemble_p_tilde(
    aux: AuxComm | None,
    sigma_t: SigmaBlocks | None,
    g_cols: np.ndarray,
    psi: np.ndarray,
    feed: np.ndarray,
    comm_weight: float,
    sense_weight: float,
) -> tuple[np.ndarray, np.ndarray]:
    n_tx, k = g_cols.shape
    p1t = np.zeros((n_tx, n_tx), dtype=complex)
    p2t = np.zeros((n_tx, k + n_tx), dtype=complex)
    if aux is not None and comm_weight != 0:
        p1t -= comm_weight * (g_cols * aux.etas) @ g_cols.conj().T
        p2t[:, :k] = comm_weight * g_cols * aux.zetas.conj()
    if sigma_t is not None and sense_weight != 0:
        ph = psi @ feed
        p1t += 0.5 * sense_weight * ph.conj().T @ (sigma_t.total + sigma_t.total.conj().T) @ ph
    return 0.5 * (p1t + p1t.conj().T), p2t


def analytic_gradient_w(it: WIterate) -> np.ndarray:
    """Gradient at ``it.w`` with d g = Re<grad, dW>."""
    return 2.0 * it.p2t + 2.0 * it.p1t @ it.w


def surrogate_value(it: WIterate, w: np.ndarray, mu: float | None = None) -> float:
    """Lifted quadratic-form surrogate in W with auxiliary Q fixed at ``it.q_aux``."""
    mu = it.mu2 if mu is None else mu
    lifted = it.p1t + mu * np.eye(it.p1t.shape[0])
    q = it.q_aux
    val = 2 * np.real(np.vdot(w, it.p2t)) + 2 * np.real(np.trace(q @ w.conj().T @ lifted))
    return float(val - np.real(np.trace(q @ q.conj().T @ lifted)))


def w_step(it: WIterate, mu: float | None = None) -> np.ndarray:
    return project_power(it.argument(mu), it.power)


def build_w_iterate(problem: JointProblem, psi: np.ndarray, w: np.ndarray, mu_multiplier: float = 1.0) -> WIterate:
    g_cols = effective_channels(psi, problem.feed, problem.users)
    aux = w_aux(w, g_cols, problem.noise_comm) if problem.uses_comm else None
    sig = sigma_tilde(problem, psi, w) if problem.uses_sense else None
    p1t, p2t = assemble_p_tilde(aux, sig, g_cols, psi, problem.feed, problem.comm_weight, problem.sense_weight)
    mu = mu_multiplier * lift_constant(p1t)
    return WIterate(w=w, q_aux=w, p1t=p1t, p2t=p2t, mu2=mu, power=problem.power)


def solve_w_subproblem(problem: JointProblem, psi: np.ndarray, beam: Beamformer, settings) -> SubproblemResult:
    k = problem.n_users

    def objective(w):
        return problem.objective(psi, w)

    w = beam.w
    g = objective(w)
    res = SubproblemResult(value=beam, objectives=[g])
    for _ in range(settings.max_inner):
        it = build_w_iterate(problem, psi, w, settings.mu_multiplier)
        scale = max(float(np.linalg.norm(it.p1t, 2)), 1e-30)
        step = ascent_step(objective, g, lambda mu: w_step(it, mu), it.mu2, scale, settings.max_backtracks)
        res.iterations += 1
        if step is None:
            res.converged = True
            break
        w_new, g_new, _ = step
        done = abs(g_new - g) <= settings.inner_tol * max(1.0, abs(g))
        w, g = w_new, g_new
        res.objectives.append(g)
        if done:
            res.converged = True
            break
    res.value = Beamformer.from_matrix(w, k)
    return res
