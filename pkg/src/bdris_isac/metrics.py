"""Communication rate, Fisher information / CRB and the weighted objective."""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np
from scipy import linalg

from .geometry import SteeringBundle
from .manifold import TopologySpec

COND_LIMIT = 1e12
LN2 = math.log(2.0)


class SingularFimError(ArithmeticError):
    """The FIM is singular or too ill-conditioned for a meaningful CRB."""


@dataclass(frozen=True)
class Beamformer:
    w_comm: np.ndarray  # (N_T, K)
    w_sense: np.ndarray  # (N_T, N_T)

    @classmethod
    def from_matrix(cls, w: np.ndarray, n_users: int) -> "Beamformer":
        w = np.asarray(w, dtype=complex)
        return cls(w[:, :n_users].copy(), w[:, n_users:].copy())

    @property
    def w(self) -> np.ndarray:
        return np.concatenate([self.w_comm, self.w_sense], axis=1)

    @property
    def rx_cov(self) -> np.ndarray:
        w = self.w
        return w @ w.conj().T

    @property
    def power(self) -> float:
        w = self.w
        return float(np.real(np.vdot(w, w)))


@dataclass(frozen=True)
class ScatteringMatrix:
    psi: np.ndarray
    topology: TopologySpec


@dataclass(frozen=True)
class FimBlocks:
    f11: np.ndarray
    f12: np.ndarray
    f13: np.ndarray
    f22: np.ndarray
    f23: np.ndarray
    f33: np.ndarray


@dataclass(frozen=True)
class FisherState:
    blocks: FimBlocks
    fim: np.ndarray
    fim_inv: np.ndarray
    j_mat: np.ndarray

    @property
    def n_targets(self) -> int:
        return self.fim.shape[0] // 4

    def j_block(self, row: int, col: int) -> np.ndarray:
        """Q x Q sub-block J_{row,col} with 1-based indices as in the partition of J."""
        q = self.n_targets
        return self.j_mat[(row - 1) * q : row * q, (col - 1) * q : col * q]

    @property
    def crb_trace(self) -> float:
        return float(np.trace(self.fim_inv))


@dataclass(frozen=True)
class AuxComm:
    gammas: np.ndarray
    zetas: np.ndarray
    etas: np.ndarray

    @property
    def e1(self) -> np.ndarray:
        return np.diag(self.zetas)

    @property
    def e2(self) -> np.ndarray:
        return np.diag(self.etas).astype(complex)


def effective_channels(psi: np.ndarray, feed: np.ndarray, users: np.ndarray) -> np.ndarray:
    """G = H^H Psi^H H_c, so that column k is g_k with g_k^H = h_k^H Psi H."""
    if psi.shape[0] != users.shape[0] or psi.shape[1] != feed.shape[0]:
        raise ValueError(f"shape mismatch: psi {psi.shape}, feed {feed.shape}, users {users.shape}")
    return (users.conj().T @ psi @ feed).conj().T


def link_gains(g_cols: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Matrix X with X[k, i] = g_k^H w_i over all K + N_T streams."""
    return g_cols.conj().T @ w


def sinr(beam: Beamformer, g_cols: np.ndarray, noise_comm: float) -> np.ndarray:
    x = link_gains(g_cols, beam.w)
    power = np.abs(x) ** 2
    desired = np.diag(power[:, : g_cols.shape[1]])
    total = power.sum(axis=1) + noise_comm
    return desired / (total - desired)


def sum_rate(gammas) -> float:
    """Sum rate in bits per channel use."""
    return float(np.sum(np.log2(1.0 + np.asarray(gammas, dtype=float))))


def comm_aux_from_gains(x: np.ndarray, noise_comm: float) -> AuxComm:
    """SINRs and the rate-minorizer auxiliaries from the link gain matrix.

    zeta_k = gamma_k / (g_k^H w_k) and eta_k = gamma_k / T_k with
    T_k = sum_i |g_k^H w_i|^2 + noise. A zero direct gain gives zeta_k = 0,
    consistent with gamma_k = 0.
    """
    k = x.shape[0]
    power = np.abs(x) ** 2
    direct = np.diag(x[:, :k])
    desired = np.abs(direct) ** 2
    total = power.sum(axis=1) + noise_comm
    gammas = desired / (total - desired)
    zetas = np.zeros(k, dtype=complex)
    nz = direct != 0
    zetas[nz] = gammas[nz] / direct[nz]
    return AuxComm(gammas=gammas, zetas=zetas, etas=gammas / total)


def _gram_products(bundle: SteeringBundle, transmit_cov: np.ndarray) -> dict:
    """Quadratic forms X^T T Y^* for X, Y in {A, dA_theta, dA_phi}."""
    q = bundle.a_mat.shape[1]
    z = np.concatenate([bundle.a_mat, bundle.da_theta, bundle.da_phi], axis=1)
    m = z.T @ transmit_cov @ z.conj()
    names = ("a", "t", "p")
    return {(ni, nj): m[i * q : (i + 1) * q, j * q : (j + 1) * q] for i, ni in enumerate(names) for j, nj in enumerate(names)}


def _gram_products_from_beams(bundle: SteeringBundle, psi_h_w: np.ndarray) -> dict:
    q = bundle.a_mat.shape[1]
    z = np.concatenate([bundle.a_mat, bundle.da_theta, bundle.da_phi], axis=1)
    v = z.T @ psi_h_w
    m = v @ v.conj().T
    names = ("a", "t", "p")
    return {(ni, nj): m[i * q : (i + 1) * q, j * q : (j + 1) * q] for i, ni in enumerate(names) for j, nj in enumerate(names)}


def _blocks_from_grams(bundle: SteeringBundle, k: dict) -> FimBlocks:
    b, dbt, dbp = bundle.b_mat, bundle.db_theta, bundle.db_phi
    u = bundle.u_mat
    uh = u.conj().T

    def uku(x, y):
        return (u @ k[(x, y)] @ uh).T

    bb = b.conj().T @ b
    f11 = (dbt.conj().T @ dbt) * uku("a", "a") + (dbt.conj().T @ b) * uku("t", "a") \
        + (b.conj().T @ dbt) * uku("a", "t") + bb * uku("t", "t")
    f12 = (dbt.conj().T @ dbp) * uku("a", "a") + (dbt.conj().T @ b) * uku("p", "a") \
        + (b.conj().T @ dbp) * uku("a", "t") + bb * uku("p", "t")
    f22 = (dbp.conj().T @ dbp) * uku("a", "a") + (dbp.conj().T @ b) * uku("p", "a") \
        + (b.conj().T @ dbp) * uku("a", "p") + bb * uku("p", "p")
    f13 = (dbt.conj().T @ b) * (k[("a", "a")] @ uh).T + bb * (k[("a", "t")] @ uh).T
    f23 = (dbp.conj().T @ b) * (k[("a", "a")] @ uh).T + bb * (k[("a", "p")] @ uh).T
    f33 = bb * k[("a", "a")].T
    return FimBlocks(f11, f12, f13, f22, f23, f33)


def fim_blocks(bundle: SteeringBundle, psi: np.ndarray, feed: np.ndarray, rx_cov: np.ndarray) -> FimBlocks:
    """The six complex Q x Q blocks of the FIM for transmit covariance ``rx_cov``."""
    t = psi @ feed @ rx_cov @ feed.conj().T @ psi.conj().T
    return _blocks_from_grams(bundle, _gram_products(bundle, t))


def fim_blocks_from_beams(bundle: SteeringBundle, psi: np.ndarray, feed: np.ndarray, w: np.ndarray) -> FimBlocks:
    """Same as :func:`fim_blocks` with ``rx_cov = w w^H``, without forming N_I x N_I products."""
    return _blocks_from_grams(bundle, _gram_products_from_beams(bundle, psi @ (feed @ w)))


def fim_matrix(blocks: FimBlocks, cpi_len: int, noise_sense: float) -> np.ndarray:
    """Real 4Q x 4Q FIM over (theta, phi, Re alpha, Im alpha)."""
    f11, f12, f13, f22, f23, f33 = (blocks.f11, blocks.f12, blocks.f13, blocks.f22, blocks.f23, blocks.f33)
    re, im = np.real, np.imag
    f = np.block(
        [
            [re(f11), re(f12), re(f13), -im(f13)],
            [re(f12).T, re(f22), re(f23), -im(f23)],
            [re(f13).T, re(f23).T, re(f33), -im(f33)],
            [-im(f13).T, -im(f23).T, -im(f33).T, re(f33)],
        ]
    )
    return (2.0 * cpi_len / noise_sense) * f


def assemble_fim(blocks: FimBlocks, cpi_len: int, noise_sense: float, cond_limit: float = COND_LIMIT) -> FisherState:
    f = fim_matrix(blocks, cpi_len, noise_sense)
    f = 0.5 * (f + f.T)
    evals = np.linalg.eigvalsh(f)
    if not np.all(np.isfinite(evals)) or evals[-1] <= 0 or evals[0] <= evals[-1] / cond_limit:
        raise SingularFimError(
            f"FIM singular or ill-conditioned (eigenvalues in [{evals[0]:.3e}, {evals[-1]:.3e}])"
        )
    cho = linalg.cho_factor(f)
    f_inv = linalg.cho_solve(cho, np.eye(f.shape[0]))
    j = linalg.cho_solve(cho, f_inv)
    return FisherState(blocks=blocks, fim=f, fim_inv=f_inv, j_mat=0.5 * (j + j.T))


def crb_trace(fisher: FisherState) -> float:
    return fisher.crb_trace


def weighted_objective(rate_bits: float, crb: float, vc: float, vs: float, rho: float) -> float:
    """rho * R / V_c - (1 - rho) * tr(F^-1) / V_s, skipping a term whose weight is zero."""
    if vc <= 0 or vs <= 0:
        raise ValueError("normalization constants must be positive")
    val = 0.0
    if rho > 0:
        val += rho * rate_bits / vc
    if rho < 1:
        val -= (1.0 - rho) * crb / vs
    return val


@dataclass(frozen=True)
class Evaluation:
    objective: float
    sum_rate: float
    crb: float
    aux: AuxComm
    fisher: FisherState | None


@dataclass(frozen=True)
class JointProblem:
    """Fixed data of the normalized weighted design on one realization.

    ``vc`` is in bits, matching :func:`sum_rate`. The rate surrogates are
    written with natural logarithms, so the communication weight used by the
    PSCA updates is ``rho / (vc * ln 2)``.
    """

    bundle: SteeringBundle
    feed: np.ndarray
    users: np.ndarray
    topology: TopologySpec
    power: float
    noise_comm: float
    noise_sense: float
    cpi_len: int
    rho: float
    vc: float = 1.0
    vs: float = 1.0

    @property
    def n_users(self) -> int:
        return self.users.shape[1]

    @property
    def comm_weight(self) -> float:
        return self.rho / (self.vc * LN2)

    @property
    def sense_weight(self) -> float:
        return (1.0 - self.rho) / self.vs

    @property
    def uses_comm(self) -> bool:
        return self.rho > 0

    @property
    def uses_sense(self) -> bool:
        return self.rho < 1

    def fisher(self, psi: np.ndarray, w: np.ndarray) -> FisherState:
        return assemble_fim(fim_blocks_from_beams(self.bundle, psi, self.feed, w), self.cpi_len, self.noise_sense)

    def evaluate(self, psi: np.ndarray, w: np.ndarray, *, full: bool = False) -> Evaluation:
        """Objective and its ingredients; ``full`` also computes a term whose weight is zero."""
        g_cols = effective_channels(psi, self.feed, self.users)
        aux = comm_aux_from_gains(link_gains(g_cols, w), self.noise_comm)
        rate = sum_rate(aux.gammas)
        fisher = None
        crb = float("nan")
        if self.uses_sense:
            fisher = self.fisher(psi, w)
            crb = fisher.crb_trace
        elif full:
            try:
                fisher = self.fisher(psi, w)
                crb = fisher.crb_trace
            except SingularFimError:
                pass
        obj = weighted_objective(rate, 0.0 if not self.uses_sense else crb, self.vc, self.vs, self.rho)
        return Evaluation(objective=obj, sum_rate=rate, crb=crb, aux=aux, fisher=fisher)

    def objective(self, psi: np.ndarray, w: np.ndarray) -> float:
        return self.evaluate(psi, w).objective
