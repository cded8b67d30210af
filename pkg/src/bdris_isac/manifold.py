"""Closed-form projections onto the scattering-matrix sets and the power sphere.

The three BD-RIS circuit topologies share one description: a partition of the
N_I ports into groups, each group carrying a complex symmetric unitary block.
Single-connected is the all-ones partition, fully-connected is one group.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

RANK_TOL = 1e-10


class DegenerateProjectionError(ValueError):
    """Raised when a projection argument carries no information (zero block)."""


@dataclass(frozen=True)
class TopologySpec:
    group_sizes: tuple[int, ...]

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.group_sizes)
        if not sizes or any(s < 1 for s in sizes):
            raise ValueError(f"group sizes must be positive, got {self.group_sizes}")
        object.__setattr__(self, "group_sizes", sizes)

    @classmethod
    def single(cls, n: int) -> "TopologySpec":
        return cls((1,) * n)

    @classmethod
    def fully(cls, n: int) -> "TopologySpec":
        return cls((n,))

    @classmethod
    def uniform(cls, n: int, n_groups: int) -> "TopologySpec":
        if n_groups < 1 or n % n_groups:
            raise ValueError(f"cannot split {n} ports into {n_groups} equal groups")
        return cls((n // n_groups,) * n_groups)

    @property
    def n_ports(self) -> int:
        return sum(self.group_sizes)

    @property
    def n_groups(self) -> int:
        return len(self.group_sizes)

    @property
    def kind(self) -> str:
        if all(s == 1 for s in self.group_sizes):
            return "single"
        if self.n_groups == 1:
            return "fully"
        return "group"

    def slices(self) -> list[slice]:
        bounds = np.concatenate([[0], np.cumsum(self.group_sizes)])
        return [slice(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:])]

    def mask(self) -> np.ndarray:
        """Block-of-ones pattern used to extract the diagonal blocks."""
        m = np.zeros((self.n_ports, self.n_ports))
        for sl in self.slices():
            m[sl, sl] = 1.0
        return m


def symuni(q: np.ndarray, rank_tol: float = RANK_TOL) -> np.ndarray:
    """Nearest complex symmetric unitary matrix to ``q`` in Frobenius norm.

    Uses the SVD of the symmetrised matrix ``q + q.T = U S V^H``. Singular
    directions below ``rank_tol * s_max`` are completed with the conjugated
    right singular vectors so the result stays symmetric.

    Parameters
    ----------
    q : ndarray, shape (n, n)
        Arbitrary complex square matrix.
    rank_tol : float
        Relative threshold on the singular values defining the rank.

    Returns
    -------
    ndarray, shape (n, n)
        ``Z`` with ``Z = Z.T`` and ``Z^H Z = I``.
    """
    q = np.asarray(q, dtype=complex)
    if q.ndim != 2 or q.shape[0] != q.shape[1]:
        raise ValueError(f"symuni expects a square matrix, got shape {q.shape}")
    q_sym = q + q.T
    u, s, vh = np.linalg.svd(q_sym)
    if not np.all(np.isfinite(s)) or s[0] == 0.0:
        raise DegenerateProjectionError("symmetric part of the argument is zero")
    rank = int(np.count_nonzero(s > rank_tol * s[0]))
    if rank < q.shape[0]:
        u = np.concatenate([u[:, :rank], vh[rank:, :].T], axis=1)
    return _polish(u @ vh)


def _polish(z: np.ndarray) -> np.ndarray:
    # Singular vectors of weak directions carry O(eps * cond) errors, which show up
    # as asymmetry. For symmetric X, (X X^H)^{-1/2} X is symmetric and unitary; with
    # X already unitary to ~1e-9 the inverse root is perfectly conditioned.
    x = 0.5 * (z + z.T)
    lam, e = np.linalg.eigh(x @ x.conj().T)
    z = (e * lam ** -0.5) @ e.conj().T @ x
    return 0.5 * (z + z.T)


def project_scattering(q: np.ndarray, topo: TopologySpec) -> np.ndarray:
    """Project ``q`` onto the feasible set of ``topo``; off-block entries are ignored."""
    q = np.asarray(q, dtype=complex)
    n = topo.n_ports
    if q.shape != (n, n):
        raise ValueError(f"expected a {n}x{n} matrix, got {q.shape}")
    if topo.kind == "single":
        d = np.diag(q)
        mag = np.abs(d)
        if np.any(mag == 0.0):
            raise DegenerateProjectionError("zero diagonal entry in single-connected projection")
        return np.diag(d / mag)
    out = np.zeros_like(q)
    for sl in topo.slices():
        out[sl, sl] = symuni(q[sl, sl])
    return out


def project_power(z: np.ndarray, power: float) -> np.ndarray:
    """Radial projection onto the sphere ``tr(W W^H) = power``."""
    if power <= 0:
        raise ValueError("power budget must be positive")
    z = np.asarray(z, dtype=complex)
    energy = float(np.real(np.vdot(z, z)))
    if energy == 0.0 or not np.isfinite(energy):
        raise DegenerateProjectionError("cannot project a zero beamformer onto the power sphere")
    return np.sqrt(power / energy) * z


def feasibility_residual(psi: np.ndarray, topo: TopologySpec) -> float:
    """Largest violation of block-diagonality, symmetry and unitarity."""
    psi = np.asarray(psi, dtype=complex)
    off_block = np.linalg.norm(psi * (1.0 - topo.mask()))
    res = [off_block]
    for sl in topo.slices():
        blk = psi[sl, sl]
        res.append(np.linalg.norm(blk - blk.T))
        res.append(np.linalg.norm(blk.conj().T @ blk - np.eye(blk.shape[0])))
    return float(max(res))


def random_feasible(topo: TopologySpec, rng: np.random.Generator) -> np.ndarray:
    """Random point of the feasible set: ``V diag(e^{jd}) V^T`` per block with V Haar-unitary."""
    n = topo.n_ports
    out = np.zeros((n, n), dtype=complex)
    for sl in topo.slices():
        m = sl.stop - sl.start
        g = (rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))) / np.sqrt(2)
        v, r = np.linalg.qr(g)
        v = v * (np.diag(r) / np.abs(np.diag(r)))
        phases = np.exp(1j * rng.uniform(0, 2 * np.pi, m))
        out[sl, sl] = (v * phases) @ v.T
    return out
