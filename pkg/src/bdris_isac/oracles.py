"""Brute-force reference computations used by the test-suite and ``bdris-isac check``.

Nothing here goes through the closed-form block formulas: the FIM is built by
differentiating the noiseless echo numerically, gradients by finite differences.
"""

from __future__ import annotations

import numpy as np

from .geometry import ArrayGeometry, TargetParams, steering


def echo_mean(geom: ArrayGeometry, xi: np.ndarray, psi: np.ndarray, feed: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Noiseless echo B U A^T Psi H W for the stacked parameters xi = (theta, phi, Re a, Im a)."""
    q = xi.size // 4
    tp = TargetParams(xi[:q], xi[q : 2 * q], xi[2 * q : 3 * q] + 1j * xi[3 * q :])
    sb = steering(geom, tp)
    return sb.b_mat @ sb.u_mat @ sb.a_mat.T @ psi @ feed @ w


def numeric_fim(
    geom: ArrayGeometry,
    tp: TargetParams,
    psi: np.ndarray,
    feed: np.ndarray,
    w: np.ndarray,
    cpi_len: int,
    noise_sense: float,
    step: float = 1e-6,
) -> np.ndarray:
    """FIM (2M / sigma^2) Re tr(dV^H dV) with central-difference Jacobians of the echo mean."""
    xi = np.concatenate([tp.azimuths, tp.elevations, tp.coeffs.real, tp.coeffs.imag]).astype(float)
    jac = []
    for i in range(xi.size):
        e = np.zeros_like(xi)
        e[i] = step
        jac.append((echo_mean(geom, xi + e, psi, feed, w) - echo_mean(geom, xi - e, psi, feed, w)) / (2 * step))
    n = xi.size
    f = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            f[i, j] = np.real(np.vdot(jac[i], jac[j]))
    return (2.0 * cpi_len / noise_sense) * f


def fd_complex_gradient(fun, x: np.ndarray, step: float = 1e-6) -> np.ndarray:
    """Gradient G with d f = Re <G, dX>, by central differences on real and imaginary parts."""
    x = np.asarray(x, dtype=complex)
    grad = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        e = np.zeros_like(x)
        e[idx] = step
        d_re = (fun(x + e) - fun(x - e)) / (2 * step)
        d_im = (fun(x + 1j * e) - fun(x - 1j * e)) / (2 * step)
        grad[idx] = d_re + 1j * d_im
    return grad


def random_symmetric_unitary(n: int, rng: np.random.Generator, size: int) -> np.ndarray:
    """``size`` samples V e^{jD} V^T with V Haar-unitary, stacked as (size, n, n)."""
    g = (rng.standard_normal((size, n, n)) + 1j * rng.standard_normal((size, n, n))) / np.sqrt(2)
    v, r = np.linalg.qr(g)
    d = np.diagonal(r, axis1=1, axis2=2)
    v = v * (d / np.abs(d))[:, None, :]
    phases = np.exp(1j * rng.uniform(0, 2 * np.pi, (size, 1, n)))
    return (v * phases) @ np.transpose(v, (0, 2, 1))


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))
