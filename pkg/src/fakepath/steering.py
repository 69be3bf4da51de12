"""Dirichlet kernel, ULA steering vectors and generalized Vandermonde matrices.

Conventions: for N = 2n + 1 antennas the steering vector has entries
exp(i 2 pi k tau) / sqrt(N), k = -n..n, and its derivative in tau is the
first-order steering vector. With this choice

    V0^H V0 = D_N(tau_i - tau_j),   V1^H V1 = -D_N''(tau_i - tau_j).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

MAX_KERNEL_DERIVATIVE = 4


def check_order(n_antennas: int) -> int:
    n_antennas = int(n_antennas)
    if n_antennas < 3 or n_antennas % 2 == 0:
        raise ValueError(f"number of antennas must be odd and >= 3, got {n_antennas}")
    return n_antennas


def _indices(n_antennas: int) -> np.ndarray:
    n = (n_antennas - 1) // 2
    return np.arange(-n, n + 1)


def dirichlet(n_antennas: int, t, p: int = 0):
    """p-th derivative of the normalized Dirichlet kernel.

    D_N^{(p)}(t) = (1/N) sum_{k=-n}^{n} (-i 2 pi k)^p exp(-i 2 pi k t), evaluated
    as the real sum (1/N)[1{p=0} + 2 sum_{k>=1} (2 pi k)^p cos(2 pi k t + p pi/2)].

    Args:
        n_antennas: Odd kernel order N.
        t: Scalar or array of evaluation points.
        p: Derivative order in 0..4.

    Returns:
        Real value(s) with the shape of ``t``.
    """
    N = check_order(n_antennas)
    if p not in range(MAX_KERNEL_DERIVATIVE + 1):
        raise ValueError(f"derivative order must be in 0..{MAX_KERNEL_DERIVATIVE}, got {p}")
    t = np.asarray(t, dtype=float)
    k = np.arange(1, (N - 1) // 2 + 1, dtype=float)
    phase = 2.0 * np.pi * np.multiply.outer(t, k) + p * np.pi / 2.0
    val = 2.0 * np.cos(phase) @ ((2.0 * np.pi * k) ** p)
    if p == 0:
        val = val + 1.0
    val = val / N
    return float(val) if val.ndim == 0 else val


def dirichlet_at_zero(n_antennas: int, p: int) -> float:
    """Exact D_N^{(p)}(0) from the finite sum."""
    return dirichlet(n_antennas, 0.0, p)


def dirichlet_sup_near_zero(n_antennas: int, p: int, radius: float) -> float:
    """sup over |eps| <= radius of |D_N^{(p)}(eps)|.

    A uniform grid of max(1024, 64 N) points on [0, radius] is followed by a
    bounded scalar refinement around the best grid point. |D_N^{(p)}| is even,
    so the half interval suffices.
    """
    N = check_order(n_antennas)
    if not 0.0 <= radius < 0.5:
        raise ValueError("radius must lie in [0, 1/2)")
    if radius == 0.0:
        return abs(dirichlet(N, 0.0, p))
    grid = np.linspace(0.0, radius, max(1024, 64 * N))
    vals = np.abs(dirichlet(N, grid, p))
    i = int(np.argmax(vals))
    best = float(vals[i])
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    if hi > lo:
        res = minimize_scalar(lambda x: -abs(dirichlet(N, x, p)), bounds=(lo, hi),
                              method="bounded", options={"xatol": 1e-12})
        best = max(best, -float(res.fun))
    return best


def steering_vector(n_antennas: int, tau: float, p: int = 0) -> np.ndarray:
    """Array response (p=0) or its tau-derivative (p=1) at ``tau``."""
    return vandermonde(n_antennas, [tau], p)[:, 0]


def vandermonde(n_antennas: int, taus, p: int = 0) -> np.ndarray:
    """N x L matrix whose columns are the p-th order steering vectors."""
    N = check_order(n_antennas)
    if p not in (0, 1):
        raise ValueError("steering vectors are defined for p in {0, 1}")
    k = _indices(N).astype(float)
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    V = np.exp(2j * np.pi * np.outer(k, taus)) / np.sqrt(N)
    if p == 1:
        V = (2j * np.pi * k)[:, None] * V
    return V


def derivative_scale(n_antennas: int) -> float:
    """sqrt(-D_N''(0)), the norm of every first-order steering vector."""
    N = check_order(n_antennas)
    return float(np.sqrt(np.pi ** 2 / 3.0 * (N - 1) * (N + 1)))


def concat_w(n_antennas: int, taus) -> np.ndarray:
    """[V0, V1 / sqrt(-D_N''(0))]; every column has unit norm."""
    return np.hstack([vandermonde(n_antennas, taus, 0),
                      vandermonde(n_antennas, taus, 1) / derivative_scale(n_antennas)])


@dataclass(frozen=True)
class SteeringEnsemble:
    n_antennas: int
    taus: np.ndarray
    v0_matrix: np.ndarray
    v1_matrix: np.ndarray
    w_matrix: np.ndarray

    @classmethod
    def build(cls, n_antennas: int, taus) -> "SteeringEnsemble":
        taus = np.atleast_1d(np.asarray(taus, dtype=float))
        V0 = vandermonde(n_antennas, taus, 0)
        V1 = vandermonde(n_antennas, taus, 1)
        W = np.hstack([V0, V1 / derivative_scale(n_antennas)])
        return cls(n_antennas, taus, V0, V1, W)
