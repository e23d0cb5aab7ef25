"""Differentiation and quadrature helpers on the parameter grids.

Three grids are used:

* periodic: ``sigma_k = 2 pi k / N`` (closed curves);
* staggered half-period: ``sigma_k = (k + 1/2) pi / N`` on ``(0, pi)``,
  extended to a full period by a reflection with a declared parity
  (meridians of surfaces of revolution, never sampling the axis);
* uniform open interval with finite-difference stencils (open curves).
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np


def periodic_grid(N: int) -> np.ndarray:
    return 2 * np.pi * np.arange(N) / N


def staggered_grid(N: int) -> np.ndarray:
    return (np.arange(N) + 0.5) * np.pi / N


def _wavenumbers(M: int) -> np.ndarray:
    k = np.fft.fftfreq(M, d=1.0 / M)
    if M % 2 == 0:
        k[M // 2] = 0.0  # drop the unpaired Nyquist mode for odd derivatives
    return k


def fourier_derivative(F: np.ndarray, order: int = 1, axis: int = 0) -> np.ndarray:
    """Spectral derivative in a 2 pi periodic parameter sampled uniformly along ``axis``."""
    F = np.moveaxis(np.asarray(F, dtype=float), axis, 0)
    M = F.shape[0]
    k = _wavenumbers(M).reshape((M,) + (1,) * (F.ndim - 1))
    out = F
    for _ in range(order):
        out = np.real(np.fft.ifft(1j * k * np.fft.fft(out, axis=0), axis=0))
    return np.moveaxis(out, 0, axis)


def fourier_derivatives12(F: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """First and second spectral derivatives along axis 0 from one transform."""
    F = np.asarray(F, dtype=float)
    M = F.shape[0]
    c = np.fft.rfft(F, axis=0)
    k = np.arange(c.shape[0]).reshape((-1,) + (1,) * (F.ndim - 1)).astype(float)
    k1 = k.copy()
    if M % 2 == 0:
        k1[-1] = 0.0
    d1 = np.fft.irfft(1j * k1 * c, n=M, axis=0)
    d2 = np.fft.irfft(-k * k * c, n=M, axis=0)
    return d1, d2


def reflect(F: np.ndarray, parity) -> np.ndarray:
    """Extend samples on the staggered half grid to a full period.

    ``parity`` broadcasts against ``F.shape[1:]`` and is +1 for even and -1
    for odd components under ``sigma -> 2 pi - sigma``.
    """
    F = np.asarray(F, dtype=float)
    return np.concatenate([F, np.asarray(parity) * F[::-1]], axis=0)


def half_derivative(F: np.ndarray, parity, order: int = 1) -> np.ndarray:
    """Spectral derivative on the staggered half grid with the given parity."""
    N = F.shape[0]
    return fourier_derivative(reflect(F, parity), order)[:N]


def fourier_interpolate(F: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Evaluate the trigonometric interpolant of periodic samples ``F`` at ``s``.

    For even M the Nyquist mode enters as a cosine (the symmetric split that
    keeps the interpolant real).
    """
    F = np.asarray(F, dtype=float)
    M = F.shape[0]
    c = np.fft.rfft(F, axis=0) / M
    K = c.shape[0]
    w = np.full(K, 2.0)
    w[0] = 1.0
    if M % 2 == 0:
        w[-1] = 1.0
    c = c * w.reshape((K,) + (1,) * (F.ndim - 1))
    s = np.asarray(s, dtype=float)
    z = np.exp(1j * s.ravel())
    # powers z^k by repeated multiplication; error grows like k * eps
    Z = np.empty((z.size, K), dtype=complex)
    Z[:, 0] = 1.0
    if K > 1:
        Z[:, 1:] = np.cumprod(np.broadcast_to(z[:, None], (z.size, K - 1)), axis=1)
    out = np.real(np.tensordot(Z, c, axes=(1, 0)))
    return out.reshape(s.shape + F.shape[1:])


def fourier_antiderivative(F: np.ndarray) -> tuple[np.ndarray, float]:
    """Periodic part of the antiderivative and the mean of ``F``.

    The full antiderivative is ``P(sigma) + mean * sigma`` with ``P`` periodic.
    """
    M = F.shape[0]
    c = np.fft.fft(F, axis=0)
    k = _wavenumbers(M)
    mean = np.real(c[0]) / M
    safe = np.where(k == 0, 1.0, k)
    ci = np.where(k == 0, 0.0, c / (1j * safe))
    return np.real(np.fft.ifft(ci)), mean


@lru_cache(maxsize=32)
def sine_quadrature_weights(N: int) -> np.ndarray:
    """Weights q with sum(q * F) = integral over (0, pi) of F for odd-extended F.

    Exact for sine polynomials of degree <= N sampled on the staggered grid.
    """
    s = staggered_grid(N)
    m = np.arange(1, N + 1, 2)
    c = np.where(m < N, 2.0 / N, 1.0 / N)
    return np.sum((2.0 / m * c)[:, None] * np.sin(np.outer(m, s)), axis=0)


def fornberg_weights(z: float, x: np.ndarray, m: int) -> np.ndarray:
    """Finite-difference weights for derivatives 0..m at ``z`` from nodes ``x``."""
    n = len(x)
    c = np.zeros((n, m + 1))
    c1, c4 = 1.0, x[0] - z
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2, c5, c4 = 1.0, c4, x[i] - z
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c


@lru_cache(maxsize=32)
def fd_matrices(N: int, spacing: float) -> tuple[np.ndarray, np.ndarray]:
    """4th-order first and second derivative matrices on a uniform open grid.

    Interior rows use 5-point centered stencils; the two rows nearest each
    end use 6-point one-sided stencils.
    """
    x = np.arange(N) * spacing
    D1 = np.zeros((N, N))
    D2 = np.zeros((N, N))
    for i in range(N):
        if 2 <= i <= N - 3:
            idx = np.arange(i - 2, i + 3)
        elif i < 2:
            idx = np.arange(0, 6)
        else:
            idx = np.arange(N - 6, N)
        w = fornberg_weights(x[i], x[idx], 2)
        D1[i, idx] = w[:, 1]
        D2[i, idx] = w[:, 2]
    return D1, D2


def cheb_lobatto(N: int) -> tuple[np.ndarray, np.ndarray]:
    """Chebyshev-Lobatto nodes on [-1, 1] (descending) and differentiation matrix."""
    if N == 0:
        return np.array([1.0]), np.zeros((1, 1))
    x = np.cos(np.pi * np.arange(N + 1) / N)
    c = np.hstack([2.0, np.ones(N - 1), 2.0]) * (-1.0) ** np.arange(N + 1)
    X = np.tile(x, (N + 1, 1)).T
    dX = X - X.T
    D = np.outer(c, 1.0 / c) / (dX + np.eye(N + 1))
    D -= np.diag(D.sum(axis=1))
    return x, D


def barycentric_matrix(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Matrix interpolating values on Chebyshev-Lobatto nodes ``x`` to points ``y``."""
    N = len(x) - 1
    w = (-1.0) ** np.arange(N + 1)
    w[0] *= 0.5
    w[-1] *= 0.5
    diff = y[:, None] - x[None, :]
    exact = np.isclose(diff, 0.0, atol=1e-15)
    diff = np.where(exact, 1.0, diff)
    B = w / diff
    B /= B.sum(axis=1, keepdims=True)
    rows = np.any(exact, axis=1)
    B[rows] = exact[rows].astype(float)
    return B


def exponential_filter(F: np.ndarray, parity=None, alpha: float = 36.0, p: int = 36,
                       cutoff: float = 0.0) -> np.ndarray:
    """Damp the highest Fourier modes of node samples by exp(-alpha (|k|/k_max)^p).

    ``parity`` selects the staggered half grid with reflection extension.
    Modes below ``cutoff * k_max`` are left untouched.
    """
    F = np.asarray(F, dtype=float)
    N = F.shape[0]
    G = reflect(F, parity) if parity is not None else F
    M = G.shape[0]
    k = np.abs(np.fft.fftfreq(M, d=1.0 / M))
    eta = np.clip((k / (M / 2) - cutoff) / (1.0 - cutoff), 0.0, None)
    sig = np.exp(-alpha * eta ** p).reshape((M,) + (1,) * (G.ndim - 1))
    out = np.real(np.fft.ifft(sig * np.fft.fft(G, axis=0), axis=0))
    return out[:N]
