"""The two-gap Lame operator ``Q_mu = -d^2/dx^2 + 6 mu k^2 sn^2(sqrt(mu) x, k)``.

On the unscaled line (period ``2K`` for the potential) the five simple
periodic/antiperiodic eigenvalues are explicit:

    lambda_0 = 2 a_-,  lambda_1 = 1 + k^2,  lambda_2 = 1 + 4 k^2,
    lambda_3 = 4 + k^2,  lambda_4 = 2 a_+,   a_+- = 1 + k^2 +- sqrt(1 - k^2 + k^4),

with eigenfunctions ``1 - a_- sn^2``, ``cn dn``, ``sn dn``, ``sn cn`` and
``1 - a_+ sn^2``.  Scaling ``x -> sqrt(mu) x`` multiplies eigenvalues by ``mu``
and makes every eigenfunction 1-periodic.

All closed forms are written through ``eps = 1 - k^2`` so that the
exponentially narrow band ``[lambda_0, lambda_1]`` (width ``~ 3/4 eps^2``)
is represented without cancellation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
from scipy.linalg import eigh

from .elliptic import EllipticContext, complete_E_m1, sn_cn_dn
from .grid import GridPath, uniform_grid

#: Limiting values of the five simple eigenvalues as ``k -> 1``.
NOMINAL = np.array([2.0, 2.0, 5.0, 5.0, 6.0])


class ResolutionError(ValueError):
    """Grid too coarse for the requested eigenvalues."""


def _gap01(eps: float) -> float:
    """``lambda_1 - lambda_0 = 3 eps^2 / (2 + 2r - eps)``."""
    r = math.sqrt(1.0 - eps + eps * eps)
    return 3.0 * eps * eps / ((1.0 - eps + r) * (1.0 + eps + r))


def _offsets(eps: float) -> np.ndarray:
    """``d_j`` with ``lambda_j = NOMINAL_j - d_j`` evaluated without cancellation."""
    r = math.sqrt(1.0 - eps + eps * eps)
    gap01 = _gap01(eps)
    d4 = 2.0 * eps + 2.0 * eps * (1.0 - eps) / (1.0 + r)
    return np.array([eps + gap01, eps, 4.0 * eps, eps, d4])


@dataclass(frozen=True)
class SimpleSpectrum:
    """Closed-form simple spectrum of the unscaled Lame operator.

    Attributes
    ----------
    eps : float
        ``1 - k^2``.
    offsets : ndarray
        ``NOMINAL - lambdas`` (accurate even when tiny).
    lambdas : ndarray
        ``lambda_0 .. lambda_4`` (unscaled).
    a_plus, a_minus : float
    c0, c4 : float
        Constants with ``1 = c0 phi_0 - c4 phi_4`` for the normalized scaled
        eigenfunctions (``nan`` when ``mu`` is not available).
    mu : float or None
    ctx : EllipticContext
    """

    eps: float
    offsets: np.ndarray
    lambdas: np.ndarray
    a_plus: float
    a_minus: float
    c0: float
    c4: float
    mu: Optional[float]
    ctx: EllipticContext

    @property
    def k2(self) -> float:
        return 1.0 - self.eps

    @property
    def scaled(self) -> np.ndarray:
        """Eigenvalues of ``Q_mu``: ``mu * lambda_j``."""
        if self.mu is None:
            raise ValueError("spectrum has no scale mu")
        return self.mu * self.lambdas

    def lam(self, j: int) -> float:
        return float(self.lambdas[j])

    def diff(self, i: int, j: int) -> float:
        """``lambda_i - lambda_j`` computed from offsets (no cancellation)."""
        if {i, j} == {0, 1}:  # d_0 - d_1 would cancel to O(eps) absolute accuracy
            g = _gap01(self.eps)
            return g if i == 1 else -g
        return float((NOMINAL[i] - NOMINAL[j]) - (self.offsets[i] - self.offsets[j]))

    def offset_from(self, lam: float, j: int) -> float:
        """``lam - lambda_j`` computed as ``(lam - NOMINAL_j) + d_j``."""
        return float((lam - NOMINAL[j]) + self.offsets[j])

    def factor_one_minus(self, j: int, lam: float = 2.0) -> float:
        """``1 - lam / lambda_j`` (unscaled), accurate when ``lam`` sits near ``lambda_j``."""
        return -self.offset_from(lam, j) / self.lambdas[j]


def _norm_unit(values: np.ndarray) -> float:
    return math.sqrt(float(np.mean(values * values)))


def _unscaled_eigenfunctions(sn, cn, dn, a_minus, a_plus):
    return [1.0 - a_minus * sn * sn, cn * dn, sn * dn, sn * cn, 1.0 - a_plus * sn * sn]


def explicit_spectrum(ctx: EllipticContext, mu: Optional[float] = None, n: int = 4096) -> SimpleSpectrum:
    """Simple spectrum of the Lame operator for the modulus in ``ctx``.

    ``c0, c4`` use trapezoid norms of the scaled eigenfunctions on ``n`` points.
    """
    eps = ctx.m1
    mu = ctx.mu if mu is None else float(mu)
    off = _offsets(eps)
    lambdas = NOMINAL - off
    r = math.sqrt(1.0 - eps + eps * eps)
    a_plus = 2.0 - eps + r
    a_minus = 1.0 - eps / (1.0 - eps + r)
    c0 = c4 = float("nan")
    if mu is not None and math.isfinite(ctx.K) and ctx.m1 < 1.0:
        x = uniform_grid(n)
        sn, cn, dn = sn_cn_dn(4.0 * ctx.K * x, ctx)  # one full period 4K on [0, 1)
        n0 = _norm_unit(1.0 - a_minus * sn * sn)
        n4 = _norm_unit(1.0 - a_plus * sn * sn)
        c0 = a_plus / (2.0 * r) * n0
        c4 = a_minus / (2.0 * r) * n4
    return SimpleSpectrum(eps, off, lambdas, a_plus, a_minus, c0, c4, mu, ctx)


@dataclass(frozen=True)
class EigenPair:
    index: int
    value: float
    function: GridPath


def explicit_eigenfunction(spectrum: SimpleSpectrum, index: int, n: int = 4096) -> EigenPair:
    """Scaled, ``L^2[0,1]``-normalized eigenfunction ``phi_index^mu`` on ``n`` points."""
    if index not in range(5):
        raise ValueError("index must be in 0..4")
    ctx = spectrum.ctx
    if spectrum.mu is None:
        raise ValueError("spectrum has no scale mu")
    x = uniform_grid(n)
    sn, cn, dn = sn_cn_dn(math.sqrt(spectrum.mu) * x, ctx)
    phi = _unscaled_eigenfunctions(sn, cn, dn, spectrum.a_minus, spectrum.a_plus)[index]
    phi = phi / _norm_unit(phi)
    return EigenPair(index, float(spectrum.mu * spectrum.lambdas[index]), GridPath(phi))


def potential(ctx: EllipticContext, n: int) -> np.ndarray:
    """``q_mu(x) = 6 mu k^2 sn^2(sqrt(mu) x)`` on the unit grid."""
    x = uniform_grid(n)
    sn, _, _ = sn_cn_dn(math.sqrt(ctx.mu) * x, ctx)
    return 6.0 * ctx.mu * ctx.k2 * sn * sn


def mean_potential(ctx: EllipticContext) -> float:
    """``int_0^1 q_mu = 6 mu (1 - E/K)`` in closed form."""
    return 6.0 * ctx.mu * (1.0 - complete_E_m1(ctx.m1) / ctx.K)


def _fd_laplacian(n: int) -> np.ndarray:
    h = 1.0 / n
    A = np.zeros((n, n))
    i = np.arange(n)
    A[i, i] = 2.0 / h ** 2
    A[i, (i + 1) % n] = -1.0 / h ** 2
    A[i, (i - 1) % n] = -1.0 / h ** 2
    return A


def _fourier_laplacian(n: int) -> np.ndarray:
    k = 2.0 * np.pi * np.fft.fftfreq(n, d=1.0 / n)
    col = np.fft.ifft(k * k).real
    idx = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
    return col[idx]


def operator_matrix(ctx: EllipticContext, n: int, method: str = "fourier") -> np.ndarray:
    """Dense symmetric discretization of ``Q_mu`` on the unit periodic grid."""
    if method == "fd":
        A = _fd_laplacian(n)
    elif method == "fourier":
        A = _fourier_laplacian(n)
    else:
        raise ValueError(f"unknown discretization {method!r}")
    A[np.diag_indices(n)] += potential(ctx, n)
    return A


def numerical_periodic_spectrum(mu: float, n: int = 1024, count: int = 5,
                                method: str = "fourier", vectors: bool = False):
    """Lowest ``count`` period-1 eigenvalues of ``Q_mu`` by a dense symmetric solve.

    Parameters
    ----------
    method : {"fourier", "fd"}
        Fourier collocation (default) or second-order central differences.
    vectors : bool
        Also return ``L^2[0,1]``-normalized eigenvectors (columns) and the
        series tag (+1 principal / -1 complementary) of each eigenvalue,
        read off from the half-period shift ``phi(x + 1/2) = +- phi(x)``.
    """
    from .elliptic import modulus_for_mu

    if n < 16.0 * math.sqrt(mu):
        raise ResolutionError(f"n={n} < 16 sqrt(mu) = {16 * math.sqrt(mu):.0f}")
    if count > n // 4:
        raise ResolutionError("count exceeds n/4")
    if n % 2:
        raise ResolutionError("grid size must be even")
    ctx = modulus_for_mu(mu)
    A = operator_matrix(ctx, n, method)
    w, V = eigh(A, subset_by_index=[0, count - 1])
    if not vectors:
        return w
    V = V * math.sqrt(n)
    tags = np.sign(np.einsum("ij,ij->j", np.roll(V, -n // 2, axis=0), V))
    return w, V, tags.astype(int)
