"""Jacobi elliptic functions and the period-matched modulus.

The modulus is carried through its complement ``m1 = 1 - k**2``.  For the
extremal paths used here ``m1`` is exponentially small in ``sqrt(mu)`` (about
``7e-4`` at ``mu = 400`` and ``2e-10`` at ``mu = 2500``), so storing ``k`` alone
would lose every quantity that depends on ``1 - k**2``.

All functions are implemented with the arithmetic-geometric mean; scipy is
only used as an independent oracle in the test-suite.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .grid import GridPath, uniform_grid

_AGM_TOL = 1e-16
_AGM_MAXIT = 64


class EllipticDomainError(ValueError):
    """Raised for moduli outside ``[0, 1)`` or an unattainable period."""


def _agm_sequence(m1: float):
    """Descending AGM sequence (a_n, c_n) started at (1, sqrt(m1), sqrt(1-m1))."""
    a, b, c = 1.0, math.sqrt(m1), math.sqrt(1.0 - m1)
    As, Cs = [a], [c]
    for _ in range(_AGM_MAXIT):
        if abs(c) <= _AGM_TOL * a:
            break
        a, b, c = 0.5 * (a + b), math.sqrt(a * b), 0.5 * (a - b)
        As.append(a)
        Cs.append(c)
    return As, Cs


def complete_K_m1(m1: float) -> float:
    """Complete elliptic integral of the first kind as a function of ``m1 = 1 - k^2``."""
    m1 = float(m1)
    if not (0.0 < m1 <= 1.0):
        if m1 == 0.0:
            raise EllipticDomainError("K diverges at k = 1")
        raise EllipticDomainError(f"complement m1={m1!r} outside (0, 1]")
    As, _ = _agm_sequence(m1)
    return math.pi / (2.0 * As[-1])


def complete_K(k: float) -> float:
    """Complete elliptic integral of the first kind ``K(k)``.

    Parameters
    ----------
    k : float
        Modulus, ``0 <= k < 1``.
    """
    k = float(k)
    if not (0.0 <= k <= 1.0) or not math.isfinite(k):
        raise EllipticDomainError(f"modulus k={k!r} outside [0, 1)")
    if k == 1.0:
        raise EllipticDomainError("K diverges at k = 1")
    return complete_K_m1((1.0 - k) * (1.0 + k))


def complete_E_m1(m1: float) -> float:
    """Complete elliptic integral of the second kind from the same AGM sweep."""
    if m1 == 0.0:
        return 1.0
    As, Cs = _agm_sequence(m1)
    s = 0.5 * (1.0 - m1) + sum(2.0 ** (j - 1) * Cs[j] ** 2 for j in range(1, len(Cs)))
    return (1.0 - s) * math.pi / (2.0 * As[-1])


@dataclass(frozen=True)
class EllipticContext:
    """Modulus data for one Jacobi elliptic family.

    Attributes
    ----------
    k, k2 : float
        Modulus and its square.
    m1 : float
        Complementary parameter ``1 - k**2`` (kept exactly).
    K : float
        Quarter period; ``inf`` when ``k = 1``.
    mu : float or None
        The ``mu`` for which ``4K = sqrt(mu)``, if built from a period constraint.
    """

    k: float
    k2: float
    m1: float
    K: float
    mu: Optional[float] = None

    @classmethod
    def from_m1(cls, m1: float, mu: Optional[float] = None) -> "EllipticContext":
        m1 = float(m1)
        if not (0.0 <= m1 <= 1.0):
            raise EllipticDomainError(f"complement m1={m1!r} outside [0, 1]")
        K = math.inf if m1 == 0.0 else complete_K_m1(m1)
        k2 = 1.0 - m1
        return cls(k=math.sqrt(k2), k2=k2, m1=m1, K=K, mu=mu)

    @classmethod
    def from_modulus(cls, k: float) -> "EllipticContext":
        k = float(k)
        if not (0.0 <= k <= 1.0):
            raise EllipticDomainError(f"modulus k={k!r} outside [0, 1]")
        return cls.from_m1((1.0 - k) * (1.0 + k))

    @property
    def eps(self) -> float:
        """Alias for ``1 - k^2``."""
        return self.m1


def sn_cn_dn(x, ctx: EllipticContext):
    """Jacobi ``sn, cn, dn`` at real ``x`` by descending Landen/AGM recursion.

    The argument is first reduced modulo ``4K``; ``dn`` is recomputed as
    ``sqrt(m1 + k^2 cn^2)`` which is free of cancellation near ``k = 1``.
    """
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("sn_cn_dn requires finite arguments")
    m1 = ctx.m1
    if m1 == 0.0:
        sech = 1.0 / np.cosh(x)
        return np.tanh(x), sech, sech.copy()
    if m1 == 1.0:
        return np.sin(x), np.cos(x), np.ones_like(x)
    K = ctx.K
    u = x - 4.0 * K * np.round(x / (4.0 * K))
    As, Cs = _agm_sequence(m1)
    N = len(As) - 1
    phi = (2.0 ** N) * As[N] * u
    for j in range(N, 0, -1):
        phi = 0.5 * (phi + np.arcsin(np.clip(Cs[j] / As[j] * np.sin(phi), -1.0, 1.0)))
    sn = np.sin(phi)
    cn = np.cos(phi)
    dn = np.sqrt(m1 + (1.0 - m1) * cn * cn)
    return sn, cn, dn


def modulus_for_mu(mu: float) -> EllipticContext:
    """Modulus with ``4 K(k) = sqrt(mu)``.

    Solves for ``t = log(1 - k^2)``; ``K`` decreases monotonically in ``t``.

    Raises
    ------
    EllipticDomainError
        If ``mu < 4 pi^2`` (no period-matched modulus exists).
    """
    mu = float(mu)
    target = math.sqrt(mu) if mu > 0 else -1.0
    if not mu >= 4.0 * math.pi ** 2 * (1 - 1e-15):
        raise EllipticDomainError(f"mu={mu!r} < 4 pi^2: no periodic extremal path")
    if target <= 2.0 * math.pi * (1 + 1e-15):
        return EllipticContext.from_m1(1.0, mu=mu)
    from scipy.optimize import brentq

    g = lambda t: 4.0 * complete_K_m1(math.exp(t)) - target
    lo = -(target / 2.0 + 40.0)  # 4K ~ 2 log(16/m1) exceeds target here
    t = brentq(g, lo, 0.0, xtol=1e-15, rtol=1e-15, maxiter=400)
    return EllipticContext.from_m1(math.exp(t), mu=mu)


def extremal_path(ctx: EllipticContext, n: int = 4096) -> GridPath:
    """Samples of ``p(x) = k sqrt(mu) sn(sqrt(mu) x, k)`` on ``[0, 1)``."""
    if ctx.mu is None:
        raise ValueError("extremal_path needs a context built from mu")
    if n < 16:
        raise ValueError("grid size must be at least 16")
    rt = math.sqrt(ctx.mu)
    x = uniform_grid(n)
    sn, _, _ = sn_cn_dn(rt * x, ctx)
    return GridPath(ctx.k * rt * sn)


def scaled_functions(ctx: EllipticContext, n: int):
    """``(x, sn, cn, dn)`` of the scaled argument ``sqrt(mu) x`` on the unit grid."""
    x = uniform_grid(n)
    sn, cn, dn = sn_cn_dn(math.sqrt(ctx.mu) * x, ctx)
    return x, sn, cn, dn
