"""The double-well rate function and its periodic, mean-zero minimizers.

For a periodic function ``f`` on ``[-a, a]``

    I(f; a) = 1/2 int (1 - f^2)^2 dx + 1/2 int f'^2 dx,

and ``I*(a)`` is its infimum over mean-zero periodic ``f``.  The kink/anti-kink
pair (glued ``tanh``) shows ``I*(a) <= 8/3``.  Minimization uses a damped
Newton method on the mean-zero subspace with a spectral discretization.

The unit-period functional ``I_mu(p) = 1/2 int_0^1 (mu - p^2)^2 + 1/2 int_0^1 p'^2``
is related by the scaling ``I_mu(sqrt(mu) f(sqrt(mu) x - a)) = mu^{3/2} I(f; a)``
with ``a = sqrt(mu)/2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import eigh

from .grid import GridPath, spectral_derivative, uniform_grid


@dataclass(frozen=True)
class RateProblem:
    """Minimization of ``I(f; a)`` over mean-zero functions of period ``2a``."""

    a: float
    n: int = 512

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError("half-period a must be positive")
        if self.n < 64:
            raise ValueError("grid size must be at least 64")

    @property
    def h(self) -> float:
        return 2.0 * self.a / self.n

    def grid(self) -> np.ndarray:
        return uniform_grid(self.n, 2.0 * self.a, -self.a)

    def wrap(self, values) -> GridPath:
        return GridPath(np.asarray(values, float), 2.0 * self.a, -self.a)


@dataclass
class MinimizerResult:
    f_star: GridPath
    I_star: float
    alpha: float
    beta: float
    el_residual: float
    iterations: int
    converged: bool
    grad_norm: float = field(default=float("nan"))


def _check_finite(f: GridPath):
    if not np.all(np.isfinite(f.values)):
        raise ValueError("path contains non-finite samples")


def rate_value(f: GridPath, a: Optional[float] = None) -> float:
    """``I(f; a)`` by trapezoid quadrature and spectral differentiation.

    ``f`` must sample one period of length ``2a``; ``a`` defaults to half of
    ``f.length`` and is checked against it when given.
    """
    _check_finite(f)
    if a is not None and not math.isclose(f.length, 2.0 * a, rel_tol=1e-12):
        raise ValueError("path period does not match 2a")
    v = f.values
    dv = spectral_derivative(v, f.length)
    return float(f.h * np.sum(0.5 * (1.0 - v * v) ** 2 + 0.5 * dv * dv))


def rate_mu(p: GridPath, mu: float) -> float:
    """Unit-period functional ``I_mu(p) = 1/2 int (mu - p^2)^2 + 1/2 int p'^2``."""
    _check_finite(p)
    v = p.values
    dv = spectral_derivative(v, p.length)
    return float(p.h * np.sum(0.5 * (mu - v * v) ** 2 + 0.5 * dv * dv))


def rate_gradient(f: GridPath) -> np.ndarray:
    """Projected first variation ``-f'' + 2 f^3 - 2 f`` minus its grid mean."""
    v = f.values
    g = -spectral_derivative(v, f.length, 2) + 2.0 * v ** 3 - 2.0 * v
    return g - g.mean()


def test_function(a: float, n: int = 512) -> GridPath:
    """Glued kink/anti-kink profile on ``[-a, a)``.

    ``-tanh(x + a)`` on ``[-a, -a/2]``, ``tanh(x)`` on ``[-a/2, a/2]`` and
    ``-tanh(x - a)`` on ``[a/2, a]``.  It is odd and continuous; the
    derivative jumps by ``2 sech^2(a/2)`` at ``x = +-a/2``, and
    ``I(f_a; a) = 4 (t - t^3/3)`` with ``t = tanh(a/2)``.
    """
    if a < 1:
        raise ValueError("test_function needs a >= 1")
    x = uniform_grid(n, 2.0 * a, -a)
    f = np.where(x < -a / 2, -np.tanh(x + a), np.where(x > a / 2, -np.tanh(x - a), np.tanh(x)))
    return GridPath(f, 2.0 * a, -a)


test_function.__test__ = False  # not a pytest test despite the name


def test_function_rate(a: float) -> float:
    """Exact ``I(f_a; a)`` of the glued profile."""
    t = math.tanh(a / 2.0)
    return 4.0 * (t - t ** 3 / 3.0)


test_function_rate.__test__ = False


def _second_diff_matrix(n: int, length: float) -> np.ndarray:
    """Dense circulant matrix of the spectral operator ``-d^2/dx^2``."""
    k = 2.0 * np.pi * np.fft.fftfreq(n, d=length / n)
    col = np.fft.ifft(k * k).real
    idx = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
    return col[idx]


def multiplier_diagnostics(result_or_f, a: Optional[float] = None):
    """Constants of the first integral ``1/2 f'^2 = 1/2 f^4 - f^2 - alpha f + beta/2``.

    ``alpha`` is the least-squares constant in ``f'' - 2 f^3 + 2 f = -alpha``
    and ``beta`` is the grid average of ``f'^2 - f^4 + 2 f^2 + 2 alpha f``.

    Returns
    -------
    alpha, beta, el_residual : float
        ``el_residual`` is the sup-norm defect of the first integral.
    """
    f = result_or_f.f_star if isinstance(result_or_f, MinimizerResult) else result_or_f
    v = f.values
    d1 = spectral_derivative(v, f.length)
    d2 = spectral_derivative(v, f.length, 2)
    alpha = float(-np.mean(d2 - 2.0 * v ** 3 + 2.0 * v))
    beta = float(np.mean(d1 ** 2 - v ** 4 + 2.0 * v ** 2 + 2.0 * alpha * v))
    resid = 0.5 * d1 ** 2 - (0.5 * v ** 4 - v ** 2 - alpha * v + 0.5 * beta)
    return alpha, beta, float(np.max(np.abs(resid)))


def pin_zero(f: GridPath) -> GridPath:
    """Translate ``f`` so that it vanishes at ``x = 0`` with positive slope.

    Picks the up-crossing nearest to the origin and applies a Fourier shift.
    """
    zs = zero_crossings(f)
    if zs.size == 0:
        return f
    slope = f.derivative().evaluate(zs)
    up = zs[slope > 0]
    if up.size == 0:
        return f
    L = f.length
    dist = np.abs((up + L / 2) % L - L / 2)
    return f.shifted(float(up[np.argmin(dist)]))


def minimize(problem: RateProblem, seed_path: Optional[GridPath] = None,
             tol: float = 1e-8, max_iter: int = 100) -> MinimizerResult:
    """Minimize ``I(.; a)`` over mean-zero periodic grid functions.

    Damped Newton on the mean-zero subspace: the Hessian ``-D^2 + 6 f^2 - 2``
    is diagonalized, near-null directions (translation) are discarded and
    negative curvature is reflected, followed by a backtracking line search.
    Stops when the sup-norm of the projected gradient is at most ``tol``.
    """
    a, n = problem.a, problem.n
    L = 2.0 * a
    if seed_path is None:
        f = test_function(max(a, 1.0), n).values if a >= 1 else np.sin(np.pi * problem.grid() / a)
        if a < 1:
            f = f * 0.5
    else:
        if seed_path.n != n or not math.isclose(seed_path.length, L, rel_tol=1e-12):
            raise ValueError("seed path is not on the problem grid")
        f = seed_path.values.copy()
    f = f - f.mean()
    C = _second_diff_matrix(n, L)
    P = np.eye(n) - 1.0 / n
    path = problem.wrap(f)
    I_old = rate_value(path)
    it, converged = 0, False
    g = rate_gradient(path)
    for it in range(1, max_iter + 1):
        gnorm = float(np.max(np.abs(g)))
        if gnorm <= tol:
            converged = True
            it -= 1
            break
        H = C + np.diag(6.0 * f * f - 2.0)
        w, V = eigh(P @ H @ P)
        keep = np.abs(w) > 1e-9 * np.max(np.abs(w))
        # drop the constant direction explicitly
        ones = np.ones(n) / math.sqrt(n)
        keep &= np.abs(ones @ V) < 0.5
        coef = (V[:, keep].T @ g) / np.abs(w[keep])
        step = -(V[:, keep] @ coef)
        step -= step.mean()
        t = 1.0
        while True:
            trial = problem.wrap(f + t * step)
            I_new = rate_value(trial)
            if I_new <= I_old + 1e-4 * t * float(g @ step) * problem.h or t < 1e-6:
                break
            t *= 0.5
        f = trial.values - trial.values.mean()
        path = problem.wrap(f)
        I_old = rate_value(path)
        g = rate_gradient(path)
    else:
        converged = float(np.max(np.abs(g))) <= tol
    path = pin_zero(path)
    path = problem.wrap(path.values - path.values.mean())
    alpha, beta, resid = multiplier_diagnostics(path)
    return MinimizerResult(
        f_star=path,
        I_star=rate_value(path),
        alpha=alpha,
        beta=beta,
        el_residual=resid,
        iterations=it,
        converged=converged,
        grad_norm=float(np.max(np.abs(rate_gradient(path)))),
    )


def exact_periodic_minimizer(a: float, n: int = 512) -> GridPath:
    """Elliptic solution ``c sn(b x, kappa)`` of ``f'' = 2 f^3 - 2 f`` with period ``2a``.

    The constants satisfy ``c = kappa b``, ``b^2 (1 + kappa^2) = 2`` and
    ``4 K(kappa) / b = 2 a``.  It is an independent reference for
    :func:`minimize` (it requires ``a > pi / sqrt(2)``).
    """
    from scipy.optimize import brentq
    from .elliptic import EllipticContext, complete_K_m1, sn_cn_dn

    if a <= math.pi / math.sqrt(2.0):
        raise ValueError("no non-constant periodic solution for a <= pi/sqrt(2)")

    def period_gap(t):
        m1 = math.exp(t)
        b = math.sqrt(2.0 / (2.0 - m1))
        return 4.0 * complete_K_m1(m1) / b - 2.0 * a

    t = brentq(period_gap, -(a + 40.0), 0.0, xtol=1e-15, rtol=1e-15, maxiter=400)
    ctx = EllipticContext.from_m1(math.exp(t))
    b = math.sqrt(2.0 / (1.0 + ctx.k2))
    x = uniform_grid(n, 2.0 * a, -a)
    sn, _, _ = sn_cn_dn(b * x, ctx)
    return GridPath(ctx.k * b * sn, 2.0 * a, -a)


def zero_crossings(f: GridPath) -> np.ndarray:
    """Locations of sign changes of ``f`` (linear interpolation + Newton polish)."""
    v, x = f.values, f.x
    nxt = np.roll(v, -1)
    idx = np.nonzero(np.sign(v) * np.sign(nxt) < 0)[0]
    idx = np.union1d(idx, np.nonzero(v == 0)[0])
    df = f.derivative()
    zs = []
    for i in idx:
        v0, v1 = v[i], nxt[i]
        xs = x[i] if v0 == 0 else x[i] + f.h * v0 / (v0 - v1)
        for _ in range(8):
            val = f.evaluate(xs)[0]
            der = df.evaluate(xs)[0]
            if der == 0:
                break
            xs -= val / der
        zs.append(xs)
    return np.sort(np.array(zs))
