"""Laplace-method ingredients at the extremal path and the assembled tail law.

The right-tail density of ``-lambda_0`` is approximated by

    f(mu) ~ sqrt(2/pi) A(p_mu) R(p_mu) Z(mu) exp(-I_mu(p_mu)),

with ``A = A_+ A_-`` the Jacobian factor of the Riccati map, ``R`` the
zero-counting (Rice) weight, ``Z`` the Gaussian fluctuation correction
(expressed through the simple Lame spectrum and Hill's discriminant) and
``I_mu`` the rate functional.  Every tail quantity is carried in natural-log
space; ``f(400)`` is of order ``e^{-21000}``.

Each factor is computed numerically on a grid and, where an exact elliptic
expression exists, also in closed form so the two can be cross-checked.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, NamedTuple, Optional, Tuple

import numpy as np
from scipy.integrate import quad
from scipy.special import logsumexp

from .discriminant import hochstadt_unscaled, solve_gap_points
from .elliptic import EllipticContext, complete_E_m1, extremal_path, modulus_for_mu, scaled_functions
from .grid import GridPath, spectral_antiderivative, spectral_derivative
from .lame import SimpleSpectrum, explicit_spectrum
from .ratefn import rate_mu, zero_crossings


class DegeneratePathError(ValueError):
    """The correlation of a path with ``phi_1`` has no sign change."""


class SpectralOrderingError(ValueError):
    """A radicand of the Gaussian correction is not positive."""


# ---------------------------------------------------------------------------
# A(p)
# ---------------------------------------------------------------------------

def _exponent(p: GridPath) -> np.ndarray:
    """``2 int_0^x p`` on the grid (periodic because ``p`` has mean zero)."""
    if abs(p.mean()) > 1e-8 * max(1.0, float(np.max(np.abs(p.values)))):
        raise ValueError("A(p) needs a mean-zero path")
    return 2.0 * spectral_antiderivative(p.values - p.mean(), p.length)


def log_A_functional(p: GridPath) -> Tuple[float, float]:
    """``(log A_+, log A_-)`` by log-mean-exp of ``+-2 int_0^x p`` (overflow free)."""
    P = _exponent(p)
    logn = math.log(p.n)
    return float(logsumexp(P) - logn), float(logsumexp(-P) - logn)


def A_functional(p: GridPath) -> Tuple[float, float]:
    """``A_+ = int_0^1 e^{2 int_0^x p} dx`` and ``A_- = int_0^1 e^{-2 int_0^x p} dx``.

    The antiderivative is taken spectrally and the outer integral by the
    trapezoid rule.  ``p`` must have (grid) mean zero.
    """
    lp, lm = log_A_functional(p)
    return math.exp(lp), math.exp(lm)


def A_closed(ctx: EllipticContext) -> Tuple[float, float]:
    """Exact ``(A_+, A_-)`` at ``p_mu``.

    ``int_0^x p_mu = log((dn - k cn) / (1 - k))`` gives
    ``A_+- = <dn^2 + k^2 cn^2> / (1 -+ k)^2`` with ``<dn^2 + k^2 cn^2> = 2E/K - (1 - k^2)``.
    """
    m = 2.0 * complete_E_m1(ctx.m1) / ctx.K - ctx.m1
    one_minus_k = ctx.m1 / (1.0 + ctx.k)
    return m / one_minus_k ** 2, m / (1.0 + ctx.k) ** 2


# ---------------------------------------------------------------------------
# R(p)
# ---------------------------------------------------------------------------

def phi1(ctx: EllipticContext, n: int) -> GridPath:
    """``L^2[0,1]``-normalized ``cn dn(sqrt(mu) x)`` (the translation mode of ``p_mu``)."""
    _, _, cn, dn = scaled_functions(ctx, n)
    v = cn * dn
    return GridPath(v / math.sqrt(float(np.mean(v * v))))


@dataclass(frozen=True)
class RiceWeight:
    """Result of :func:`R_functional`."""

    value: float
    zeros: np.ndarray
    slopes: np.ndarray
    correlation: GridPath


def rice_weight(p: GridPath, ctx: EllipticContext) -> RiceWeight:
    """``R(p) = (sum_z |g'(z)|^{-1})^{-1}`` with ``g(x) = int_0^1 phi_1(x + y) p(y) dy``.

    ``g`` is a circular correlation computed with the FFT; its zeros are
    located by sign changes and refined on the trigonometric interpolant.
    """
    if not math.isclose(p.length, 1.0):
        raise ValueError("R(p) is defined for unit-period paths")
    phi = phi1(ctx, p.n).values
    g = np.fft.irfft(np.fft.rfft(phi) * np.conj(np.fft.rfft(p.values)), n=p.n) / p.n
    gp = GridPath(g)
    zs = zero_crossings(gp)
    if zs.size == 0:
        raise DegeneratePathError("correlation with phi_1 has no zero")
    slopes = gp.derivative().evaluate(zs)
    if np.any(slopes == 0):
        raise DegeneratePathError("correlation with phi_1 has a double zero")
    return RiceWeight(float(1.0 / np.sum(1.0 / np.abs(slopes))), zs, slopes, gp)


def R_functional(p: GridPath, ctx: EllipticContext) -> float:
    """Rice weight ``R(p)``; see :func:`rice_weight`."""
    return rice_weight(p, ctx).value


def R_closed(ctx: EllipticContext, n: int = 4096) -> float:
    """``R(p_mu) = 1/2 k mu sqrt(<cn^2 dn^2>)``.

    The correlation vanishes at ``0`` and ``1/2`` with slope
    ``-int phi_1 p_mu' = -k mu sqrt(<cn^2 dn^2>)``.
    """
    _, _, cn, dn = scaled_functions(ctx, n)
    J = float(np.mean((cn * dn) ** 2))
    return 0.5 * ctx.k * ctx.mu * math.sqrt(J)


# ---------------------------------------------------------------------------
# I_mu(p_mu)
# ---------------------------------------------------------------------------

def rate_at_extremal(ctx: EllipticContext, mu: Optional[float] = None, n: int = 4096) -> float:
    """``I_mu(p_mu)`` by trapezoid quadrature with spectral derivative."""
    mu = ctx.mu if mu is None else float(mu)
    if ctx.mu is None or not math.isclose(ctx.mu, mu, rel_tol=1e-12):
        raise ValueError("context was not built for this mu")
    return rate_mu(extremal_path(ctx, n), mu)


def rate_at_extremal_closed(ctx: EllipticContext) -> float:
    """``I_mu(p_mu)`` through period averages of ``sn^2`` and ``sn^4``.

    ``I/mu^2 = (1 + k^2)/2 - k^2 (3 + k^2)/2 <sn^2> + k^4 <sn^4>`` with
    ``k^2 <sn^2> = 1 - E/K`` and
    ``3 k^4 <sn^4> = 2 + k^2 - 2 (1 + k^2) E/K``.
    """
    k2 = ctx.k2
    e = complete_E_m1(ctx.m1) / ctx.K
    k2s2 = 1.0 - e
    k4s4 = (2.0 + k2 - 2.0 * (1.0 + k2) * e) / 3.0
    return ctx.mu ** 2 * (0.5 * (1.0 + k2) - 0.5 * (3.0 + k2) * k2s2 + k4s4)


# ---------------------------------------------------------------------------
# Z(mu)
# ---------------------------------------------------------------------------

class GaussianCorrection(NamedTuple):
    """Gaussian fluctuation factor, in log space, with its pieces.

    ``log_Z = log_spectral + log_last + log_discriminant``; the
    ``Delta^2(0) - 4`` terms of the two constituent factors cancel exactly.
    """

    log_Z: float
    log_spectral: float       # sqrt(|(1-2/l0)(1-2/l1)(1-2/l4)| * bracket)
    log_last: float           # [2pi/l1 (c0^2/l0 + c4^2/l4)]^{-1/2}, scaled eigenvalues
    log_discriminant: float   # -1/2 log(Delta^2(2 mu) - 4)
    negative_factors: int     # how many of the three 1 - 2mu/lambda factors are negative
    flagged: bool             # True when an odd number is negative


def gaussian_correction(spectrum: SimpleSpectrum, delta0_sq_m4: float, delta2mu_sq_m4: float,
                        *, log_delta0_sq_m4: Optional[float] = None,
                        log_delta2mu_sq_m4: Optional[float] = None) -> GaussianCorrection:
    """Gaussian correction ``Z(mu)`` from the simple spectrum and the discriminant.

    Parameters
    ----------
    spectrum : SimpleSpectrum
        Closed-form spectrum with ``mu``, ``c0`` and ``c4``.
    delta0_sq_m4, delta2mu_sq_m4 : float
        ``Delta^2(0) - 4`` and ``Delta^2(2 mu) - 4``; both must be positive.
        The first cancels and is only checked.
    log_delta0_sq_m4, log_delta2mu_sq_m4 : float, optional
        Logarithms of the same quantities, used instead of the values when
        given (the values overflow for large ``mu``).

    Notes
    -----
    ``1 - 2 mu / lambda_1^mu`` is negative (``lambda_1 = 1 + k^2 < 2``) and
    so is ``1 - 2 mu / lambda_0^mu``; the product of the three factors is
    positive.  Absolute values are taken and an odd count of negative
    factors is flagged.
    """
    sp = spectrum
    if sp.mu is None:
        raise ValueError("spectrum has no scale mu")
    if log_delta0_sq_m4 is None and not delta0_sq_m4 > 0:
        raise SpectralOrderingError("Delta^2(0) - 4 must be positive (0 below the spectrum)")
    if log_delta2mu_sq_m4 is None:
        if not delta2mu_sq_m4 > 0:
            raise SpectralOrderingError("Delta^2(2mu) - 4 must be positive (2mu in a gap)")
        log_d2 = math.log(delta2mu_sq_m4)
    else:
        log_d2 = float(log_delta2mu_sq_m4)
    mu = sp.mu
    l0, l1, l4 = (float(sp.lambdas[j]) for j in (0, 1, 4))
    factors = [sp.factor_one_minus(j) for j in (0, 1, 4)]
    if any(f == 0 for f in factors):
        raise SpectralOrderingError("2 mu coincides with a simple eigenvalue")
    neg = sum(f < 0 for f in factors)
    c0s, c4s = sp.c0 ** 2, sp.c4 ** 2
    # (lambda_4 - 2) and (lambda_0 - 2) in unscaled units; mu cancels in the ratio
    num = l4 * c0s + l0 * c4s
    den = -sp.offset_from(2.0, 4) * c0s - sp.offset_from(2.0, 0) * c4s
    if not (num > 0 and den > 0):
        raise SpectralOrderingError(
            f"bracket radicand not positive: c4^2(l0-2mu) + c0^2(l4-2mu) = {mu * den:.3e}")
    log_spec = 0.5 * (sum(math.log(abs(f)) for f in factors) + math.log(num) - math.log(den))
    inner = 2.0 * math.pi / (mu * l1) * (c0s / (mu * l0) + c4s / (mu * l4))
    if not inner > 0:
        raise SpectralOrderingError("last-factor radicand not positive")
    log_last = -0.5 * math.log(inner)
    log_disc = -0.5 * log_d2
    return GaussianCorrection(log_spec + log_last + log_disc, log_spec, log_last, log_disc,
                              int(neg), bool(neg % 2))


def discriminant_logs(spectrum: SimpleSpectrum, nq: int = 24) -> Tuple[float, float]:
    """``(log(Delta^2(0) - 4), log(Delta^2(2mu) - 4))`` by the finite-gap formula."""
    gaps = solve_gap_points(spectrum, nq)
    out = []
    for lam in (0.0, 2.0):
        hv = hochstadt_unscaled(spectrum, gaps, lam, nq)
        if not math.isfinite(hv.cosh_arg):
            raise SpectralOrderingError(f"lambda = {lam} mu is not in an instability interval")
        Y = hv.cosh_arg
        # Delta^2 - 4 = 4 sinh^2 Y
        out.append(2.0 * (Y + math.log1p(-math.exp(-2.0 * Y))))
    return out[0], out[1]


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------

def closed_form_tails(mu: float) -> float:
    """Log of the leading-order tail density of ``-lambda_0``.

    ``mu > 0``: ``log(4 mu / (3 pi)) - 8/3 mu^{3/2} - mu^{1/2}/2``;
    ``mu < 0``: ``1/2 log(-mu/pi) - mu^2/2 - (-mu)^{1/2}/sqrt(2)``.
    """
    mu = float(mu)
    if mu == 0 or not math.isfinite(mu):
        raise ValueError("closed-form tails need mu != 0")
    if mu > 0:
        return math.log(4.0 * mu / (3.0 * math.pi)) - 8.0 / 3.0 * mu ** 1.5 - 0.5 * math.sqrt(mu)
    return 0.5 * math.log(-mu / math.pi) - 0.5 * mu * mu - math.sqrt(-mu) / math.sqrt(2.0)


def asymptotic_forms(mu: float) -> Dict[str, float]:
    """Leading-order forms of each factor, in log space where they are large."""
    r = math.sqrt(mu)
    return {
        "log_A_plus": r - math.log(8.0 * r),
        "log_A_minus": math.log(2.0 / r),
        "log_R": 0.5 * math.log(2.0 / 3.0) + 0.75 * math.log(mu),
        "I": 8.0 / 3.0 * mu ** 1.5,
        "log_spectral": math.log(8.0 / (3.0 * math.sqrt(2.0))) + 0.25 * math.log(mu) - 0.5 * r,
        "log_last": 0.5 * math.log(6.0 / math.pi) + math.log(mu),
        "log_discriminant": -r,
        "c0": math.sqrt(6.0) * mu ** -0.25,
        "c4": 1.0,
    }


@dataclass
class TailReport:
    """All factors of the assembled right-tail law at one ``mu`` (log space)."""

    mu: float
    A_plus: float
    A_minus: float
    R_val: float
    I_val: float
    Z_val: float            # log Z
    f_assembled: float      # log density
    f_closed: float         # log density of the closed form
    ratio: float            # exp(f_assembled - f_closed)
    log_A_plus: float = float("nan")
    log_A_minus: float = float("nan")
    correction: Optional[GaussianCorrection] = None
    spectrum: Optional[SimpleSpectrum] = field(default=None, repr=False)

    @property
    def log_A(self) -> float:
        return self.log_A_plus + self.log_A_minus

    @property
    def log_R(self) -> float:
        return math.log(self.R_val)

    def factor_ratios(self) -> Dict[str, float]:
        """Each factor divided by its leading-order form."""
        ref = asymptotic_forms(self.mu)
        c = self.correction
        return {
            "A_plus": math.exp(self.log_A_plus - ref["log_A_plus"]),
            "A_minus": math.exp(self.log_A_minus - ref["log_A_minus"]),
            "R": math.exp(self.log_R - ref["log_R"]),
            "I_minus_leading": self.I_val - ref["I"],
            "spectral": math.exp(c.log_spectral - ref["log_spectral"]),
            "last": math.exp(c.log_last - ref["log_last"]),
            "discriminant": math.exp(c.log_discriminant - ref["log_discriminant"]),
        }


def assemble_tail(mu: float, n: int = 4096, nq: int = 24) -> TailReport:
    """Assemble ``sqrt(2/pi) A R Z exp(-I)`` at ``p_mu`` and compare with the closed form.

    The exponent carries a minus sign: the leading order must be
    ``exp(-8/3 mu^{3/2})``.
    """
    mu = float(mu)
    ctx = modulus_for_mu(mu)
    p = extremal_path(ctx, n)
    lap, lam = log_A_functional(p)
    R = R_functional(p, ctx)
    I = rate_mu(p, mu)
    sp = explicit_spectrum(ctx, mu, n)
    ld0, ld2 = discriminant_logs(sp, nq)
    corr = gaussian_correction(sp, math.nan, math.nan, log_delta0_sq_m4=ld0, log_delta2mu_sq_m4=ld2)
    log_f = 0.5 * math.log(2.0 / math.pi) + lap + lam + math.log(R) + corr.log_Z - I
    log_c = closed_form_tails(mu)
    return TailReport(mu, math.exp(lap), math.exp(lam), R, I, corr.log_Z, log_f, log_c,
                      math.exp(log_f - log_c), lap, lam, corr, sp)


# ---------------------------------------------------------------------------
# constants behind the variational bounds
# ---------------------------------------------------------------------------

def _sech(x):
    e = np.exp(-np.abs(x))
    return 2.0 * e / (1.0 + e * e)


def sech_integrals() -> Dict[str, float]:
    """Whole-line integrals of ``sech``/``tanh`` monomials by adaptive quadrature."""
    def I(f):
        # integrands are even and decay like e^{-2x} or faster
        val, _ = quad(f, 0.0, np.inf, epsabs=1e-14, epsrel=1e-13, limit=200)
        return 2.0 * val

    return {
        "sech4": I(lambda x: _sech(x) ** 4),
        "sech5_tanh2": I(lambda x: _sech(x) ** 5 * np.tanh(x) ** 2),
        "sech8": I(lambda x: _sech(x) ** 8),
        "sech2_tanh2": I(lambda x: _sech(x) ** 2 * np.tanh(x) ** 2),
    }


def second_variation_inequality() -> Tuple[float, float]:
    """``(12 (int sech^5 tanh^2)^2, int sech^8 * int sech^2 tanh^2)``; the first must be smaller.

    Exact values are ``3 pi^2 / 64`` and ``64 / 105``.
    """
    s = sech_integrals()
    return 12.0 * s["sech5_tanh2"] ** 2, s["sech8"] * s["sech2_tanh2"]
