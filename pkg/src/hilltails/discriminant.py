"""Hill's discriminant of the Lame operator, computed two independent ways.

* :func:`monodromy_delta` integrates ``-y'' + q y = lambda y`` over one
  potential period and returns the trace of the monodromy matrix.
* :func:`hochstadt_delta` evaluates the finite-gap representation
  ``Delta = 2 cos psi`` with

      psi(lambda) = i c int_{lambda_0}^{lambda} (s - l1')(s - l2') / sqrt(-prod_j (s - lambda_j)) ds,

  where ``c`` is half of the potential period in the variables used (``c = K``
  on the unscaled line, whose potential period is ``2K``).  Inside bands the
  phase is real; inside gaps it acquires a real "cosh" exponent.

The auxiliary points ``l1' in (lambda_1, lambda_2)`` and
``l2' in (lambda_3, lambda_4)`` make the exponent return to zero across each
gap; they solve a 2x2 linear system in the coefficients of
``(s - l1')(s - l2') = s^2 - e1 s + e2``.

All singular integrals are evaluated in coordinates local to a band edge:
``s - edge = w^2`` removes the inverse square root at the edge and
``w = sqrt(d) sinh(u)`` removes the one at a neighbouring edge a distance
``d`` away (the band ``[lambda_0, lambda_1]`` has width ``~ 3/4 eps^2``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, NamedTuple, Optional

import numpy as np
from scipy.integrate import solve_ivp

from .elliptic import EllipticContext, modulus_for_mu, sn_cn_dn
from .lame import NOMINAL, SimpleSpectrum, explicit_spectrum


class StiffnessError(RuntimeError):
    """The monodromy integration failed (step-size underflow)."""


class ConditioningError(ValueError):
    """Gaps too narrow for a reliable auxiliary-point solve."""


# ---------------------------------------------------------------------------
# monodromy
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Monodromy:
    """Fundamental solutions at the half period ``x = 1/2`` of the scaled problem.

    ``y1`` is cosine-like (``y1(0)=1, y1'(0)=0``), ``y2`` sine-like
    (``y2(0)=0, y2'(0)=1``).
    """

    lam: float
    y1: float
    y1p: float
    y2: float
    y2p: float

    @property
    def delta(self) -> float:
        return self.y1 + self.y2p

    @property
    def wronskian(self) -> float:
        return self.y1 * self.y2p - self.y1p * self.y2

    @property
    def wronskian_defect(self) -> float:
        """``|W - 1|`` relative to the size of the products forming ``W``."""
        scale = max(1.0, abs(self.y1 * self.y2p), abs(self.y1p * self.y2))
        return abs(self.wronskian - 1.0) / scale


def monodromy_matrix(q: Callable[[np.ndarray], np.ndarray], period: float, lam,
                     rtol: float = 1e-12, atol: float = 1e-13) -> np.ndarray:
    """Monodromy matrices of ``y'' = (q(x) - lam) y`` over ``[0, period]``.

    Vectorized in ``lam``; returns an array of shape ``(len(lam), 2, 2)``
    with columns the cosine-like and sine-like solutions.
    """
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    m = lam.size

    def rhs(t, y):
        Y = y.reshape(4, m)
        qq = q(np.asarray(t)) - lam
        return np.concatenate([Y[1], qq * Y[0], Y[3], qq * Y[2]])

    y0 = np.concatenate([np.ones(m), np.zeros(m), np.zeros(m), np.ones(m)])
    sol = solve_ivp(rhs, (0.0, period), y0, method="DOP853", rtol=rtol, atol=atol)
    if not sol.success:
        raise StiffnessError(sol.message)
    Y = sol.y[:, -1].reshape(4, m)
    M = np.empty((m, 2, 2))
    M[:, 0, 0], M[:, 1, 0], M[:, 0, 1], M[:, 1, 1] = Y[0], Y[1], Y[2], Y[3]
    return M


def _lame_potential(ctx: EllipticContext):
    six_k2 = 6.0 * ctx.k2

    def q(t):
        sn, _, _ = sn_cn_dn(t, ctx)
        return six_k2 * sn * sn

    return q


def monodromy_delta(mu: float, lam, ctx: Optional[EllipticContext] = None):
    """Discriminant of ``Q_mu`` at the scaled spectral parameter(s) ``lam``.

    The unscaled equation ``y'' = (6 k^2 sn^2(t) - lam/mu) y`` is integrated
    over ``[0, 2K]`` (the potential period) with an 8th-order Runge-Kutta
    method; the result is reported in scaled variables (the trace is scale
    invariant).  Returns a :class:`Monodromy` for scalar ``lam`` and a list
    otherwise.
    """
    ctx = modulus_for_mu(mu) if ctx is None else ctx
    scalar = np.ndim(lam) == 0
    lam_arr = np.atleast_1d(np.asarray(lam, dtype=float))
    M = monodromy_matrix(_lame_potential(ctx), 2.0 * ctx.K, lam_arr / mu)
    rt = math.sqrt(mu)
    out = [Monodromy(float(l), float(Mi[0, 0]), float(rt * Mi[1, 0]), float(Mi[0, 1] / rt), float(Mi[1, 1]))
           for l, Mi in zip(lam_arr, M)]
    return out[0] if scalar else out


def free_delta(lam, period: float = 0.5):
    """Discriminant of the zero potential by integration (test harness)."""
    M = monodromy_matrix(lambda t: np.zeros_like(t, dtype=float), period, lam)
    return M[:, 0, 0] + M[:, 1, 1]


# ---------------------------------------------------------------------------
# singular quadrature around the simple spectrum
# ---------------------------------------------------------------------------

@lru_cache(maxsize=8)
def _gauss(nq: int):
    return np.polynomial.legendre.leggauss(nq)


def _composite(a: float, b: float, nq: int, panel: float = 2.0):
    """Composite Gauss-Legendre nodes/weights on ``[a, b]``."""
    if b <= a:
        return np.zeros(0), np.zeros(0)
    npan = max(1, int(math.ceil((b - a) / panel)))
    x, w = _gauss(nq)
    edges = np.linspace(a, b, npan + 1)
    lo, hi = edges[:-1, None], edges[1:, None]
    nodes = 0.5 * (hi - lo) * x[None, :] + 0.5 * (hi + lo)
    weights = 0.5 * (hi - lo) * w[None, :]
    return nodes.ravel(), weights.ravel()


def _half_nodes(sp: SimpleSpectrum, ref: int, A: float, B: float, side: str, nq: int):
    """Nodes ``tau`` and weights for ``int_A^B g(tau) / sqrt(prod_j |tau - E_j|) dtau``.

    ``E_j = lambda_j - lambda_ref``.  Returns ``(tau, weight)`` where
    ``weight`` already contains the inverse square root of all edge factors.
    ``side`` selects which neighbours are absorbed analytically: "left" uses
    the two nearest edges at or below ``A``, "right" the two nearest at or
    above ``B``.  Edge-to-edge distances come from ``sp.diff`` so that nearly
    coincident edges keep full relative precision.
    """
    E = np.array([sp.diff(j, ref) for j in range(5)])
    if side == "left":
        idx = [j for j in np.argsort(-E, kind="stable") if E[j] <= A]
    else:
        idx = [j for j in np.argsort(E, kind="stable") if E[j] >= B]
    j1 = idx[0] if idx else None
    if j1 is not None:
        e1 = E[j1]
        sgn = 1.0 if side == "left" else -1.0
        # distance coordinate v = sgn (tau - e1) >= 0 on the half
        vA, vB = (A - e1, B - e1) if side == "left" else (e1 - B, e1 - A)
    if j1 is None or vA > vB - vA:
        # no edge close to this half: the integrand is smooth, and tau is
        # measured from the segment end to keep |tau - E_j| accurate near ref
        tau, wt = _composite(A, B, nq, panel=max(B - A, 1e-300))
        fac = np.prod([np.abs(tau - e) for e in E], axis=0)
        return tau, wt / np.sqrt(fac)
    used = {j1}
    if len(idx) >= 2:
        d = abs(sp.diff(j1, idx[1]))
        uA = math.asinh(math.sqrt(max(vA, 0.0) / d))
        uB = math.asinh(math.sqrt(vB / d))
        u, wu = _composite(uA, uB, nq)
        w_ = math.sqrt(d) * np.sinh(u)
        v = w_ * w_
        # dtau = 2 w dw, dw = sqrt(d) cosh u du; 1/sqrt(v) = 1/w; 1/sqrt(v + d) = 1/(sqrt(d) cosh u)
        jac = 2.0 * wu
        used.add(idx[1])
    else:
        wA, wB = math.sqrt(max(vA, 0.0)), math.sqrt(vB)
        w_, ww = _composite(wA, wB, nq, panel=max(wB - wA, 1e-300) / 4)
        v = w_ * w_
        jac = 2.0 * ww
    tau = e1 + sgn * v
    # remaining factors |tau - E_j| = |(lambda_j1 - lambda_j) + sgn v|
    fac = np.ones_like(v)
    for j in range(5):
        if j not in used:
            fac = fac * np.abs(sp.diff(j1, j) + sgn * v)
    return tau, jac / np.sqrt(fac)


def segment_nodes(sp: SimpleSpectrum, ref: int, A: float, B: float, nq: int = 24):
    """Quadrature for ``int g(s) ds / sqrt(|R(s)|)`` over ``s in lambda_ref + [A, B]``.

    ``R(s) = prod_j (s - lambda_j)``; the segment must not contain an edge in
    its interior.  Returns local coordinates ``tau = s - lambda_ref`` and
    weights.
    """
    if B < A:
        raise ValueError("empty segment")
    M = 0.5 * (A + B)
    t1, w1 = _half_nodes(sp, ref, A, M, "left", nq)
    t2, w2 = _half_nodes(sp, ref, M, B, "right", nq)
    return np.concatenate([t1, t2]), np.concatenate([w1, w2])


@dataclass(frozen=True)
class GapPoints:
    """Auxiliary points ``lp1 in [lambda_1, lambda_2]``, ``lp2 in [lambda_3, lambda_4]`` (unscaled)."""

    lp1: float
    lp2: float
    delta1: float
    delta2: float
    residuals: tuple = (float("nan"), float("nan"))


def _numerator(sp: SimpleSpectrum, gaps: GapPoints, ref: int, tau: np.ndarray) -> np.ndarray:
    """``(s - l1')(s - l2')`` at ``s = lambda_ref + tau`` in local coordinates."""
    a = sp.diff(ref, 1) - gaps.delta1  # lambda_ref - l1'
    b = sp.diff(ref, 3) - gaps.delta2  # lambda_ref - l2'
    return (tau + a) * (tau + b)


def solve_gap_points(spectrum: SimpleSpectrum, nq: int = 24) -> GapPoints:
    """Auxiliary points from the two vanishing gap integrals.

    Writes the numerator as ``(s - lambda_1 - d1)(s - lambda_3 - d2)`` expanded
    around local coordinates, i.e. as a quadratic ``s^2 - e1 s + e2``; the two
    gap conditions are linear in ``(e1, e2)``.
    """
    sp = spectrum
    if sp.diff(2, 1) < 1e-12 or sp.diff(4, 3) < 1e-12:
        raise ConditioningError("gap narrower than 1e-12")
    # Moments in a common centered variable z = s - 3.5 for conditioning.
    rows, rhs = [], []
    for lo, hi in ((1, 2), (3, 4)):
        tau, w = segment_nodes(sp, lo, 0.0, sp.diff(hi, lo), nq)
        z = (NOMINAL[lo] - 3.5) - sp.offsets[lo] + tau
        m0, m1, m2 = w.sum(), (w * z).sum(), (w * z * z).sum()
        # z^2 - E1 z + E2 = 0 in the mean
        rows.append([-m1, m0])
        rhs.append(-m2)
    E1, E2 = np.linalg.solve(np.array(rows), np.array(rhs))
    disc = math.sqrt(max(E1 * E1 - 4.0 * E2, 0.0))
    r_hi = 0.5 * (E1 + disc) if E1 >= 0 else 0.5 * (E1 - disc)
    r_lo = E2 / r_hi if r_hi != 0 else 0.5 * (E1 - disc)
    z1, z2 = sorted((r_lo, r_hi))
    # back to offsets from lambda_1 and lambda_3
    d1 = z1 - ((NOMINAL[1] - 3.5) - sp.offsets[1])
    d2 = z2 - ((NOMINAL[3] - 3.5) - sp.offsets[3])
    gaps = GapPoints(float(NOMINAL[1] - sp.offsets[1] + d1), float(NOMINAL[3] - sp.offsets[3] + d2),
                     float(d1), float(d2))
    res = tuple(_gap_integral(sp, gaps, lo, hi, nq) for lo, hi in ((1, 2), (3, 4)))
    return GapPoints(gaps.lp1, gaps.lp2, gaps.delta1, gaps.delta2, res)


def _gap_integral(sp, gaps, lo, hi, nq, relative=True):
    tau, w = segment_nodes(sp, lo, 0.0, sp.diff(hi, lo), nq)
    f = _numerator(sp, gaps, lo, tau) * w
    val = f.sum()
    return float(val / np.abs(f).sum()) if relative else float(val)


# ---------------------------------------------------------------------------
# Hochstadt phase
# ---------------------------------------------------------------------------

class HochstadtValue(NamedTuple):
    """Discriminant as ``sign * 2cosh(Y)`` (gap) or ``2cos(phase)`` (band)."""

    region: str       # "below", "band0", "gap1", "band1", "gap2", "band2"
    delta: float
    cosh_arg: float   # Y >= 0 in instability regions, else nan
    phase: float      # psi in bands, else nan
    log_abs: float    # log |Delta| (finite even if Delta overflows)
    sign: int


def _region(sp: SimpleSpectrum, lam: float):
    """Region index and local coordinate ``lam - lambda_ref``."""
    t = [sp.offset_from(lam, j) for j in range(5)]
    if t[0] < 0:
        return "below", 0, t[0]
    if t[1] <= 0:
        return "band0", 0, t[0]
    if t[2] < 0:
        return "gap1", 1, t[1]
    if t[3] <= 0:
        return "band1", 2, t[2]
    if t[4] < 0:
        return "gap2", 3, t[3]
    return "band2", 4, t[4]


def phase_constant(sp: SimpleSpectrum) -> float:
    """Half the potential period in unscaled variables (``K``)."""
    return sp.ctx.K


def hochstadt_unscaled(sp: SimpleSpectrum, gaps: GapPoints, lam: float, nq: int = 24) -> HochstadtValue:
    """Hochstadt discriminant at the unscaled spectral parameter ``lam``."""
    c = phase_constant(sp)
    region, ref, t = _region(sp, lam)
    if region == "below":
        tau, w = segment_nodes(sp, 0, t, 0.0, nq)
        Y = c * float(np.sum(_numerator(sp, gaps, 0, tau) * w))
        return _cosh_value(region, abs(Y), +1)
    tau, w = segment_nodes(sp, ref, 0.0, t, nq)
    I = c * float(np.sum(_numerator(sp, gaps, ref, tau) * w))
    if region.startswith("gap"):
        sign = -1 if region == "gap1" else 1
        return _cosh_value(region, abs(I), sign)
    base = {"band0": 0.0, "band1": math.pi, "band2": 2.0 * math.pi}[region]
    psi = base + abs(I)
    d = 2.0 * math.cos(psi)
    return HochstadtValue(region, d, float("nan"), psi, math.log(abs(d)) if d != 0 else -math.inf,
                          1 if d >= 0 else -1)


def _cosh_value(region, Y, sign):
    log_abs = Y + math.log1p(math.exp(-2.0 * Y))  # log(2 cosh Y)
    delta = sign * math.exp(log_abs) if log_abs < 700 else sign * math.inf
    return HochstadtValue(region, delta, Y, float("nan"), log_abs, sign)


def hochstadt_delta(spectrum: SimpleSpectrum, gaps: GapPoints, lambda_scaled: float, nq: int = 24) -> float:
    """Discriminant of ``Q_mu`` at the scaled parameter via Hochstadt's formula."""
    return hochstadt_unscaled(spectrum, gaps, lambda_scaled / spectrum.mu, nq).delta


def band_phase(sp: SimpleSpectrum, gaps: GapPoints, band: int, nq: int = 24) -> float:
    """Phase accumulated across band ``band`` (0 or 1); equals ``pi`` exactly in theory."""
    lo, hi = {0: (0, 1), 1: (2, 3)}[band]
    tau, w = segment_nodes(sp, lo, 0.0, sp.diff(hi, lo), nq)
    return phase_constant(sp) * abs(float(np.sum(_numerator(sp, gaps, lo, tau) * w)))


def psi_at_lambda1(sp: SimpleSpectrum, gaps: GapPoints, nq: int = 24) -> float:
    """``psi(lambda_1)``; Hochstadt's normalization makes this ``pi``."""
    return band_phase(sp, gaps, 0, nq)


# ---------------------------------------------------------------------------
# Delta(2 mu)
# ---------------------------------------------------------------------------

class Delta2Mu(NamedTuple):
    value: float           # (Delta^2(2mu) - 4)^(-1/2)
    normalized_log: float  # -log(value) / sqrt(mu)
    log_value: float
    cosh_arg: float        # Y with Delta(2mu) = -2 cosh Y
    delta: float


def delta_2mu_asymptotics(mu: float, method: str = "hochstadt", nq: int = 24) -> Delta2Mu:
    """``(Delta^2(2 mu) - 4)^{-1/2}`` and the diagnostic ``-log(.)/sqrt(mu)``.

    With ``Delta(2mu) = -2 cosh Y`` one has ``Delta^2 - 4 = 4 sinh^2 Y`` and
    everything is evaluated in log space.  ``method="monodromy"`` uses the
    ODE trace instead (limited by double precision for very large ``mu``).
    """
    if mu < 100:
        raise ValueError("delta_2mu_asymptotics expects mu >= 100")
    ctx = modulus_for_mu(mu)
    if method == "hochstadt":
        sp = explicit_spectrum(ctx, mu)
        gaps = solve_gap_points(sp, nq)
        hv = hochstadt_unscaled(sp, gaps, 2.0, nq)
        if hv.region != "gap1":
            raise ValueError("2 mu is not in the first gap")
        Y = hv.cosh_arg
        delta = hv.delta
    elif method == "monodromy":
        delta = monodromy_delta(mu, 2.0 * mu, ctx).delta
        Y = math.acosh(abs(delta) / 2.0)
    else:
        raise ValueError(f"unknown method {method!r}")
    # log(2 sinh Y) = Y + log1p(-exp(-2Y))
    log_value = -(Y + math.log1p(-math.exp(-2.0 * Y)))
    return Delta2Mu(math.exp(log_value), -log_value / math.sqrt(mu), log_value, Y, delta)


def delta_at_zero_sq_minus_4(mu: float, ctx: Optional[EllipticContext] = None) -> float:
    """``Delta^2(0) - 4`` by the monodromy route."""
    d = monodromy_delta(mu, 0.0, ctx).delta
    return d * d - 4.0
