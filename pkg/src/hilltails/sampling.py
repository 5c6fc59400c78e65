"""Monte Carlo oracles for the ground-state law and the identities behind it.

* Direct simulation: the white-noise Hill operator is replaced by the
  periodic matrix ``-D_h^2 + diag(dB_i / h)`` and its ground state is found
  by Laguerre iteration on the transfer-matrix polynomial (see
  :mod:`hilltails._kernels`).
* Path integral: ``f(mu) = (2 pi)^{-1/2} E_0[exp(-1/2 int (mu - p^2)^2) A(p)]``
  with ``p`` a mean-zero circular Brownian motion (a Brownian bridge minus
  its mean).
* The conditioned Gaussian measure around the extremal path, sampled
  through its eigen-expansion.
* Exact (discrete) and Monte Carlo (continuous) checks of the Rice formula
  and a Monte Carlo check of the Cameron-Martin formula under double
  conditioning.

Randomness: every stream is a counter-based Philox generator keyed by the
master seed and a domain tag.  Direct-simulation realization ``i`` uses
counter block ``i``; the other samplers work in fixed-size chunks, chunk
``c`` using counter block ``c``.  Results are therefore independent of the
number of worker threads (``HILLTAILS_THREADS``).
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import eigh

from ._kernels import ground_state_laguerre, ground_states
from .elliptic import modulus_for_mu
from .grid import GridPath, uniform_grid
from .lame import explicit_eigenfunction, explicit_spectrum, operator_matrix

THREADS_ENV = "HILLTAILS_THREADS"
CHUNK = 4096

# domain tags separating the random streams of different samplers
_DOMAINS = {"direct": 0, "cbm": 1, "path": 2, "pstar": 3, "rice": 4, "cm": 5}


class InsufficientDataError(ValueError):
    """Too few samples (in a window) for an estimate."""


# ---------------------------------------------------------------------------
# random streams and workers
# ---------------------------------------------------------------------------

def worker_count(requested: Optional[int] = None) -> int:
    """Number of worker threads: ``requested`` capped by ``HILLTAILS_THREADS``."""
    cap = os.environ.get(THREADS_ENV)
    n = requested if requested is not None else (os.cpu_count() or 1)
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            raise ValueError(f"{THREADS_ENV} must be an integer, got {cap!r}") from None
    return max(1, int(n))


def _key(seed: int, domain: str) -> np.ndarray:
    ss = np.random.SeedSequence(int(seed), spawn_key=(_DOMAINS[domain],))
    return ss.generate_state(2, dtype=np.uint64)


def stream(seed: int, domain: str, block: int) -> np.random.Generator:
    """Philox generator for counter block ``block`` of ``domain``."""
    return np.random.Generator(np.random.Philox(key=_key(seed, domain), counter=[0, 0, 0, int(block)]))


def _run_chunks(func: Callable[[int, int, int], object], count: int, workers: Optional[int]):
    """Apply ``func(chunk, start, size)`` over fixed chunks; results in chunk order."""
    chunks = [(c, s, min(CHUNK, count - s)) for c, s in enumerate(range(0, count, CHUNK))]
    w = min(worker_count(workers), max(1, len(chunks)))
    if w == 1:
        return [func(*c) for c in chunks]
    with ThreadPoolExecutor(max_workers=w) as ex:
        return list(ex.map(lambda c: func(*c), chunks))


# ---------------------------------------------------------------------------
# direct simulation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NoiseRealization:
    """Brownian increments over ``n`` cells of ``[0, 1)`` (variance ``h = 1/n`` each)."""

    n: int
    increments: np.ndarray

    def __post_init__(self):
        inc = np.asarray(self.increments, dtype=float)
        if inc.shape != (self.n,):
            raise ValueError("increments must have shape (n,)")
        object.__setattr__(self, "increments", inc)

    @classmethod
    def from_seed(cls, seed: int, index: int, n: int) -> "NoiseRealization":
        """Realization ``index`` of the stream keyed by ``seed`` (reproducible)."""
        g = stream(seed, "direct", index)
        return cls(n, g.standard_normal(n) * math.sqrt(1.0 / n))

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def potential(self) -> np.ndarray:
        """Cell potential ``dB_i / h``."""
        return self.increments / self.h

    def coarsen(self, factor: int) -> "NoiseRealization":
        """Sum increments over blocks of ``factor`` cells (the same Brownian path)."""
        if self.n % factor:
            raise ValueError("factor must divide n")
        return NoiseRealization(self.n // factor, self.increments.reshape(-1, factor).sum(axis=1))

    def shifted(self, c: float) -> "NoiseRealization":
        """Add the constant ``c`` to the potential."""
        return NoiseRealization(self.n, self.increments + c * self.h)


def hill_matrix(noise: NoiseRealization) -> np.ndarray:
    """Dense periodic matrix with diagonal ``2/h^2 + dB_i/h`` and off-diagonal ``-1/h^2``."""
    n, h = noise.n, noise.h
    A = np.zeros((n, n))
    i = np.arange(n)
    A[i, i] = 2.0 / h ** 2 + noise.potential
    A[i, (i + 1) % n] += -1.0 / h ** 2
    A[i, (i - 1) % n] += -1.0 / h ** 2
    return A


@dataclass(frozen=True)
class GroundState:
    value: float
    iterations: int
    converged: bool
    simple: bool


def ground_state(noise: NoiseRealization, tol: float = 1e-13, maxit: int = 100) -> GroundState:
    """Ground state with convergence and simplicity diagnostics."""
    lam, it, ok, slope = ground_state_laguerre(noise.potential, noise.h, tol, maxit)
    return GroundState(float(lam), int(it), bool(ok), bool(slope != 0.0 and math.isfinite(slope)))


def simulate_ground_state(mu_unused, noise: Optional[NoiseRealization] = None) -> float:
    """Smallest periodic eigenvalue ``lambda_0`` of the discretized operator.

    Called as ``simulate_ground_state(mu, noise)`` (``mu`` is ignored; the
    law of ``lambda_0`` does not depend on it) or ``simulate_ground_state(noise)``.

    Raises
    ------
    ValueError
        If ``n < 256``.
    RuntimeError
        If the root iteration did not converge.
    """
    if noise is None:
        noise = mu_unused
    if not isinstance(noise, NoiseRealization):
        raise TypeError("noise must be a NoiseRealization")
    if noise.n < 256:
        raise ValueError("simulate_ground_state needs n >= 256")
    gs = ground_state(noise)
    if not gs.converged:
        raise RuntimeError("ground-state iteration did not converge")
    return gs.value


@dataclass
class DirectSample:
    """Samples of ``-lambda_0`` from the direct simulation."""

    values: np.ndarray      # -lambda_0 of the converged realizations, in index order
    excluded: int           # non-converged or non-simple realizations
    seed: int
    n: int
    count: int


def simulate_ground_states(count: int, n: int = 1024, seed: int = 0,
                           workers: Optional[int] = None) -> DirectSample:
    """``count`` independent realizations; realization ``i`` is ``NoiseRealization.from_seed(seed, i, n)``."""
    if n < 256:
        raise ValueError("simulate_ground_state needs n >= 256")
    h = 1.0 / n
    rt = math.sqrt(h)

    def work(c, start, size):
        V = np.empty((size, n))
        for j in range(size):
            V[j] = stream(seed, "direct", start + j).standard_normal(n) * (rt / h)
        out = np.empty(size)
        it = np.empty(size, np.int64)
        ok = np.empty(size, np.bool_)
        sl = np.empty(size)
        ground_states(V, h, 1e-13, 100, out, it, ok, sl)
        return out, ok & (sl != 0.0)

    parts = _run_chunks(work, count, workers)
    lam = np.concatenate([p[0] for p in parts]) if parts else np.zeros(0)
    good = np.concatenate([p[1] for p in parts]) if parts else np.zeros(0, bool)
    return DirectSample(-lam[good], int((~good).sum()), int(seed), int(n), int(count))


# ---------------------------------------------------------------------------
# density estimation
# ---------------------------------------------------------------------------

@dataclass
class DensityEstimate:
    """Histogram and Gaussian-kernel estimate of a density over a window."""

    edges: np.ndarray
    masses: np.ndarray      # fraction of *all* samples in each bin
    counts: np.ndarray
    stderr: np.ndarray      # standard error of masses / width
    count: int
    bandwidth: float
    kde: np.ndarray         # kernel estimate at the bin centres

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    @property
    def density(self) -> np.ndarray:
        return self.masses / self.widths


def silverman_bandwidth(x: np.ndarray) -> float:
    """``0.9 min(sd, IQR/1.34) N^{-1/5}``."""
    x = np.asarray(x, float)
    sd = float(np.std(x, ddof=1)) if x.size > 1 else 0.0
    q75, q25 = np.percentile(x, [75, 25])
    spread = min(sd, (q75 - q25) / 1.34) if q75 > q25 else sd
    return 0.9 * spread * x.size ** -0.2


def _kde(x: np.ndarray, at: np.ndarray, bw: float, block: int = 1 << 16) -> np.ndarray:
    out = np.zeros(at.size)
    for s in range(0, x.size, block):
        d = (at[:, None] - x[None, s:s + block]) / bw
        out += np.exp(-0.5 * d * d).sum(axis=1)
    return out / (x.size * bw * math.sqrt(2.0 * math.pi))


def estimate_density(samples, window: Tuple[float, float], bins: int = 40) -> DensityEstimate:
    """Histogram over ``window`` plus a Silverman-bandwidth Gaussian kernel estimate.

    Masses are normalized by the total number of samples, so they sum to the
    fraction of samples inside the window.  Standard errors are binomial,
    ``sqrt(p (1 - p) / N) / width``.
    """
    x = np.asarray(samples, float).ravel()
    if x.size < 1000:
        raise InsufficientDataError(f"need at least 1000 samples, got {x.size}")
    lo, hi = map(float, window)
    if not hi > lo:
        raise ValueError("window must have lo < hi")
    edges = np.linspace(lo, hi, bins + 1)
    counts, _ = np.histogram(x, edges)
    if counts.sum() == 0:
        raise InsufficientDataError(f"no samples in window [{lo}, {hi}]")
    N = x.size
    p = counts / N
    w = np.diff(edges)
    se = np.sqrt(p * (1.0 - p) / N) / w
    bw = silverman_bandwidth(x)
    centers = 0.5 * (edges[1:] + edges[:-1])
    kde = _kde(x, centers, bw) if bw > 0 else p / w
    return DensityEstimate(edges, p, counts, se, N, bw, kde)


def point_density(samples, x0: float, halfwidth: float = 0.1) -> Tuple[float, float]:
    """``P(|X - x0| < halfwidth) / (2 halfwidth)`` with its binomial standard error."""
    x = np.asarray(samples, float).ravel()
    if x.size == 0:
        raise InsufficientDataError("no samples")
    p = float(np.mean(np.abs(x - x0) < halfwidth))
    return p / (2 * halfwidth), math.sqrt(p * (1 - p) / x.size) / (2 * halfwidth)


def tail_slope(est: DensityEstimate, min_count: int = 5) -> Tuple[float, float]:
    """Weighted least-squares slope of ``log density`` against ``-mu^2 / 2``.

    Bins with fewer than ``min_count`` samples are dropped; weights are the
    bin counts (inverse variance of the log).  Returns ``(slope, stderr)``.
    """
    keep = est.counts >= min_count
    if keep.sum() < 3:
        raise InsufficientDataError("fewer than three populated bins")
    xs = -0.5 * est.centers[keep] ** 2
    ys = np.log(est.density[keep])
    w = est.counts[keep].astype(float)
    X = np.column_stack([np.ones_like(xs), xs])
    WX = X * w[:, None]
    cov = np.linalg.inv(X.T @ WX)
    beta = cov @ (WX.T @ ys)
    return float(beta[1]), float(math.sqrt(cov[1, 1]))


# ---------------------------------------------------------------------------
# circular Brownian motion and the path integral
# ---------------------------------------------------------------------------

def cbm_meanzero_batch(rng: np.random.Generator, count: int, n: int) -> np.ndarray:
    """``count`` mean-zero circular Brownian paths on ``n`` points (rows).

    A Brownian bridge pinned at ``x = 0`` and ``x = 1`` minus its grid mean.
    """
    h = 1.0 / n
    dW = rng.standard_normal((count, n)) * math.sqrt(h)
    W = np.zeros((count, n))
    np.cumsum(dW[:, :-1], axis=1, out=W[:, 1:])
    total = W[:, -1] + dW[:, -1]
    B = W - np.outer(total, np.arange(n) * h)
    return B - B.mean(axis=1, keepdims=True)


def sample_cbm_meanzero(n: int, count: int, seed: int = 0) -> Iterator[GridPath]:
    """Stream of mean-zero circular Brownian paths as :class:`GridPath`."""
    done = 0
    c = 0
    while done < count:
        size = min(CHUNK, count - done)
        for row in cbm_meanzero_batch(stream(seed, "cbm", c), size, n):
            yield GridPath(row)
        done += size
        c += 1


def cbm_meanzero_covariance(s, t):
    """Covariance of the mean-zero circular Brownian motion.

    The bridge kernel ``min(s, t) - s t`` with its row, column and total
    means removed: ``1/12 - |s - t|/2 + (s - t)^2/2``.
    """
    d = np.abs(np.asarray(s, float) - np.asarray(t, float))
    return 1.0 / 12.0 - 0.5 * d + 0.5 * d * d


def log_A_batch(p: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """``log A_+-`` for rows of mean-zero paths; cumulative trapezoid antiderivative."""
    n = p.shape[1]
    h = 1.0 / n
    P = np.zeros_like(p)
    np.cumsum(0.5 * (p[:, 1:] + p[:, :-1]) * h, axis=1, out=P[:, 1:])
    P *= 2.0
    from scipy.special import logsumexp
    return logsumexp(P, axis=1) - math.log(n), logsumexp(-P, axis=1) - math.log(n)


def path_weights(p: np.ndarray, mu: float) -> np.ndarray:
    """``(2 pi)^{-1/2} exp(-1/2 int (mu - p^2)^2) A(p)`` for rows of ``p``."""
    lp, lm = log_A_batch(p)
    e = -0.5 * np.mean((mu - p * p) ** 2, axis=1)
    return np.exp(e + lp + lm) / math.sqrt(2.0 * math.pi)


@dataclass
class MCEstimate:
    estimate: float
    stderr: float
    count: int
    flagged: bool = False
    extra: Dict[str, float] = field(default_factory=dict)


def path_integral_density(mu: float, count: int = 100_000, n: int = 1024, seed: int = 0,
                          workers: Optional[int] = None) -> MCEstimate:
    """Naive Monte Carlo of the functional-integral density formula at ``mu``.

    Restricted to ``-2 <= mu <= 2.5`` where plain circular-Brownian sampling
    is efficient.  Flagged when the relative standard error exceeds 50 %.
    """
    mu = float(mu)
    if not (-2.0 <= mu <= 2.5):
        raise ValueError("path_integral_density is restricted to -2 <= mu <= 2.5")

    def work(c, start, size):
        w = path_weights(cbm_meanzero_batch(stream(seed, "path", c), size, n), mu)
        return w.sum(), (w * w).sum(), w.min()

    parts = _run_chunks(work, count, workers)
    s1 = sum(p[0] for p in parts)
    s2 = sum(p[1] for p in parts)
    mean = s1 / count
    var = max(s2 / count - mean * mean, 0.0) * count / max(count - 1, 1)
    se = math.sqrt(var / count)
    return MCEstimate(mean, se, count, bool(se > 0.5 * mean),
                      {"min_weight": float(min(p[2] for p in parts))})


# ---------------------------------------------------------------------------
# conditioned Gaussian measure around the extremal path
# ---------------------------------------------------------------------------

class NormalizerError(ValueError):
    """A mode normalizer has a non-positive radicand."""


@dataclass
class ConditionedGaussianSampler:
    """Eigen-expansion of the Gaussian measure conditioned on ``int p = 0``, ``<p, phi_1> = 0``.

    ``p = m_0 g_0 + phi_2 g_2 / sqrt(l_2 - 2mu) + phi_3 g_3 / sqrt(l_3 - 2mu)
    + sum_{l >= 5} phi_l g_l / sqrt(l_l - 2mu)`` with the mixed lowest mode
    ``m_0 = (c4 phi_0 + c0 phi_4) / sqrt(c4^2 (l_0 - 2mu) + c0^2 (l_4 - 2mu))``.
    Modes 0..4 are the explicit Lame eigenfunctions; higher modes come from a
    Fourier-collocation eigensolve, projected off the constant and ``phi_1``.
    """

    mu: float
    n: int
    low: np.ndarray        # (3, n): m_0, phi_2 / sqrt(.), phi_3 / sqrt(.)
    high: np.ndarray       # (L, n): phi_l / sqrt(l_l - 2 mu), l >= 5
    phi1: np.ndarray
    low_radicands: np.ndarray
    high_radicands: np.ndarray

    @classmethod
    def build(cls, mu: float, n: int = 512, L: Optional[int] = None) -> "ConditionedGaussianSampler":
        mu = float(mu)
        if L is None:
            L = max(64, int(math.ceil(4.0 * math.sqrt(mu))))
        if n < 16 * math.sqrt(mu) or 5 + L > n // 2:
            raise ValueError(f"grid n={n} too coarse for mu={mu} with L={L} high modes")
        ctx = modulus_for_mu(mu)
        sp = explicit_spectrum(ctx, mu, n)
        phis = [explicit_eigenfunction(sp, j, n).function.values for j in range(5)]
        lam = sp.scaled
        d0 = sp.c4 ** 2 * (lam[0] - 2 * mu) + sp.c0 ** 2 * (lam[4] - 2 * mu)
        r = np.array([d0, lam[2] - 2 * mu, lam[3] - 2 * mu])
        names = ["c4^2 (lambda_0 - 2mu) + c0^2 (lambda_4 - 2mu)", "lambda_2 - 2mu", "lambda_3 - 2mu"]
        for val, name in zip(r, names):
            if not val > 0:
                raise NormalizerError(f"normalizer radicand {name} = {val:.3e} is not positive")
        m0 = (sp.c4 * phis[0] + sp.c0 * phis[4]) / math.sqrt(d0)
        low = np.vstack([m0, phis[2] / math.sqrt(r[1]), phis[3] / math.sqrt(r[2])])
        # high modes from a dense eigensolve of the collocation matrix
        w, V = eigh(operator_matrix(ctx, n, "fourier"), subset_by_index=[5, 4 + L])
        V = V.T * math.sqrt(n)  # L^2[0,1]-normalized rows
        one = np.ones(n)
        f1 = phis[1]
        V = V - np.outer(V @ one / n, one)
        V = V - np.outer(V @ f1 / n, f1)
        hr = w - 2 * mu
        if np.any(hr <= 0):
            bad = int(np.argmax(hr <= 0)) + 5
            raise NormalizerError(f"normalizer radicand lambda_{bad} - 2mu is not positive")
        return cls(mu, n, low, V / np.sqrt(hr)[:, None], f1, r, hr)

    @property
    def L(self) -> int:
        return self.high.shape[0]

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        """``count`` paths as rows."""
        g_low = rng.standard_normal((count, 3))
        g_high = rng.standard_normal((count, self.L))
        return g_low @ self.low + g_high @ self.high

    def high_part(self, rng: np.random.Generator, count: int) -> np.ndarray:
        return rng.standard_normal((count, self.L)) @ self.high

    def expected_l2(self) -> float:
        """Exact ``E[int p^2]`` of the (truncated) expansion."""
        return float(np.sum(np.mean(self.low ** 2, axis=1)) + np.sum(np.mean(self.high ** 2, axis=1)))

    def high_variance_profile(self) -> np.ndarray:
        """``E[p_h(x)^2] = sum_{l >= 5} phi_l(x)^2 / (l_l - 2mu)`` on the grid."""
        return np.sum(self.high ** 2, axis=0)


def sample_pstar(sampler: ConditionedGaussianSampler, count: int, seed: int = 0) -> Iterator[GridPath]:
    """Stream of paths from the conditioned Gaussian measure."""
    done, c = 0, 0
    while done < count:
        size = min(CHUNK, count - done)
        for row in sampler.sample(stream(seed, "pstar", c), size):
            yield GridPath(row)
        done += size
        c += 1


def pstar_l2_moment(mu: float, count: int = 20_000, seed: int = 0, n: int = 512,
                    L: Optional[int] = None) -> MCEstimate:
    """Monte Carlo ``E*[int p^2]`` with the exact value in ``extra``."""
    s = ConditionedGaussianSampler.build(mu, n, L)
    vals = []
    done, c = 0, 0
    while done < count:
        size = min(CHUNK, count - done)
        P = s.sample(stream(seed, "pstar", c), size)
        vals.append(np.mean(P * P, axis=1))
        done += size
        c += 1
    v = np.concatenate(vals)
    return MCEstimate(float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size)), count,
                      extra={"exact": s.expected_l2(),
                             "sup_high_variance": float(s.high_variance_profile().max())})


# ---------------------------------------------------------------------------
# Rice formula: exact discrete version
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LatticeProcess:
    """Finite stationary process on the cyclic lattice ``Z_N``: paths with exact probabilities."""

    paths: Tuple[Tuple[int, ...], ...]
    probs: Tuple[Fraction, ...]

    def __post_init__(self):
        if len(self.paths) != len(self.probs) or not self.paths:
            raise ValueError("paths and probabilities must be non-empty and aligned")
        N = len(self.paths[0])
        if any(len(p) != N for p in self.paths):
            raise ValueError("all paths must have the same length")
        if N > 16:
            raise ValueError("lattice size must be at most 16 for enumeration")
        if len({v for p in self.paths for v in p}) > 5:
            raise ValueError("at most 5 distinct values are supported")
        if sum(self.probs) != 1:
            raise ValueError("probabilities must sum to 1")

    @property
    def size(self) -> int:
        return len(self.paths[0])

    def as_dict(self) -> Dict[Tuple[int, ...], Fraction]:
        out: Dict[Tuple[int, ...], Fraction] = {}
        for p, q in zip(self.paths, self.probs):
            out[p] = out.get(p, Fraction(0)) + q
        return out

    def is_stationary(self) -> bool:
        d = self.as_dict()
        return all(d.get(p[1:] + p[:1], Fraction(0)) == q for p, q in d.items())

    @classmethod
    def from_patterns(cls, patterns: Sequence[Tuple[Sequence[int], Fraction]]) -> "LatticeProcess":
        """Mixture of patterns, each placed at a uniformly random rotation."""
        total = sum(Fraction(w) for _, w in patterns)
        d: Dict[Tuple[int, ...], Fraction] = {}
        for pat, w in patterns:
            pat = tuple(int(v) for v in pat)
            N = len(pat)
            for s in range(N):
                r = pat[s:] + pat[:s]
                d[r] = d.get(r, Fraction(0)) + Fraction(w) / (total * N)
        keys = sorted(d)
        return cls(tuple(keys), tuple(d[k] for k in keys))

    @classmethod
    def iid_conditioned(cls, weights: Dict[int, Fraction], size: int) -> "LatticeProcess":
        """I.i.d. values conditioned on having at least one zero (a shift-invariant event)."""
        vals = sorted(weights)
        d = {}
        for path in product(vals, repeat=size):
            if 0 in path:
                q = Fraction(1)
                for v in path:
                    q *= Fraction(weights[v])
                d[path] = q
        Z = sum(d.values())
        keys = sorted(d)
        return cls(tuple(keys), tuple(d[k] / Z for k in keys))


@dataclass(frozen=True)
class RiceCheck:
    lhs: Fraction
    rhs: Fraction

    @property
    def exact(self) -> bool:
        return self.lhs == self.rhs


def check_discrete_rice(process: LatticeProcess, F: Callable[[Tuple[int, ...]], object]) -> RiceCheck:
    """Both sides of the discrete Rice identity, by full enumeration.

    ``E[F(X)] = N * E[F(X) / #zeros(X) ; X(0) = 0]`` for a stationary
    process on ``Z_N`` and translation-invariant ``F``.  Arithmetic is exact
    when ``F`` returns integers or fractions.
    """
    if not process.is_stationary():
        raise ValueError("process is not stationary")
    N = process.size
    lhs = Fraction(0)
    rhs = Fraction(0)
    for path, q in process.as_dict().items():
        zeros = sum(1 for v in path if v == 0)
        if zeros == 0:
            raise ValueError(f"path {path} has no zero")
        f = F(path)
        if F(path[1:] + path[:1]) != f:
            raise ValueError(f"F is not translation invariant at {path}")
        f = Fraction(f) if isinstance(f, (int, Fraction)) else f
        lhs += q * f
        if path[0] == 0:
            rhs += q * f / zeros
    return RiceCheck(lhs, N * rhs)


# ---------------------------------------------------------------------------
# Rice formula: smooth Gaussian process, Monte Carlo
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FourierProcess:
    """``X(x) = sum_j s_j (a_j cos 2 pi j x + b_j sin 2 pi j x)`` with i.i.d. standard ``a_j, b_j``."""

    scales: Tuple[float, ...]

    @classmethod
    def default(cls, mu: float = 0.7) -> "FourierProcess":
        """Three harmonics with amplitudes ``(1, mu, 1/2)``."""
        return cls((1.0, float(mu), 0.5))

    @property
    def sigma0(self) -> float:
        return math.sqrt(sum(s * s for s in self.scales))

    def coefficients(self, rng: np.random.Generator, count: int, x0: Optional[np.ndarray] = None):
        """``(a, b)`` of shape ``(count, m)``; with ``x0`` the value ``X(0)`` is prescribed."""
        z = rng.standard_normal((2, count, len(self.scales)))
        return self.coefficients_from(z, x0)

    def coefficients_from(self, z: np.ndarray, x0: Optional[np.ndarray] = None):
        """Coefficients from standard normals ``z`` of shape ``(2, count, m)``."""
        s = np.array(self.scales)
        a, b = z[0], z[1]
        if x0 is not None:
            # condition the Gaussian vector a on sum s_j a_j = x0
            u = s / self.sigma0
            a = a - np.outer(a @ u, u) + np.outer(np.asarray(x0) / self.sigma0, u)
        return a * s, b * s

    def evaluate(self, a, b, x):
        j = np.arange(1, a.shape[1] + 1)
        ph = 2 * np.pi * np.outer(x, j)
        return a @ np.cos(ph).T + b @ np.sin(ph).T

    def derivative(self, a, b, x):
        j = np.arange(1, a.shape[1] + 1)
        ph = 2 * np.pi * np.outer(x, j)
        return (b * 2 * np.pi * j) @ np.cos(ph).T - (a * 2 * np.pi * j) @ np.sin(ph).T


def _zeros_and_slopes(proc: FourierProcess, a, b, m: int = 512):
    """Zero count, ``N = sum 1/|X'(z)|`` and max of each sample path."""
    x = uniform_grid(m)
    X = proc.evaluate(a, b, x)
    Xn = np.roll(X, -1, axis=1)
    rows, cols = np.nonzero((X > 0) != (Xn > 0))
    z = x[cols] + (1.0 / m) * X[rows, cols] / (X[rows, cols] - Xn[rows, cols])
    ar, br = a[rows], b[rows]
    j = np.arange(1, a.shape[1] + 1)
    for _ in range(4):
        ph = 2 * np.pi * z[:, None] * j
        f = np.sum(ar * np.cos(ph) + br * np.sin(ph), axis=1)
        fp = np.sum(2 * np.pi * j * (br * np.cos(ph) - ar * np.sin(ph)), axis=1)
        z = z - f / fp
    ph = 2 * np.pi * z[:, None] * j
    fp = np.abs(np.sum(2 * np.pi * j * (br * np.cos(ph) - ar * np.sin(ph)), axis=1))
    count = np.bincount(rows, minlength=a.shape[0])
    Ninv = np.bincount(rows, weights=1.0 / fp, minlength=a.shape[0])
    return count, Ninv, X.max(axis=1)


RICE_FUNCTIONALS = {
    "one": lambda zeros, top: np.ones_like(top),
    "max": lambda zeros, top: top,
    "zeros": lambda zeros, top: zeros.astype(float),
}


@dataclass
class RiceContinuousCheck:
    lhs: float
    lhs_se: float
    rhs: float
    rhs_se: float
    excluded: int
    slabs: Dict[float, Tuple[float, float]] = field(default_factory=dict)

    @property
    def z_score(self) -> float:
        return abs(self.lhs - self.rhs) / math.hypot(self.lhs_se, self.rhs_se)


def slab_extrapolation_weights(deltas: Sequence[float]) -> np.ndarray:
    """Weights extrapolating slab averages to ``delta = 0`` by a polynomial in ``sqrt(delta)``.

    The slab average ``(2 delta)^{-1} int_{-delta}^{delta} g(u) du`` of the
    conditional weight is not smooth in ``delta``: a zero of the path close
    to ``x = 0`` appears or disappears with a near-horizontal tangent, giving
    ``g(u) - g(0) ~ |u|^{1/2}``.  The weights cancel the ``delta^{1/2}`` and
    ``delta`` terms (for three slabs).
    """
    x = np.sqrt(np.asarray(deltas, float))
    return np.array([np.prod([x[j] / (x[j] - x[i]) for j in range(x.size) if j != i])
                     for i in range(x.size)])


def check_rice_continuous(mu: float = 0.7, count: int = 100_000, functional: str = "one",
                          seed: int = 0, deltas: Sequence[float] = (0.02, 0.01, 0.005),
                          grid: int = 512) -> RiceContinuousCheck:
    """Monte Carlo of both sides of the continuous Rice identity.

    ``E[F(X)] = p_{X(0)}(0) E[F(X) / N(X) | X(0) = 0]`` with
    ``N = sum_z |X'(z)|^{-1}`` for the three-harmonic process
    :meth:`FourierProcess.default` (``mu`` is its second-harmonic amplitude).

    The conditional side uses slabs ``|X(0)| < delta``: ``X(0)`` is drawn
    uniformly in the slab (weighted by its density) and the rest of the path
    from the Gaussian conditional, which is the slab average without
    rejection.  All slabs share their random numbers, and the slab averages
    are extrapolated to ``delta = 0`` with :func:`slab_extrapolation_weights`.
    The exactly conditioned average (``delta = 0``, available because the
    process is Gaussian) is reported in ``slabs[0.0]``.
    """
    F = RICE_FUNCTIONALS[functional]
    proc = FourierProcess.default(mu)
    s0 = proc.sigma0
    ds = [float(d) for d in deltas]
    wts = slab_extrapolation_weights(ds)
    excluded = 0
    lhs_parts, comb_parts = [], []
    slab_parts: Dict[float, List[np.ndarray]] = {d: [] for d in ds + [0.0]}
    done, c = 0, 0
    while done < count:
        size = min(CHUNK, count - done)
        g = stream(seed, "rice", 2 * c)
        a, b = proc.coefficients(g, size)
        zc, _, top = _zeros_and_slopes(proc, a, b, grid)
        ok = zc > 0
        excluded += int((~ok).sum())
        lhs_parts.append(F(zc[ok], top[ok]))
        # conditional side with common random numbers across slabs
        g = stream(seed, "rice", 2 * c + 1)
        u = g.uniform(-1.0, 1.0, size)
        z = g.standard_normal((2, size, len(proc.scales)))
        comb = np.zeros(size)
        for d, w in zip(ds + [0.0], list(wts) + [0.0]):
            x0 = d * u
            a, b = proc.coefficients_from(z, x0)
            zc, Ninv, top = _zeros_and_slopes(proc, a, b, grid)
            ok = (zc > 0) & (Ninv > 0)
            excluded += int((~ok).sum())
            dens = np.exp(-0.5 * (x0 / s0) ** 2) / (s0 * math.sqrt(2 * math.pi))
            y = np.zeros(size)
            y[ok] = F(zc[ok], top[ok]) / Ninv[ok] * dens[ok]
            slab_parts[d].append(y)
            comb += w * y
        comb_parts.append(comb)
        done += size
        c += 1
    mse = lambda v: (float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size)))
    lhs, lhs_se = mse(np.concatenate(lhs_parts))
    rhs, rhs_se = mse(np.concatenate(comb_parts))
    slabs = {d: mse(np.concatenate(v)) for d, v in slab_parts.items()}
    return RiceContinuousCheck(lhs, lhs_se, rhs, rhs_se, excluded, slabs)


# ---------------------------------------------------------------------------
# Cameron-Martin under double conditioning
# ---------------------------------------------------------------------------

class RankError(ValueError):
    """Conditioning functions are linearly dependent."""


def _laplacian_pinv_apply(v: np.ndarray) -> np.ndarray:
    """``L^+ v`` for the periodic graph Laplacian ``L = circ(2, -1, ..., -1)`` (rows of ``v``)."""
    n = v.shape[-1]
    k = np.arange(n // 2 + 1)
    eig = 2.0 - 2.0 * np.cos(2 * np.pi * k / n)
    c = np.fft.rfft(v, axis=-1)
    c[..., 0] = 0.0
    c[..., 1:] /= eig[1:]
    return np.fft.irfft(c, n=n, axis=-1)


@dataclass
class DoublyConditionedCBM:
    """Mean-zero discrete circular Brownian motion conditioned on ``int phi~ p = 0``.

    The mean-zero random-walk bridge has precision ``L/h``; conditioning on
    the linear constraint uses its covariance ``h L^+`` (a Gram-Schmidt step
    in the Cameron-Martin inner product).
    """

    n: int
    cond: np.ndarray       # phi~ on the grid (mean zero)
    _kvec: np.ndarray      # Sigma l / (l' Sigma l)
    _l: np.ndarray

    @classmethod
    def build(cls, conditioning: GridPath) -> "DoublyConditionedCBM":
        n = conditioning.n
        h = 1.0 / n
        c = conditioning.values - conditioning.values.mean()
        if np.sqrt(np.mean(c * c)) < 1e-12:
            raise RankError("conditioning function is (numerically) constant")
        l = h * c
        Sl = h * _laplacian_pinv_apply(l)
        q = float(l @ Sl)
        if not q > 1e-300:
            raise RankError("conditioning projection is rank deficient")
        return cls(n, c, Sl / q, l)

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        p = cbm_meanzero_batch(rng, count, self.n)
        return p - np.outer(p @ self._l, self._kvec)

    def cm_norm2(self, phi: np.ndarray) -> float:
        """Discrete Cameron-Martin norm ``sum (phi_{i+1} - phi_i)^2 / h``."""
        d = np.roll(phi, -1) - phi
        return float(np.sum(d * d) * self.n)

    def log_weight(self, phi: np.ndarray, p: np.ndarray) -> np.ndarray:
        """``h sum (D_h^2 phi) p - 1/2 |phi|_CM^2`` for rows of ``p``."""
        h = 1.0 / self.n
        d2 = (np.roll(phi, -1) - 2 * phi + np.roll(phi, 1)) / h ** 2
        return h * (p @ d2) - 0.5 * self.cm_norm2(phi)


def admissible_shift(bump: GridPath, conditioning: GridPath) -> GridPath:
    """Project ``bump`` onto ``{int phi = 0, int phi phi~ = 0}`` (L^2 Gram-Schmidt)."""
    v = bump.values - bump.values.mean()
    c = conditioning.values - conditioning.values.mean()
    v = v - (v @ c) / (c @ c) * c
    return bump.with_values(v)


@dataclass
class CameronMartinCheck:
    lhs: float
    lhs_se: float
    rhs: float
    rhs_se: float
    weight_second_moment: float
    predicted_second_moment: float
    max_abs_diff: float

    @property
    def z_score(self) -> float:
        s = math.hypot(self.lhs_se, self.rhs_se)
        return 0.0 if s == 0 else abs(self.lhs - self.rhs) / s


def default_functional(p: np.ndarray) -> np.ndarray:
    """``exp(-int p^2)`` for rows of ``p``."""
    return np.exp(-np.mean(p * p, axis=1))


def check_cameron_martin(phi_shift: GridPath, F: Callable[[np.ndarray], np.ndarray] = default_functional,
                         count: int = 100_000, conditioning: Optional[GridPath] = None,
                         seed: int = 0) -> CameronMartinCheck:
    """Monte Carlo of both sides of the shift formula under double conditioning.

    ``E[F(p)] = E[F(p + phi) exp(int phi'' p - 1/2 int phi'^2)]`` where ``p``
    is mean zero and conditioned on ``int phi~ p = 0``; ``phi`` must satisfy
    both constraints.  The discrete forms (second differences and the
    discrete Dirichlet energy) make the identity exact at every grid size.
    ``F`` acts on rows.
    """
    n = phi_shift.n
    if conditioning is None:
        conditioning = GridPath(np.cos(2 * np.pi * uniform_grid(n)))
    if conditioning.n != n:
        raise ValueError("shift and conditioning must share the grid")
    phi = phi_shift.values
    scale = max(1.0, float(np.max(np.abs(phi))))
    if abs(phi.mean()) > 1e-10 * scale:
        raise ValueError("shift must have mean zero")
    c = conditioning.values - conditioning.values.mean()
    if abs(np.mean(phi * c)) > 1e-10 * scale * max(1.0, float(np.max(np.abs(c)))):
        raise ValueError("shift must be orthogonal to the conditioning function")
    sampler = DoublyConditionedCBM.build(conditioning)
    lhs_v, rhs_v, w2 = [], [], []
    maxdiff = 0.0
    done, ch = 0, 0
    while done < count:
        size = min(CHUNK, count - done)
        P = sampler.sample(stream(seed, "cm", ch), size)
        W = np.exp(sampler.log_weight(phi, P))
        a = F(P)
        b = F(P + phi) * W
        lhs_v.append(a)
        rhs_v.append(b)
        w2.append(W * W)
        maxdiff = max(maxdiff, float(np.max(np.abs(a - b))))
        done += size
        ch += 1
    a = np.concatenate(lhs_v)
    b = np.concatenate(rhs_v)
    se = lambda v: float(v.std(ddof=1) / math.sqrt(v.size))
    return CameronMartinCheck(float(a.mean()), se(a), float(b.mean()), se(b),
                              float(np.concatenate(w2).mean()),
                              math.exp(sampler.cm_norm2(phi)), maxdiff)
