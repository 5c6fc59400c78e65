"""Uniform periodic grid functions.

A :class:`GridPath` holds ``n`` equispaced samples of a periodic function on
``[origin, origin + length)``.  Integrals use the trapezoid rule (which is
spectrally accurate for smooth periodic integrands) and derivatives use the
discrete Fourier transform.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class GridPath:
    """Periodic function sampled on a uniform grid.

    Parameters
    ----------
    values : ndarray
        Samples ``f(origin + j*h)`` for ``j = 0..n-1``, ``h = length/n``.
    length : float
        Period of the function.
    origin : float
        Left end of the sampled window.
    """

    values: np.ndarray
    length: float = 1.0
    origin: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size < 2:
            raise ValueError("GridPath needs a 1-d array with at least 2 samples")
        object.__setattr__(self, "values", v)
        if not self.length > 0:
            raise ValueError("period length must be positive")

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def h(self) -> float:
        return self.length / self.n

    @property
    def x(self) -> np.ndarray:
        return self.origin + self.h * np.arange(self.n)

    def with_values(self, values) -> "GridPath":
        return GridPath(np.asarray(values, dtype=float), self.length, self.origin)

    # -- quadrature -----------------------------------------------------
    def integral(self) -> float:
        """Trapezoid rule over one period."""
        return float(self.h * np.sum(self.values))

    def mean(self) -> float:
        return float(np.mean(self.values))

    def inner(self, other: "GridPath") -> float:
        return float(self.h * np.dot(self.values, other.values))

    def norm(self) -> float:
        return float(np.sqrt(self.inner(self)))

    # -- spectral calculus ----------------------------------------------
    def wavenumbers(self) -> np.ndarray:
        return 2.0 * np.pi * np.fft.rfftfreq(self.n, d=self.h)

    def derivative(self, order: int = 1) -> "GridPath":
        return self.with_values(spectral_derivative(self.values, self.length, order))

    def antiderivative(self) -> "GridPath":
        """Periodic antiderivative ``F(x) - F(origin)`` (requires mean zero)."""
        return self.with_values(spectral_antiderivative(self.values, self.length))

    def shifted(self, s: float) -> "GridPath":
        """Return ``x -> f(x + s)`` by Fourier phase shift (exact for band-limited data)."""
        c = np.fft.rfft(self.values)
        c = c * np.exp(1j * self.wavenumbers() * s)
        if self.n % 2 == 0:
            c[-1] = c[-1].real * np.cos(self.wavenumbers()[-1] * s)
        return self.with_values(np.fft.irfft(c, n=self.n))

    def evaluate(self, x) -> np.ndarray:
        """Trigonometric interpolant at arbitrary points."""
        return trig_interpolate(self.values, self.length, np.asarray(x, float) - self.origin)


def spectral_derivative(values: np.ndarray, length: float, order: int = 1) -> np.ndarray:
    n = values.shape[-1]
    k = 2.0 * np.pi * np.fft.rfftfreq(n, d=length / n)
    c = np.fft.rfft(values, axis=-1) * (1j * k) ** order
    if n % 2 == 0 and order % 2 == 1:
        c[..., -1] = 0.0  # the Nyquist mode has no odd derivative
    return np.fft.irfft(c, n=n, axis=-1)


def spectral_antiderivative(values: np.ndarray, length: float) -> np.ndarray:
    """Mean-free antiderivative shifted so that it vanishes at the first sample."""
    n = values.shape[-1]
    k = 2.0 * np.pi * np.fft.rfftfreq(n, d=length / n)
    c = np.fft.rfft(values, axis=-1)
    out = np.zeros_like(c)
    out[..., 1:] = c[..., 1:] / (1j * k[1:])
    if n % 2 == 0:
        out[..., -1] = 0.0
    F = np.fft.irfft(out, n=n, axis=-1)
    return F - F[..., :1]


def trig_interpolate(values: np.ndarray, length: float, x: np.ndarray) -> np.ndarray:
    """Evaluate the trigonometric interpolant of periodic samples at ``x``."""
    n = values.size
    c = np.fft.rfft(values) / n
    k = 2.0 * np.pi * np.fft.rfftfreq(n, d=length / n)
    w = np.full(c.size, 2.0)
    w[0] = 1.0
    if n % 2 == 0:
        w[-1] = 1.0
    x = np.atleast_1d(x)
    phase = np.exp(1j * np.outer(x, k))
    return (phase @ (w * c)).real


def uniform_grid(n: int, length: float = 1.0, origin: float = 0.0) -> np.ndarray:
    return origin + (length / n) * np.arange(n)
