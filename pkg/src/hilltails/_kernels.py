"""Compiled inner loops for the Monte Carlo drivers.

The smallest periodic eigenvalue of the discrete Hill operator
``H = -D_h^2 + diag(V)`` is the smallest root of ``D(lam) - 2`` where
``D = tr(T_{n-1} ... T_0)`` and ``T_i = [[2 + h^2 (V_i - lam), -1], [1, 0]]``.
``D - 2`` is a degree-``n`` polynomial in ``lam`` with only real roots, so
Laguerre's iteration started below the spectrum converges monotonically
(and cubically) to the ground state.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

_BIG = 1e150


@njit(cache=True, nogil=True)
def _char_jets(V, h2, lam):
    """``(D - 2, D', D'')`` at ``lam`` up to a common positive factor ``2^-s``.

    Returns the scaled jets and the scale exponent ``s``.
    """
    # M = product so far, M1 = dM/dlam, M2 = d^2M/dlam^2 (2x2 each)
    a, b, c, d = 1.0, 0.0, 0.0, 1.0
    a1 = b1 = c1 = d1 = 0.0
    a2 = b2 = c2 = d2 = 0.0
    scale = 0.0
    n = V.shape[0]
    for i in range(n):
        t = 2.0 + h2 * (V[i] - lam)
        # T = [[t, -1], [1, 0]], T' = [[-h2, 0], [0, 0]]
        na2 = t * a2 - c2 - 2.0 * h2 * a1
        nb2 = t * b2 - d2 - 2.0 * h2 * b1
        na1 = t * a1 - c1 - h2 * a
        nb1 = t * b1 - d1 - h2 * b
        na = t * a - c
        nb = t * b - d
        c2, d2 = a2, b2
        c1, d1 = a1, b1
        c, d = a, b
        a2, b2, a1, b1, a, b = na2, nb2, na1, nb1, na, nb
        m = max(abs(a), abs(b), abs(c), abs(d))
        if m > _BIG:
            f = 1.0 / _BIG
            a *= f; b *= f; c *= f; d *= f
            a1 *= f; b1 *= f; c1 *= f; d1 *= f
            a2 *= f; b2 *= f; c2 *= f; d2 *= f
            scale += math.log(_BIG)
    p = a + d - 2.0 * math.exp(-scale)
    return p, a1 + d1, a2 + d2, scale


@njit(cache=True, nogil=True)
def ground_state_laguerre(V, h, tol, maxit):
    """Smallest periodic eigenvalue of ``-D_h^2 + diag(V)``.

    Returns ``(lam0, iterations, converged, slope)`` where ``slope`` is
    ``d(D - 2)/dlam`` at the root (up to a positive factor); it is nonzero
    exactly when the ground state is simple.
    """
    n = V.shape[0]
    h2 = h * h
    lam = V.min() - 1.0  # Gershgorin: lam0 >= min V
    converged = False
    it = 0
    slope = 0.0
    prev = math.inf
    for it in range(1, maxit + 1):
        p, p1, p2, _ = _char_jets(V, h2, lam)
        slope = p1
        if p == 0.0:
            converged = True
            break
        G = p1 / p
        H = G * G - p2 / p
        disc = (n - 1) * (n * H - G * G)
        if disc < 0.0:
            disc = 0.0
        den = G + math.sqrt(disc) if G >= 0 else G - math.sqrt(disc)
        step = -n / den  # exact iterates increase monotonically to the root
        if step <= 0.0 or (step > prev and prev < 1e-6 * max(1.0, abs(lam))):
            # rounding noise in D - 2 dominates: we are at the root
            converged = True
            break
        lam += step
        prev = step
        if step <= tol * max(1.0, abs(lam)):
            converged = True
            break
    return lam, it, converged, slope


@njit(cache=True, nogil=True)
def ground_states(Vbatch, h, tol, maxit, out, iters, ok, slopes):
    for j in range(Vbatch.shape[0]):
        lam, it, conv, s = ground_state_laguerre(Vbatch[j], h, tol, maxit)
        out[j] = lam
        iters[j] = it
        ok[j] = conv
        slopes[j] = s
