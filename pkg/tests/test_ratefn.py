import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from hilltails.asymptotics import rate_at_extremal
from hilltails.elliptic import modulus_for_mu
from hilltails.grid import GridPath, uniform_grid
from hilltails.ratefn import (RateProblem, exact_periodic_minimizer, minimize, multiplier_diagnostics,
                              rate_gradient, rate_mu, rate_value, test_function as glued_profile,
                              test_function_rate as glued_profile_rate, zero_crossings)

EIGHT_THIRDS = 8.0 / 3.0


@pytest.fixture(scope="module")
def runs():
    return {a: minimize(RateProblem(a, 512)) for a in (5.0, 10.0, 20.0)}


class TestRateValue:
    def test_zero_path(self):
        for a in (0.5, 3.0, 10.0):
            assert rate_value(GridPath(np.zeros(128), 2 * a, -a), a) == pytest.approx(a, rel=1e-14)

    def test_constants_exact(self):
        f = GridPath(np.full(64, 0.3), 4.0, -2.0)
        assert rate_value(f) == pytest.approx(0.5 * (1 - 0.09) ** 2 * 4.0, rel=1e-14)

    def test_glued_profile_a10(self):
        v = rate_value(glued_profile(10.0, 4096))
        assert EIGHT_THIRDS - 0.01 <= v <= EIGHT_THIRDS

    def test_glued_profile_closed_form(self):
        # the profile has derivative kinks, so spectral quadrature converges like 1/n
        errs = [abs(rate_value(glued_profile(3.0, n)) - glued_profile_rate(3.0)) for n in (2048, 8192, 32768)]
        assert errs[2] < errs[1] < errs[0] and errs[2] < 1e-5

    def test_smooth_tanh_profile_against_quadrature(self):
        a = 3.0
        f = lambda x: np.tanh(2 * np.sin(np.pi * x / a))
        df = lambda x: (1 - np.tanh(2 * np.sin(np.pi * x / a)) ** 2) * 2 * np.cos(np.pi * x / a) * np.pi / a
        ref = quad(lambda x: 0.5 * (1 - f(x) ** 2) ** 2 + 0.5 * df(x) ** 2, -a, a, epsabs=1e-13, limit=200)[0]
        g = GridPath(f(uniform_grid(512, 2 * a, -a)), 2 * a, -a)
        assert rate_value(g, a) == pytest.approx(ref, abs=1e-6)

    def test_nonfinite(self):
        with pytest.raises(ValueError):
            rate_value(GridPath(np.array([0.0, np.nan, 1.0, 0.0]), 2.0, -1.0))

    def test_period_mismatch(self):
        with pytest.raises(ValueError):
            rate_value(GridPath(np.zeros(8), 2.0, -1.0), 3.0)


class TestGluedProfile:
    def test_origin(self):
        f = glued_profile(4.0, 512)
        assert f.evaluate(np.array([0.0]))[0] == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("a", [1.0, 4.0, 12.0])
    def test_continuity_at_glue_points(self, a):
        t = math.tanh(a / 2)
        assert abs(t + math.tanh(-a / 2)) == 0.0  # value gap at x = a/2
        assert 2 / math.cosh(a / 2) ** 2 <= 8 * math.exp(-a)  # derivative jump is O(e^{-a})

    def test_a12_bound(self):
        v = glued_profile_rate(12.0)
        assert EIGHT_THIRDS - 0.01 < v < EIGHT_THIRDS
        assert rate_value(glued_profile(12.0, 8192)) == pytest.approx(v, abs=1e-4)

    def test_needs_a_at_least_one(self):
        with pytest.raises(ValueError):
            glued_profile(0.5)


class TestMinimize:
    def test_a10_range(self, runs):
        r = runs[10.0]
        assert r.converged
        assert 2.55 <= r.I_star <= EIGHT_THIRDS

    def test_approach_to_eight_thirds(self, runs):
        assert abs(runs[20.0].I_star - EIGHT_THIRDS) < abs(runs[10.0].I_star - EIGHT_THIRDS) + 1e-6
        assert abs(runs[20.0].I_star - EIGHT_THIRDS) < abs(runs[5.0].I_star - EIGHT_THIRDS)

    def test_sign_symmetry(self, runs):
        p = RateProblem(10.0, 512)
        neg = minimize(p, p.wrap(-glued_profile(10.0, 512).values))
        assert neg.I_star == pytest.approx(runs[10.0].I_star, abs=1e-8)

    def test_beats_glued_profile(self, runs):
        for a, r in runs.items():
            assert r.I_star <= rate_value(glued_profile(a, 512)) + 1e-8

    def test_mean_zero(self, runs):
        for r in runs.values():
            assert abs(r.f_star.mean()) < 1e-10

    def test_pinned_at_origin(self, runs):
        r = runs[10.0]
        assert abs(r.f_star.evaluate(np.array([0.0]))[0]) < 1e-8

    def test_matches_exact_elliptic_solution(self, runs):
        for a, r in runs.items():
            assert r.I_star == pytest.approx(rate_value(exact_periodic_minimizer(a, 512)), abs=1e-9)

    def test_two_sign_changes(self, runs):
        for r in runs.values():
            assert zero_crossings(r.f_star).size == 2

    def test_zero_separation(self, runs):
        z = zero_crossings(runs[20.0].f_star)
        assert abs((z[1] - z[0]) - 20.0) <= 0.2

    def test_scaling_identity(self, runs):
        # I_mu(p) = mu^{3/2} I(f; a) for p(x) = sqrt(mu) f(sqrt(mu) x), mu = 4 a^2
        a = 10.0
        mu = 4 * a * a
        f = runs[a].f_star
        p = GridPath(math.sqrt(mu) * f.values)
        assert rate_mu(p, mu) == pytest.approx(mu ** 1.5 * runs[a].I_star, rel=1e-12)
        # and the elliptic extremal path of the unit-period problem is within discretization error
        assert rate_at_extremal(modulus_for_mu(mu), mu) == pytest.approx(mu ** 1.5 * runs[a].I_star, rel=1e-3)

    def test_non_convergence_is_flagged(self):
        r = minimize(RateProblem(10.0, 512), max_iter=1, tol=1e-14)
        assert not r.converged

    def test_problem_validation(self):
        with pytest.raises(ValueError):
            RateProblem(-1.0)
        with pytest.raises(ValueError):
            RateProblem(1.0, 32)


class TestMultipliers:
    def test_beta_bound(self, runs):
        assert abs(runs[10.0].beta - 1) <= EIGHT_THIRDS / 10 + 0.05

    def test_alpha_decreases(self, runs):
        # alpha vanishes at round-off level for these minimizers (odd symmetry)
        assert abs(runs[20.0].alpha) <= max(abs(runs[10.0].alpha), 1e-10)

    def test_truncated_tanh_first_integral(self):
        a = 15.0
        x = uniform_grid(2048, 2 * a, -a)
        f = GridPath(np.tanh(x), 2 * a, -a)
        inner = np.abs(x) < a - 3  # away from the wrap-around jump
        v = f.values
        d1 = np.gradient(v, x)
        resid = 0.5 * d1 ** 2 - (0.5 * v ** 4 - v ** 2 + 0.5)
        assert np.max(np.abs(resid[inner])) < 1e-3

    def test_residual_small_for_minimizer(self, runs):
        for r in runs.values():
            assert r.el_residual <= 1e-4

    def test_accepts_path(self, runs):
        alpha, beta, _ = multiplier_diagnostics(runs[10.0].f_star)
        assert (alpha, beta) == pytest.approx((runs[10.0].alpha, runs[10.0].beta))


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(min_value=-1, max_value=1), min_size=3, max_size=3),
       st.floats(min_value=2.0, max_value=8.0))
def test_gradient_matches_finite_differences(coefs, a):
    n = 128
    x = uniform_grid(n, 2 * a, -a)
    w = np.pi / a
    v = sum(c * np.sin((j + 1) * w * x + j) for j, c in enumerate(coefs))
    v -= v.mean()
    f = GridPath(v, 2 * a, -a)
    g = rate_gradient(f)
    d = np.cos(2 * w * x)  # mean-zero direction
    t = 1e-6
    fd = (rate_value(f.with_values(v + t * d)) - rate_value(f.with_values(v - t * d))) / (2 * t)
    assert f.h * np.dot(g, d) == pytest.approx(fd, abs=1e-5)
