import math

import numpy as np
import pytest

from hilltails.discriminant import (ConditioningError, delta_2mu_asymptotics, delta_at_zero_sq_minus_4,
                                    free_delta, hochstadt_delta, hochstadt_unscaled, monodromy_delta,
                                    psi_at_lambda1, segment_nodes, solve_gap_points, _gap_integral)
from hilltails.elliptic import EllipticContext, modulus_for_mu
from hilltails.lame import explicit_spectrum, numerical_periodic_spectrum


@pytest.fixture(scope="module")
def setup100():
    ctx = modulus_for_mu(100.0)
    sp = explicit_spectrum(ctx, 100.0)
    return ctx, sp, solve_gap_points(sp)


class TestMonodromy:
    def test_free_equation(self):
        lam = np.array([0.5, 3.0, 40.0, 150.0])
        d = np.asarray(free_delta(lam))
        np.testing.assert_allclose(d, 2 * np.cos(np.sqrt(lam) / 2), atol=1e-10)

    def test_edges(self, setup100):
        ctx, sp, _ = setup100
        lam = sp.scaled
        assert monodromy_delta(100.0, lam[0], ctx).delta == pytest.approx(2.0, abs=1e-5)
        assert monodromy_delta(100.0, lam[1], ctx).delta == pytest.approx(-2.0, abs=1e-5)

    def test_zero_in_instability_region(self):
        assert delta_at_zero_sq_minus_4(100.0) > 0

    def test_wronskian(self, setup100):
        ctx, sp, _ = setup100
        for m in monodromy_delta(100.0, np.linspace(-50, 800, 15), ctx):
            assert m.wronskian_defect <= 1e-9

    def test_periodic_eigenvalues_are_band_edges(self, setup100):
        ctx, _, _ = setup100
        w = numerical_periodic_spectrum(100.0, 1024, 9)
        for m in monodromy_delta(100.0, w, ctx):
            assert abs(abs(m.delta) - 2.0) <= 1e-6

    def test_band_structure(self, setup100):
        ctx, _, _ = setup100
        w = numerical_periodic_spectrum(100.0, 1024, 9)
        # instability below w0 and in (w1, w2), (w3, w4); stability in (w0, w1), (w2, w3), (w4, w5)
        probes = [w[0] - 10, 0.5 * (w[0] + w[1]), 0.5 * (w[1] + w[2]), 0.5 * (w[2] + w[3]),
                  0.5 * (w[3] + w[4]), 0.5 * (w[4] + w[5])]
        inside = [abs(m.delta) <= 2 for m in monodromy_delta(100.0, probes, ctx)]
        assert inside == [False, True, False, True, False, True]


class TestGapPoints:
    def test_interlacing_and_residuals(self, setup100):
        _, sp, g = setup100
        assert sp.lam(1) < g.lp1 < sp.lam(2)
        assert sp.lam(3) < g.lp2 < sp.lam(4)
        assert max(abs(r) for r in g.residuals) <= 1e-8

    def test_small_eps_offsets(self):
        eps = 1e-4
        sp = explicit_spectrum(EllipticContext.from_m1(eps))
        g = solve_gap_points(sp)
        L = math.log(1 / eps)
        assert g.delta1 == pytest.approx(4 / L, rel=0.30)
        assert g.delta2 == pytest.approx(2 / L, rel=0.30)
        assert g.delta1 > 0 and g.delta2 > 0

    def test_quadrature_converged(self, setup100):
        _, sp, g = setup100
        g2 = solve_gap_points(sp, 48)
        assert abs(g2.delta1 - g.delta1) < 1e-9
        assert abs(g2.delta2 - g.delta2) < 1e-9
        for lo, hi in ((1, 2), (3, 4)):
            a = _gap_integral(sp, g, lo, hi, 24, relative=False)
            b = _gap_integral(sp, g, lo, hi, 48, relative=False)
            assert abs(a - b) < 1e-9

    def test_degenerate_gap(self):
        sp = explicit_spectrum(EllipticContext.from_modulus(1e-7))
        with pytest.raises(ConditioningError):
            solve_gap_points(sp)

    def test_singular_quadrature_exact_on_arcsine(self, setup100):
        # int_{l1}^{l2} ds / sqrt((s - l1)(l2 - s)) = pi, a check on the edge substitutions
        _, sp, _ = setup100
        tau, w = segment_nodes(sp, 1, 0.0, sp.diff(2, 1), 24)
        prod = np.ones_like(tau)
        for j in (0, 3, 4):
            prod *= np.abs(sp.diff(1, j) + tau)
        assert float(np.sum(w * np.sqrt(prod))) == pytest.approx(math.pi, rel=1e-12)


class TestHochstadt:
    def test_lowest_edge(self, setup100):
        _, sp, g = setup100
        assert hochstadt_delta(sp, g, sp.scaled[0]) == pytest.approx(2.0, abs=1e-12)

    def test_matches_monodromy(self, setup100):
        ctx, sp, g = setup100
        lam = np.linspace(0.0, 800.0, 20)
        edges = sp.scaled
        lam = np.array([l for l in lam if np.min(np.abs(l - edges)) > 1e-3 * 100] + [])
        ode = monodromy_delta(100.0, lam, ctx)
        for l, m in zip(lam, ode):
            h = hochstadt_delta(sp, g, l)
            assert h == pytest.approx(m.delta, rel=1e-3, abs=1e-9)

    def test_psi_at_lambda1(self, setup100):
        _, sp, g = setup100
        assert psi_at_lambda1(sp, g) == pytest.approx(math.pi, abs=1e-6)

    def test_two_mu_cosh_argument(self, setup100):
        ctx, sp, g = setup100
        hv = hochstadt_unscaled(sp, g, 2.0)
        assert hv.region == "gap1" and hv.sign == -1
        ode = monodromy_delta(100.0, 200.0, ctx).delta
        assert ode < -2
        assert hv.cosh_arg == pytest.approx(math.acosh(-ode / 2), rel=1e-6)

    def test_eps_expansions(self):
        eps = 1e-3
        sp = explicit_spectrum(EllipticContext.from_m1(eps))
        expect = [2 - eps - 0.75 * eps ** 2, None, 5 - 4 * eps, 5 - eps, 6 - 3 * eps]
        for j, e in enumerate(expect):
            if e is not None:
                assert abs(sp.lam(j) - e) <= 10 * eps ** 2

    @pytest.mark.xfail(strict=True, reason="lambda_4 = 2 a_+ = 6 - 3 eps + O(eps^2), not 6 - 4 eps")
    def test_lambda4_expansion_four_eps(self):
        eps = 1e-3
        sp = explicit_spectrum(EllipticContext.from_m1(eps))
        assert abs(sp.lam(4) - (6 - 4 * eps)) <= 10 * eps ** 2


class TestDelta2Mu:
    @pytest.mark.xfail(strict=True, reason="-log((Delta^2(2mu)-4)^{-1/2})/sqrt(mu) tends to 1/2, not 1 "
                                           "(0.445 at mu = 400)")
    def test_normalized_log_near_one_at_400(self):
        assert abs(delta_2mu_asymptotics(400.0).normalized_log - 1) <= 0.15

    def test_closer_to_one_at_2500(self):
        a = delta_2mu_asymptotics(400.0).normalized_log
        b = delta_2mu_asymptotics(2500.0).normalized_log
        assert abs(b - 1) < abs(a - 1)

    def test_normalized_log_tends_to_half(self):
        vals = [delta_2mu_asymptotics(mu).normalized_log for mu in (400.0, 1600.0, 6400.0)]
        assert vals[0] < vals[1] < vals[2] < 0.5
        for mu, v in zip((400.0, 1600.0, 6400.0), vals):
            # Y = log(16 / (3 eps)) + o(1) with eps ~ 16 exp(-sqrt(mu)/2)
            assert v == pytest.approx(0.5 - math.log(3) / math.sqrt(mu), abs=2 / mu)

    def test_cosh_argument(self):
        for mu in (400.0, 2500.0):
            r = delta_2mu_asymptotics(mu)
            eps = modulus_for_mu(mu).m1
            assert r.cosh_arg == pytest.approx(math.log(16 / (3 * eps)), abs=20 * eps * math.log(1 / eps))
            assert r.cosh_arg / (0.5 * math.sqrt(mu)) == pytest.approx(1.0, rel=0.15)

    def test_routes_agree(self):
        a = delta_2mu_asymptotics(400.0, "hochstadt")
        b = delta_2mu_asymptotics(400.0, "monodromy")
        assert a.cosh_arg == pytest.approx(b.cosh_arg, rel=1e-8)

    def test_log_space_at_large_mu(self):
        r = delta_2mu_asymptotics(10000.0)
        assert math.isfinite(r.log_value) and r.log_value < -40

    def test_requires_mu_100(self):
        with pytest.raises(ValueError):
            delta_2mu_asymptotics(50.0)
