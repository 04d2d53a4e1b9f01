from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from randcp import asymptotics as asy
from randcp.core import prefix_stats, sn_at
from randcp.errors import InvalidInputError
from randcp.expfam import ExpFamilyModel
from randcp.mc import MonteCarloConfig

KNOWN = ExpFamilyModel.normal_mean(1.0)
MEANVAR = ExpFamilyModel.normal_meanvar()
unit = st.floats(0.01, 0.99)


class TestGumbelNorming:
    def test_b2_at_e(self):
        assert asy.b_norm(math.e, 2) == pytest.approx(2.0, abs=1e-12)

    def test_b1_uses_gamma_half(self):
        x = 5.0
        expected = 2 * math.log(x) + 0.5 * math.log(math.log(x)) - 0.5 * math.log(math.pi)
        assert asy.b_norm(x, 1) == pytest.approx(expected, abs=1e-12)

    def test_table_normings(self):
        g = asy.gumbel_norming(2, 10_000)
        assert g.a_val == pytest.approx(2.1073, abs=5e-4)
        assert g.b_val == pytest.approx(5.2385, abs=5e-4)

    def test_small_n_rejected(self):
        with pytest.raises(InvalidInputError):
            asy.gumbel_norming(2, 10)

    @pytest.mark.parametrize(("alpha", "kappa"), [(0.10, 3.8827), (0.05, 4.2242), (0.01, 4.9977)])
    def test_critical_table(self, alpha, kappa):
        assert asy.gumbel_critical_value(alpha, 2, 10_000) == pytest.approx(kappa, abs=5e-4)

    @pytest.mark.parametrize("alpha", [0.05, 0.01])
    def test_pvalue_inverts_critical_value(self, alpha):
        kappa = asy.gumbel_critical_value(alpha, 2, 10_000)
        assert asy.gumbel_pvalue(kappa, 2, 10_000) == pytest.approx(alpha, abs=1e-6)

    def test_pvalue_clamps_at_zero_statistic(self):
        assert asy.gumbel_pvalue(0.0, 2, 10_000) == 1.0

    @given(a1=st.floats(1e-4, 0.999), a2=st.floats(1e-4, 0.999), d=st.integers(1, 4))
    def test_strictly_decreasing_in_alpha(self, a1, a2, d):
        if a1 == a2:
            return
        lo, hi = sorted((a1, a2))
        assert asy.gumbel_critical_value(lo, d, 10_000) > asy.gumbel_critical_value(hi, d, 10_000)

    @given(alpha=st.floats(1e-6, 1 - 1e-6), d=st.integers(1, 4), n=st.integers(16, 10**7))
    def test_round_trip(self, alpha, d, n):
        kappa = asy.gumbel_critical_value(alpha, d, n)
        if kappa > 0:
            assert asy.gumbel_pvalue(kappa, d, n) == pytest.approx(alpha, abs=1e-9)

    def test_bad_alpha(self):
        with pytest.raises(InvalidInputError):
            asy.gumbel_critical_value(0.0, 2, 10_000)


class TestBridgeSupremum:
    def test_below_gumbel_value(self):
        mc = MonteCarloConfig(2000, 7)
        assert asy.sup_bridge_critical_value(0.05, 1, 2000, mc) < asy.gumbel_critical_value(0.05, 1, 10_000)

    def test_monotone_in_alpha(self):
        samples = asy.sup_bridge_samples(1, 500, MonteCarloConfig(1000, 3))
        values = [samples.quantile(1 - a) for a in (0.01, 0.05, 0.2, 0.5, 0.9, 0.999)]
        assert all(x >= y for x, y in zip(values, values[1:]))
        assert values[-1] < values[0]

    def test_deterministic(self):
        mc = MonteCarloConfig(1000, 11)
        assert asy.sup_bridge_critical_value(0.05, 2, 300, mc) == asy.sup_bridge_critical_value(0.05, 2, 300, mc)

    def test_needs_enough_replications(self):
        with pytest.raises(InvalidInputError):
            asy.sup_bridge_critical_value(0.05, 1, 300, MonteCarloConfig(10, 0))


@pytest.fixture(scope="module")
def draws():
    return asy.sample_argmax_what(MonteCarloConfig(2000, 17))


class TestArgmaxSampler:
    def test_median_near_zero(self, draws):
        iqr = draws.quantile(0.75) - draws.quantile(0.25)
        assert abs(draws.quantile(0.5)) <= 4 * iqr / math.sqrt(draws.count)

    def test_larger_drift_shrinks_spread(self, draws):
        steep = asy.sample_argmax_what(MonteCarloConfig(2000, 17), drift=1.0)
        assert np.mean(np.abs(steep.samples)) < np.mean(np.abs(draws.samples))

    def test_window_is_wide_enough(self, draws):
        assert np.count_nonzero(np.abs(draws.samples) > asy.WHAT_T / 2) == 0

    def test_samples_sorted_on_grid(self, draws):
        s = draws.samples
        assert np.all(np.diff(s) >= 0)
        np.testing.assert_allclose(s / asy.WHAT_H, np.round(s / asy.WHAT_H), atol=1e-6)

    def test_needs_enough_replications(self):
        with pytest.raises(InvalidInputError):
            asy.sample_argmax_what(MonteCarloConfig(10, 0))


class TestAlternativeParameters:
    def test_identity_hessian(self):
        model = ExpFamilyModel.mvnormal_mean(np.eye(2))
        ap = asy.alternative_params(model, [0.0, 0.0], [1.0, 3.0])
        assert asy.sigma_a_sq(ap, model) == pytest.approx(1.0)

    def test_scalar_known_variance(self):
        model = ExpFamilyModel.normal_mean(2.0)
        ap = asy.alternative_params(model, [0.0], [1.0])
        assert asy.sigma_a_sq(ap, model) == pytest.approx(2.0)

    def test_eigenvector_case(self):
        cov = np.array([[2.0, 1.0], [1.0, 2.0]])
        model = ExpFamilyModel.mvnormal_mean(cov)
        direction = np.array([1.0, 1.0])
        # the moment map is cov^{-1} theta, so this puts tau2 - tau1 on an eigenvector of H'' = cov
        ap = asy.alternative_params(model, np.zeros(2), cov @ direction)
        np.testing.assert_allclose(ap.tau2 - ap.tau1, direction)
        assert asy.sigma_a_sq(ap, model) == pytest.approx(3.0)

    def test_no_change_rejected(self):
        ap = asy.alternative_params(KNOWN, [0.5], [0.5])
        with pytest.raises(InvalidInputError):
            asy.sigma_a_sq(ap, KNOWN)


class TestLimitCovariance:
    def test_endpoint_vanishes(self):
        assert asy.limit_covariance(1.0, 1.0, 1.0, 1.0) == 0.0

    def test_midpoint(self):
        assert asy.limit_covariance(0.5, 0.5, 0.5, 0.5, 1.0) == pytest.approx(0.25)

    @given(t=unit, lam=unit, t2=unit, lam2=unit, s=st.floats(0.1, 5))
    def test_symmetric(self, t, lam, t2, lam2, s):
        assert asy.limit_covariance(t, lam, t2, lam2, s) == pytest.approx(
            asy.limit_covariance(t2, lam2, t, lam, s), rel=1e-12, abs=1e-15
        )

    @given(points=st.lists(st.tuples(unit, unit), min_size=2, max_size=12), s=st.floats(0.1, 5))
    def test_gram_matrix_psd(self, points, s):
        gram = np.array([[asy.limit_covariance(a, b, c, d, s) for c, d in points] for a, b in points])
        assert np.linalg.eigvalsh(gram).min() >= -1e-10

    def test_bridge_covariance_on_grid(self):
        grid = np.linspace(0.02, 0.98, 20)
        worst = max(
            abs(asy.limit_covariance(t, t, u, u, 1.0) - (min(t, u) - t * u)) for t in grid for u in grid
        )
        assert worst <= 1e-12


class TestDriftTerm:
    def test_case_boundary(self):
        ap = asy.alternative_params(KNOWN, [0.0], [0.1])
        n, k = 100, 50
        expected = (
            k * KNOWN.h_value(ap.tau1)
            + (n - k) * KNOWN.h_value(ap.tau2)
            - n * KNOWN.h_value(0.5 * ap.tau1 + 0.5 * ap.tau2)
        )
        assert asy.mu_n(k, k, n, ap, KNOWN) == pytest.approx(expected, abs=1e-14)

    @given(k=st.integers(1, 99), ks=st.integers(1, 99))
    def test_no_change_is_zero(self, k, ks):
        ap = asy.alternative_params(KNOWN, [0.3], [0.3])
        assert asy.mu_n(k, ks, 100, ap, KNOWN) == pytest.approx(0.0, abs=1e-12)

    def test_direct_evaluation(self):
        ap = asy.alternative_params(KNOWN, [0.0], [0.1])
        n, ks, k = 100, 50, 25

        def h(x: float) -> float:
            return x * x / 2

        mid = (ks - k) / (n - k) * 0.0 + (n - ks) / (n - k) * 0.1
        expected = k * h(0.0) + (n - k) * h(mid) - n * h(0.5 * 0.0 + 0.5 * 0.1)
        assert asy.mu_n(k, ks, n, ap, KNOWN) == pytest.approx(expected, abs=1e-14)

    def test_matches_split_statistic_of_mean_path(self):
        # with every observation at its regime mean, S_n(k) is exactly mu_n
        n, ks = 40, 15
        ap = asy.alternative_params(KNOWN, [-1.0], [2.0])
        data = np.concatenate([np.full(ks, -1.0), np.full(n - ks, 2.0)])
        ps = prefix_stats(data, KNOWN)
        for k in (5, 15, 30):
            assert sn_at(ps, k) == pytest.approx(asy.mu_n(k, ks, n, ap, KNOWN), abs=1e-10)


class TestFluctuationTerm:
    def test_zero_when_observations_at_means(self):
        ap = asy.alternative_params(MEANVAR, MEANVAR.nat_param_from_moments(0, 1), MEANVAR.nat_param_from_moments(1, 2))
        n = 50
        c1 = asy.centered_prefix(np.tile(ap.tau1, (n, 1)), ap.tau1)
        c2 = asy.centered_prefix(np.tile(ap.tau2, (n, 1)), ap.tau2)
        for k in (3, 20, 40):
            assert asy.zn_value(c1, c2, k, 25, ap, MEANVAR) == 0.0

    def test_vanishes_at_k_equal_n(self):
        rng = np.random.default_rng(2)
        ap = asy.alternative_params(MEANVAR, MEANVAR.nat_param_from_moments(0, 1), MEANVAR.nat_param_from_moments(1, 2))
        n = 60
        c1 = asy.centered_prefix(MEANVAR.suff_stat(rng.standard_normal(n)), ap.tau1)
        c2 = asy.centered_prefix(MEANVAR.suff_stat(1 + math.sqrt(2) * rng.standard_normal(n)), ap.tau2)
        for ks in (5, 30, 55):
            assert asy.zn_value(c1, c2, n, ks, ap, MEANVAR) == pytest.approx(0.0, abs=1e-10)

    def test_taylor_remainder_is_small(self):
        from randcp.experiments import two_stream_sn

        rng = np.random.default_rng(8)
        n = 4000
        model = MEANVAR
        ap = asy.alternative_from_moments(model, -2 / math.sqrt(n), -2 / math.sqrt(n) - 0.2, 1.0, 1.0)
        eps = rng.standard_normal(n)
        t1 = model.suff_stat(-2 / math.sqrt(n) + eps)
        t2 = model.suff_stat(-2 / math.sqrt(n) - 0.2 + eps)
        c1, c2 = asy.centered_prefix(t1, ap.tau1), asy.centered_prefix(t2, ap.tau2)
        z0 = np.zeros(2)
        cum1, cum2 = asy.centered_prefix(t1, z0), asy.centered_prefix(t2, z0)
        norm = math.sqrt(n * ap.delta_sq)
        for k, ks in [(400, 2000), (2000, 2000), (3000, 1200)]:
            s = two_stream_sn(cum1, cum2, k, ks, model)
            z = asy.zn_value(c1, c2, k, ks, ap, model)
            r = s - asy.mu_n(k, ks, n, ap, model) - z
            assert abs(r) / norm < 0.5 * max(1.0, abs(z) / norm)


class TestMixedFourthMoment:
    def test_full_interval(self):
        assert asy.mixed_fourth_moment([(0, 1)] * 4) == pytest.approx(3.0)

    def test_independent_halves(self):
        iv = [(0, 0.5), (0, 0.5), (0.5, 1), (0.5, 1)]
        assert asy.mixed_fourth_moment(iv) == pytest.approx(0.25)

    def test_overlapping(self):
        iv = [(0, 0.6), (0.4, 1), (0, 0.6), (0.4, 1)]
        assert asy.mixed_fourth_moment(iv) == pytest.approx(0.44)

    def test_bad_interval(self):
        with pytest.raises(InvalidInputError):
            asy.mixed_fourth_moment([(0.5, 0.2)] * 4)
