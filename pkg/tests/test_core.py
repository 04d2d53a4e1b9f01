from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from randcp.core import (
    confidence_interval,
    detect,
    k_min,
    max_statistic,
    prefix_stats,
    size_of_change,
    sn_at,
    sn_path,
)
from randcp.errors import DegenerateSeriesError, InvalidInputError
from randcp.expfam import ExpFamilyModel
from randcp.mc import EmpiricalDist, MonteCarloConfig
from randcp.simgen import LocationLaw, SimConfig, gen_amoc_normal

KNOWN = ExpFamilyModel.normal_mean(1.0)
MEANVAR = ExpFamilyModel.normal_meanvar()
STEP = np.array([0.0, 0.0, 0.0, 5.0, 5.0, 5.0])

series = arrays(
    np.float64,
    st.integers(8, 60),
    elements=st.floats(-50, 50, allow_nan=False, allow_infinity=False),
)



@st.composite
def normal_series(draw) -> np.ndarray:
    # continuous draws keep every meanvar segment variance away from zero
    seed = draw(st.integers(0, 2**32 - 1))
    n = draw(st.integers(8, 60))
    loc = draw(st.floats(-50, 50))
    scale = draw(st.floats(0.01, 20))
    return loc + scale * np.random.default_rng(seed).standard_normal(n)


class TestPrefixStats:
    def test_running_sum(self):
        np.testing.assert_array_equal(prefix_stats([1.0, 2.0], KNOWN).cum[:, 0], [0.0, 1.0, 3.0])

    def test_zero_data(self):
        np.testing.assert_array_equal(prefix_stats(np.zeros(3), MEANVAR).cum, np.zeros((4, 2)))

    def test_meanvar_pairs(self):
        cum = prefix_stats([1.0, -1.0, 0.0, 0.0], MEANVAR).cum
        np.testing.assert_array_equal(cum[:3], [[0, 0], [1, 1], [0, 2]])

    def test_k_min(self):
        assert k_min(KNOWN) == 2
        assert k_min(MEANVAR) == 2
        assert k_min(ExpFamilyModel.mvnormal_mean(np.eye(3))) == 4

    def test_too_short_for_splits(self):
        ps = prefix_stats([1.0, 2.0, 3.0], KNOWN)
        with pytest.raises(InvalidInputError):
            sn_path(ps)
        with pytest.raises(InvalidInputError):
            max_statistic(ps)


class TestLikelihoodRatioPath:
    def test_small_step(self):
        ps = prefix_stats([0.0, 0.0, 1.0, 1.0], KNOWN)
        assert sn_at(ps, 2) == pytest.approx(0.5)

    def test_constant_data_is_zero(self):
        ps = prefix_stats(np.full(10, 3.7), KNOWN)
        _, s = sn_path(ps)
        np.testing.assert_array_equal(s, 0.0)

    def test_step_value(self):
        assert sn_at(prefix_stats(STEP, KNOWN), 3) == pytest.approx(18.75)

    def test_step_path(self):
        ks, s = sn_path(prefix_stats(STEP, KNOWN))
        np.testing.assert_array_equal(ks, [2, 3, 4])
        np.testing.assert_allclose(s, [9.375, 18.75, 9.375])

    def test_out_of_range(self):
        with pytest.raises(InvalidInputError):
            sn_at(prefix_stats(STEP, KNOWN), 1)

    def test_degenerate_split_is_nan(self):
        ps = prefix_stats([1.0, 1.0, 1.0, 2.0, 3.0, 4.0], MEANVAR)
        assert math.isnan(sn_at(ps, 2))


class TestCentering:
    @given(x=normal_series())
    def test_centering_leaves_path_unchanged(self, x):
        _, raw = sn_path(prefix_stats(x, MEANVAR))
        _, centered = sn_path(prefix_stats(x, MEANVAR, center=True))
        np.testing.assert_allclose(centered, raw, rtol=1e-6, atol=1e-6)


class TestMaxStatistic:
    def test_step(self):
        assert max_statistic(prefix_stats(STEP, KNOWN)) == (pytest.approx(37.5), 3)

    def test_constant_data_ties_to_smallest_index(self):
        assert max_statistic(prefix_stats(np.ones(12), KNOWN)) == (0.0, k_min(KNOWN))

    def test_all_degenerate(self):
        with pytest.raises(DegenerateSeriesError):
            max_statistic(prefix_stats(np.ones(12), MEANVAR))

    @given(x=series, c=st.floats(-100, 100))
    def test_translation_invariance(self, x, c):
        a = max_statistic(prefix_stats(x, KNOWN))
        b = max_statistic(prefix_stats(x + c, KNOWN))
        assert b[1] == a[1] or math.isclose(b[0], a[0], rel_tol=1e-9, abs_tol=1e-9)
        assert b[0] == pytest.approx(a[0], rel=1e-9, abs=1e-7)


class TestInvariants:
    @given(x=series)
    def test_nonnegative_known_variance(self, x):
        _, s = sn_path(prefix_stats(x, KNOWN))
        assert np.all(s >= -1e-9 * x.size)

    @given(x=normal_series())
    def test_nonnegative_meanvar(self, x):
        _, s = sn_path(prefix_stats(x, MEANVAR))
        s = s[np.isfinite(s)]
        assert np.all(s >= -1e-9 * x.size)

    @given(x=series, c=st.floats(-100, 100))
    def test_translation_invariant_path(self, x, c):
        _, a = sn_path(prefix_stats(x, KNOWN))
        _, b = sn_path(prefix_stats(x + c, KNOWN))
        scale = max(1.0, float(np.max(np.abs(a))))
        np.testing.assert_allclose(b, a, rtol=1e-9, atol=1e-9 * scale * x.size)

    @given(
        x=normal_series(),
        a=st.floats(0.1, 10) | st.floats(-10, -0.1),
        b=st.floats(-100, 100),
    )
    def test_affine_invariant_path_meanvar(self, x, a, b):
        # raw second moments cancel badly when |b| dwarfs the spread; centering is the supported path
        _, s1 = sn_path(prefix_stats(x, MEANVAR, center=True))
        _, s2 = sn_path(prefix_stats(a * x + b, MEANVAR, center=True))
        finite = np.isfinite(s1) & np.isfinite(s2)
        scale = max(1.0, float(np.max(np.abs(s1[finite]), initial=0.0)))
        np.testing.assert_allclose(s2[finite], s1[finite], rtol=1e-8, atol=1e-8 * scale)

    @given(x=series, c=st.floats(0.01, 100))
    def test_argmax_invariant_under_positive_scaling(self, x, c):
        _, s = sn_path(prefix_stats(x, KNOWN))
        assert int(np.argmax(s)) == int(np.argmax(c * s))


class TestSizeOfChange:
    def test_identity_hessian_gives_squared_norm(self):
        data = np.concatenate([np.tile([0.0, 0.0], (5, 1)), np.tile([3.0, 4.0], (5, 1))])
        ps = prefix_stats(data, ExpFamilyModel.mvnormal_mean(np.eye(2)))
        assert size_of_change(ps, 5) == pytest.approx(25.0)

    def test_constant_data(self):
        assert size_of_change(prefix_stats(np.full(8, 2.0), KNOWN), 4) == 0.0

    def test_step(self):
        assert size_of_change(prefix_stats(STEP, KNOWN), 3) == pytest.approx(25.0)


class TestConfidenceInterval:
    def test_arithmetic(self):
        assert confidence_interval(500, 0.01, (-11.0, 11.0)) == (-600, 1600)

    def test_clipped(self):
        assert confidence_interval(500, 0.01, (-11.0, 11.0), n=1000) == (1, 999)

    def test_collapses_for_large_change(self):
        assert confidence_interval(500, 1e12, (-11.0, 11.0), n=1000) == (500, 500)

    @given(
        k=st.integers(1, 999),
        d=st.floats(1e-4, 1e4),
        q=st.floats(0.0, 50.0),
    )
    def test_symmetric_quantiles_contain_estimate(self, k, d, q):
        lo, hi = confidence_interval(k, d, (-q, q), n=1000)
        assert lo <= k <= hi

    def test_zero_size_rejected(self):
        with pytest.raises(InvalidInputError):
            confidence_interval(10, 0.0, (-1.0, 1.0))


class TestDetect:
    def test_constant_known_variance(self):
        rep = detect(np.full(50, 1.5), KNOWN)
        assert rep.reject is False
        assert rep.stat == 0.0
        assert rep.ci is None

    def test_volatility_jump_detected(self):
        cfg = SimConfig(10_000, sigma2=1.1, location_law=LocationLaw.UNIFORM, seed=4)
        sim = gen_amoc_normal(cfg)
        rep = detect(sim.data, MEANVAR)
        assert rep.reject
        assert abs(rep.k_hat - sim.k_star) < 1_500

    def test_null_rarely_rejects(self):
        rng = np.random.default_rng(5)
        rejections = sum(detect(rng.standard_normal(10_000), MEANVAR).reject for _ in range(100))
        assert rejections <= 5

    def test_fixed_critical_value(self):
        rep = detect(STEP, KNOWN, critical_value=6.0)
        assert rep.method == "fixed"
        assert rep.critical_value == 6.0
        assert rep.reject

    def test_bridge_source(self):
        rep = detect(np.random.default_rng(1).standard_normal(300), KNOWN, critical_value="bridge", mc=MonteCarloConfig(1000, 3))
        assert rep.method == "bridge"
        assert 2.0 < rep.critical_value < 4.5

    def test_interval_reported(self):
        xi = EmpiricalDist(np.linspace(-10, 10, 1001))
        data = np.concatenate([np.zeros(100), np.full(100, 5.0)]) + np.random.default_rng(0).standard_normal(200)
        rep = detect(data, KNOWN, xi=xi)
        assert rep.ci is not None
        assert rep.ci[0] <= rep.k_hat <= rep.ci[1]

    def test_report_keys(self):
        doc = detect(np.repeat(STEP, 4), KNOWN).to_dict()
        assert doc["schema_version"] == 1
        assert {"stat", "stat_root", "k_hat", "reject", "ci_low", "ci_high"} <= set(doc)

    def test_bad_alpha(self):
        with pytest.raises(InvalidInputError):
            detect(STEP, KNOWN, alpha=1.5)
