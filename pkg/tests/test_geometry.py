import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad

from secnet import geometry
from secnet.geometry import (
    CellLoad,
    CoverageQuery,
    access_probability,
    coverage_probability,
    in_coverage_count_pmf,
    sinr_ccdf_lim,
    typical_cell_pdf,
    user_cell_pdf,
)


class TestSinrCcdf:
    def test_known_value_at_one(self):
        # 1 / (1 + arctan 1) = 1 / (1 + pi/4)
        assert sinr_ccdf_lim(1.0) == pytest.approx(1.0 / (1.0 + math.pi / 4.0),
                                                   abs=1e-15)
        assert sinr_ccdf_lim(1.0) == pytest.approx(0.560099, abs=1e-6)

    def test_zero_threshold_is_certain(self):
        assert sinr_ccdf_lim(0.0) == 1.0

    def test_vectorized(self):
        x = np.array([0.0, 0.5, 1.0, 3.0])
        out = sinr_ccdf_lim(x)
        assert out.shape == x.shape
        assert out[0] == 1.0
        assert np.all(np.diff(out) < 0)

    def test_negative_threshold_rejected(self):
        with pytest.raises(ValueError):
            sinr_ccdf_lim(-0.1)

    @given(st.floats(min_value=0.0, max_value=1e6),
           st.floats(min_value=1e-9, max_value=1e6))
    def test_strictly_decreasing(self, x, dx):
        assert sinr_ccdf_lim(x + dx) < sinr_ccdf_lim(x)

    @given(st.floats(min_value=0.0, max_value=1e8))
    def test_range(self, x):
        v = sinr_ccdf_lim(x)
        assert 0.0 < v <= 1.0


class TestCoverageQuery:
    def test_threshold(self):
        q = CoverageQuery(target_rate=4.0, bandwidth=1.0)
        assert q.sinr_threshold == pytest.approx(15.0)
        q2 = CoverageQuery(target_rate=4.0, bandwidth=2.0)
        assert q2.sinr_threshold == pytest.approx(3.0)

    def test_zero_rate_full_coverage(self):
        assert coverage_probability(CoverageQuery(0.0, 1.0)) == 1.0

    def test_validation(self):
        with pytest.raises(ValueError):
            CoverageQuery(-1.0, 1.0)
        with pytest.raises(ValueError):
            CoverageQuery(1.0, 0.0)


class TestCellPdfs:
    def test_typical_normalization(self):
        total, err = quad(typical_cell_pdf, 0.0, np.inf)
        assert total == pytest.approx(1.0, abs=1e-9)

    def test_user_normalization(self):
        total, err = quad(user_cell_pdf, 0.0, np.inf)
        assert total == pytest.approx(1.0, abs=1e-9)

    def test_means(self):
        # Gamma(3.5, 1/3.5) has mean 1; the size-biased law has mean 4.5/3.5
        m_t, _ = quad(lambda x: x * typical_cell_pdf(x), 0.0, np.inf)
        m_u, _ = quad(lambda x: x * user_cell_pdf(x), 0.0, np.inf)
        assert m_t == pytest.approx(1.0, abs=1e-9)
        assert m_u == pytest.approx(4.5 / 3.5, abs=1e-9)

    def test_size_bias_relation(self):
        # user pdf is x * typical pdf, renormalized by the typical mean (=1)
        for x in [0.01, 0.3, 1.0, 2.5, 7.0]:
            assert user_cell_pdf(x) == pytest.approx(
                x * typical_cell_pdf(x) * 3.5 / 3.5, rel=1e-12
            )

    def test_boundary_and_errors(self):
        assert typical_cell_pdf(0.0) == 0.0
        assert user_cell_pdf(0.0) == 0.0
        with pytest.raises(ValueError):
            typical_cell_pdf(-1.0)
        with pytest.raises(ValueError):
            user_cell_pdf(np.array([0.5, -0.5]))


class TestCountPmf:
    def test_sums_to_one(self):
        load = CellLoad(load=50.0, coverage=0.5)
        k = np.arange(4000)
        assert in_coverage_count_pmf(load, k).sum() == pytest.approx(1.0, abs=1e-9)

    def test_zero_contention_is_degenerate(self):
        load = CellLoad(load=0.0, coverage=0.5)
        assert in_coverage_count_pmf(load, 0) == 1.0
        assert in_coverage_count_pmf(load, 3) == 0.0

    def test_known_head_value(self):
        # contention c = 3.5 makes the k = 0 term exactly 2^-4.5
        load = CellLoad(load=3.5 / (2.0 / 3.0), coverage=1.0)
        assert load.contention == pytest.approx(3.5)
        assert in_coverage_count_pmf(load, 0) == pytest.approx(2.0**-4.5, rel=1e-12)

    def test_rejects_bad_k(self):
        load = CellLoad(load=1.0, coverage=0.5)
        with pytest.raises(ValueError):
            in_coverage_count_pmf(load, -1)
        with pytest.raises(ValueError):
            in_coverage_count_pmf(load, np.array([0.5]))

    @given(st.floats(min_value=0.01, max_value=100.0),
           st.floats(min_value=0.01, max_value=1.0))
    def test_mean_matches_mixture(self, load_val, cov):
        load = CellLoad(load=load_val, coverage=cov)
        k = np.arange(6000)
        mean = float(in_coverage_count_pmf(load, k) @ k)
        assert mean == pytest.approx(load.contention * 4.5 / 3.5, rel=1e-6)


class TestAccessProbability:
    def test_series_identity(self):
        # closed form collapses sum_k pmf(k) / (k+1)
        k = np.arange(8000)
        for c in [0.01, 0.1, 1.0, 3.5, 10.0, 50.0]:
            load = CellLoad(load=c / (2.0 / 3.0), coverage=1.0)
            series = float(np.sum(in_coverage_count_pmf(load, k) / (k + 1.0)))
            assert access_probability(load) == pytest.approx(series, abs=1e-8)

    def test_known_value(self):
        load = CellLoad(load=3.5 / (2.0 / 3.0), coverage=1.0)
        expected = (1.0 - 2.0**-3.5) / 3.5
        assert access_probability(load) == pytest.approx(expected, rel=1e-12)
        assert access_probability(load) == pytest.approx(0.260460, abs=1e-6)

    def test_vanishing_contention_limit(self):
        load = CellLoad(load=0.0, coverage=0.5)
        assert access_probability(load) == 1.0

    def test_taylor_branch_continuity(self):
        # both branches must agree with the series expansion around 0
        f = geometry._access_probability_from_contention
        a1, a2 = 4.5 / 7.0, 4.5 * 5.5 / (6.0 * 3.5 * 3.5)
        for c in [5e-7, 9.9e-7, 1.01e-6, 2e-6]:
            series = 1.0 - a1 * c + a2 * c * c
            assert f(c) == pytest.approx(series, abs=1e-9)

    @given(st.floats(min_value=1e-8, max_value=100.0),
           st.floats(min_value=1e-6, max_value=10.0))
    def test_strictly_decreasing(self, c, dc):
        f = geometry._access_probability_from_contention
        assert f(c + dc) < f(c)

    def test_validation(self):
        with pytest.raises(ValueError):
            CellLoad(load=-1.0, coverage=0.5)
        with pytest.raises(ValueError):
            CellLoad(load=1.0, coverage=1.5)
        with pytest.raises(ValueError):
            CellLoad(load=1.0, coverage=0.5, thinning=0.0)
