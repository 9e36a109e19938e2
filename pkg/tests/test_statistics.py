"""Tests for interpolant statistics, densities and derived quantities."""

import math

import numpy as np
import pytest
from scipy import integrate

from borefield_uq import distributions as db
from borefield_uq import sparse_grid as sg
from borefield_uq import statistics as st
from borefield_uq.exceptions import InsufficientDataError


def _uniform_product(d, lo=-1.0, hi=1.0):
    return db.ProductDistribution(tuple(db.RandomVariable("uniform", lo, hi) for _ in range(d)))


U2 = _uniform_product(2)
U3 = _uniform_product(3)


class TestMean:
    def test_constant(self):
        itp = sg.build_smolyak(lambda x: 4.25, [[-1, 1]] * 2, 2)
        assert st.mean(itp, U2) == pytest.approx(4.25, abs=1e-14)

    def test_odd_function_vanishes(self):
        itp = sg.build_smolyak(lambda x: x[0] ** 3 + x[1], [[-1, 1]] * 2, 3)
        assert st.mean(itp, U2) == pytest.approx(0.0, abs=1e-14)

    def test_separable_quartic(self):
        # E[x^2 y^2] under the uniform product is (1/3)^2
        itp = sg.build_smolyak(lambda x: x[0] ** 2 * x[1] ** 2, [[-1, 1]] * 2, 4)
        assert st.mean(itp, U2) == pytest.approx(1.0 / 9.0, abs=1e-12)

    def test_mixed_triangular(self):
        # E_tri[x^2] = 1/6 on the reference interval
        itp = sg.build_smolyak(lambda x: x[0] ** 2 * x[1] ** 2, [[-1, 1]] * 2, 4)
        mixed = db.ProductDistribution((
            db.RandomVariable("triangular", -1.0, 1.0),
            db.RandomVariable("uniform", -1.0, 1.0),
        ))
        assert st.mean(itp, mixed) == pytest.approx(1.0 / 18.0, abs=1e-12)

    def test_support_mismatch_rejected(self):
        itp = sg.build_smolyak(lambda x: x[0], [[-1, 1]] * 2, 1)
        off = db.ProductDistribution((
            db.RandomVariable("uniform", -1.0, 1.0),
            db.RandomVariable("uniform", -1.0, 0.5),
        ))
        with pytest.raises(ValueError, match="support"):
            st.mean(itp, off)

    def test_physical_domain(self):
        itp = sg.build_smolyak(lambda x: x[0], [[10.0, 20.0]], 1)
        d = db.ProductDistribution((db.RandomVariable("uniform", 10.0, 20.0),))
        assert st.mean(itp, d) == pytest.approx(15.0, abs=1e-12)


class TestMomentAndStd:
    def test_second_moment_of_linear(self):
        # E[x^2] = 1/3 under uniform on [-1, 1]
        itp = sg.build_smolyak(lambda x: x[0], [[-1, 1]] * 2, 1)
        m2 = st.moment(itp, U2, 2, n_samples=200_000, seed=1)
        assert m2 == pytest.approx(1.0 / 3.0, abs=3e-3)

    def test_std_of_quadratic(self):
        # var(x^2) = 1/5 - 1/9
        itp = sg.build_smolyak(lambda x: x[0] ** 2, [[-1, 1]] * 2, 4)
        want = math.sqrt(1.0 / 5.0 - 1.0 / 9.0)
        assert st.std(itp, U2, n_samples=200_000, seed=2) == pytest.approx(want, abs=2e-3)

    def test_std_of_constant_is_zero(self):
        itp = sg.build_smolyak(lambda x: -3.0, [[-1, 1]] * 2, 1)
        assert st.std(itp, U2, n_samples=1000, seed=0) == 0.0

    def test_mean_matches_resample_within_3se(self):
        f = lambda x: math.sin(2 * x[0]) + 0.4 * x[1] ** 3 + x[2] ** 2
        itp = sg.build_smolyak(f, [[-1, 1]] * 3, 4)
        vals = st.resample(itp, U3, 100_000, seed=5)
        se = vals.std(ddof=1) / math.sqrt(vals.size)
        assert abs(st.mean(itp, U3) - vals.mean()) < 3.0 * se


class TestResample:
    def test_deterministic(self):
        itp = sg.build_smolyak(lambda x: x[0] + x[1], [[-1, 1]] * 2, 2)
        a = st.resample(itp, U2, 1000, seed=3)
        b = st.resample(itp, U2, 1000, seed=3)
        assert (a == b).all()

    def test_narrower_distribution_allowed(self):
        itp = sg.build_smolyak(lambda x: x[0], [[-1, 1]], 2)
        narrow = db.ProductDistribution((db.RandomVariable("uniform", -0.5, 0.5),))
        vals = st.resample(itp, narrow, 500, seed=0)
        assert np.abs(vals).max() <= 0.5

    def test_wider_distribution_rejected(self):
        itp = sg.build_smolyak(lambda x: x[0], [[-1, 1]], 2)
        wide = db.ProductDistribution((db.RandomVariable("uniform", -2.0, 1.0),))
        with pytest.raises(ValueError, match="exceeds"):
            st.resample(itp, wide, 100, seed=0)


class TestMarginalSurface:
    def test_additive_function(self):
        f = lambda x: x[0] ** 2 + x[1] + 0.5 * x[2]
        itp = sg.build_smolyak(f, [[-1, 1]] * 3, 3)
        X, Y, tab = st.marginal_surface(itp, U3, (0, 1), grid=5)
        want = X[:, None] ** 2 + Y[None, :]
        assert np.abs(tab - want).max() < 1e-12

    def test_percent_deviation(self):
        f = lambda x: x[0] ** 2 + x[1] + 0.5 * x[2]
        itp = sg.build_smolyak(f, [[-1, 1]] * 3, 3)
        _, _, tab = st.marginal_surface(itp, U3, (0, 1), grid=5)
        _, _, dev = st.marginal_surface(itp, U3, (0, 1), grid=5, reference=2.0)
        assert np.abs(dev - (tab - 2.0) / 2.0 * 100.0).max() < 1e-12

    def test_consistent_with_total_mean(self):
        # integrating the marginal over its own two dimensions gives the mean
        f = lambda x: math.exp(0.3 * x[0]) * (1 + 0.2 * x[1]) + x[2] ** 2
        itp = sg.build_smolyak(f, [[-1, 1]] * 3, 4)
        xs = np.linspace(-1, 1, 201)
        _, _, tab = st.marginal_surface(itp, U3, (0, 1), grid=201)
        m2d = integrate.simpson(integrate.simpson(tab * 0.25, x=xs, axis=1), x=xs)
        # simpson on a 201-point grid resolves the polynomial to ~1e-8
        assert abs(m2d - st.mean(itp, U3)) < 1e-8

    def test_bad_dims(self):
        itp = sg.build_smolyak(lambda x: x[0], [[-1, 1]] * 3, 1)
        with pytest.raises(ValueError):
            st.marginal_surface(itp, U3, (1, 1))
        with pytest.raises(ValueError):
            st.marginal_surface(itp, U3, (0, 7))


class TestKde:
    def test_needs_100_samples(self):
        with pytest.raises(InsufficientDataError):
            st.kde(np.zeros(99))

    def test_bandwidth_rule(self):
        rng = np.random.default_rng(0)
        s = rng.normal(0, 2.0, 5000)
        k = st.kde(s)
        want = 1.06 * s.std(ddof=1) * 5000 ** (-0.2)
        assert k.bandwidth == pytest.approx(want, rel=1e-12)

    def test_normal_peak(self):
        s = np.random.default_rng(3).normal(0.0, 1.0, 20_000)
        k = st.kde(s)
        assert k.pdf(0.0) == pytest.approx(1.0 / math.sqrt(2 * math.pi), rel=0.05)

    def test_uniform_plateau(self):
        s = np.random.default_rng(4).random(20_000)
        k = st.kde(s)
        for x in (0.3, 0.5, 0.7):
            assert k.pdf(x) == pytest.approx(1.0, rel=0.05)

    def test_pdf_integrates_to_one(self):
        s = np.random.default_rng(5).normal(3.0, 0.7, 2_000)
        k = st.kde(s)
        x, y = k.grid(2048, pad=6.0)
        assert integrate.simpson(y, x=x) == pytest.approx(1.0, abs=1e-6)

    def test_cdf_consistent_with_pdf(self):
        s = np.random.default_rng(6).normal(0.0, 1.0, 500)
        k = st.kde(s)
        val, _ = integrate.quad(k.pdf, -8.0, 0.5, limit=200)
        assert k.cdf(0.5) == pytest.approx(val, abs=1e-8)

    def test_degenerate_sample_peaks_at_value(self):
        k = st.kde(np.full(200, 4.2))
        assert k.pdf(4.2) > 1e6
        assert k.pdf(4.2 + 1e-3) == 0.0 or k.pdf(4.2 + 1e-3) < 1e-300


class TestQuantileLowerBound:
    def test_gaussian_fifth_percentile(self):
        s = np.random.default_rng(3).normal(10.0, 0.5, 100_000)
        q = st.quantile_lower_bound(s, 0.95)
        assert q == pytest.approx(10.0 - 1.6449 * 0.5, abs=0.01)

    def test_recount_band(self):
        for seed in range(4):
            s = np.random.default_rng(seed).normal(0.0, 1.0, 100_000)
            q = st.quantile_lower_bound(s, 0.95)
            frac = (s >= q).mean()
            assert 0.945 <= frac <= 0.955, f"seed {seed}: {frac}"

    def test_monotone_in_confidence(self):
        s = np.random.default_rng(7).normal(0.0, 1.0, 50_000)
        qs = [st.quantile_lower_bound(s, c) for c in (0.5, 0.8, 0.95, 0.99)]
        assert qs[0] > qs[1] > qs[2] > qs[3]

    def test_degenerate_sample(self):
        q = st.quantile_lower_bound(np.full(300, 4.2), 0.95)
        assert q == pytest.approx(4.2, abs=1e-6)

    def test_oversmoothed_density_raises(self):
        s = np.random.default_rng(3).normal(10.0, 0.5, 20_000)
        with pytest.raises(RuntimeError, match="disagrees"):
            st.quantile_lower_bound(s, 0.95, density=st.kde(s, bandwidth=2.0))

    def test_bad_confidence(self):
        s = np.random.default_rng(0).normal(0, 1, 200)
        with pytest.raises(ValueError):
            st.quantile_lower_bound(s, 1.0)


class TestCop:
    def test_case_values(self):
        # 35 C reference against a 5.76 C mean fluid temperature
        assert st.cop(5.76, 35.0) == pytest.approx(10.5386, abs=2e-4)
        assert st.cop(0.0, 35.0) == pytest.approx(308.15 / 35.0, rel=1e-12)

    def test_monotone_in_fluid_temperature(self):
        # a warmer source fluid always helps
        assert st.cop(6.2, 35.0) > st.cop(4.66, 35.0)

    def test_invalid_ordering(self):
        with pytest.raises(ValueError):
            st.cop(35.0, 35.0)
        with pytest.raises(ValueError):
            st.cop(40.0, 35.0)
