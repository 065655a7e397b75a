import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, stats

from isacregion.channel import (
    BinaryPam,
    ChannelParams,
    DetectionOutcome,
    Gaussian,
    GaussianMixture,
    SignedChi,
    avg_error_exact,
    chernoff_avg_error,
    db_to_linear,
    decide,
    detect_state,
    detection_exponent,
    exact_error_given_power,
    linear_to_db,
    log2_avg_error_exact,
    observe,
    power_law,
    sample_inputs,
    sufficient_statistic,
)
from isacregion.errors import DegenerateInputError, DomainError, UnsupportedDistributionError

Q1 = 0.15865525393145705141
Q3 = 0.0013498980316300945267

ALL_DISTS = [BinaryPam(1.0), Gaussian(1.0), GaussianMixture(1.0), SignedChi(4)]


def oracle_avg_error(dist, n, params):
    """Independent route: scipy.stats energy law, scipy quad, Q via norm.sf."""
    sigma2 = dist.second_moment / params.snr2
    if isinstance(dist, BinaryPam):
        return stats.norm.sf(math.sqrt(n * dist.amplitude**2 / sigma2) / 2)
    if isinstance(dist, Gaussian):
        law, scale = stats.chi2(n), dist.variance
    elif isinstance(dist, GaussianMixture):
        law, scale = stats.ncx2(n, dist.a * n), 1.0
    else:
        law, scale = stats.chi2(n * dist.k), 1.0
    f = lambda w: law.pdf(w) * stats.norm.sf(math.sqrt(scale * w / sigma2) / 2)  # noqa: E731
    hi = law.ppf(1 - 1e-16)
    val, _ = integrate.quad(f, 0, hi, epsabs=0, epsrel=1e-12, limit=500, points=[law.mean()])
    return val


class TestParams:
    def test_db_round_trip(self):
        for db in (-100.0, -3.0, 0.0, 10.0, 25.0, 60.0):
            assert linear_to_db(db_to_linear(db)) == pytest.approx(db, abs=1e-12)
        p = ChannelParams.from_db(10.0, 20.0)
        assert (p.snr1, p.snr2) == pytest.approx((10.0, 100.0), rel=1e-15)
        assert p.snr1_db == pytest.approx(10.0, abs=1e-12)

    @pytest.mark.parametrize("snr1,snr2", [(0.0, 1.0), (1.0, -1.0), (math.inf, 1.0), (1.0, math.nan)])
    def test_invalid(self, snr1, snr2):
        with pytest.raises(DomainError):
            ChannelParams(snr1, snr2)

    def test_noise_variances(self):
        p = ChannelParams(10.0, 4.0)
        assert p.comm_noise_var(2.0) == pytest.approx(0.2)
        assert p.sensing_noise_var(2.0) == pytest.approx(0.5)


class TestDistributions:
    def test_second_moments(self):
        assert BinaryPam(3.0).second_moment == 9.0
        assert Gaussian(2.5).second_moment == 2.5
        assert GaussianMixture(4.0).second_moment == 5.0
        assert SignedChi(7).second_moment == 7.0

    @pytest.mark.parametrize(
        "bad", [lambda: BinaryPam(0.0), lambda: Gaussian(-1.0), lambda: GaussianMixture(-0.1), lambda: SignedChi(2.5), lambda: SignedChi(0)]
    )
    def test_invalid(self, bad):
        with pytest.raises(DomainError):
            bad()

    def test_binary_support(self):
        x = sample_inputs(BinaryPam(1.0), 4, seed=3)
        assert x.shape == (4,) and set(np.abs(x)) == {1.0}

    @pytest.mark.parametrize("dist", [BinaryPam(2.0), Gaussian(3.0), GaussianMixture(4.0), SignedChi(1), SignedChi(5)])
    def test_moments_within_5se(self, dist):
        x = sample_inputs(dist, 1_000_000, seed=11)
        se_mean = x.std() / math.sqrt(x.size)
        assert abs(x.mean()) <= 5 * se_mean
        x2 = x**2
        se2 = x2.std() / math.sqrt(x.size)
        if se2 == 0:
            assert x2.mean() == pytest.approx(dist.second_moment)
        else:
            assert abs(x2.mean() - dist.second_moment) <= 5 * se2

    def test_signed_chi_magnitude_law(self):
        x = sample_inputs(SignedChi(3), 200_000, seed=5)
        # |X| is chi with 3 dof
        assert stats.kstest(np.abs(x), stats.chi(3).cdf).pvalue > 1e-4

    def test_deterministic(self):
        a = sample_inputs(GaussianMixture(2.0), 50, seed=123)
        b = sample_inputs(GaussianMixture(2.0), 50, seed=123)
        assert np.array_equal(a, b)

    def test_unsupported(self):
        with pytest.raises(UnsupportedDistributionError):
            sample_inputs("laplace", 3, 0)
        with pytest.raises(UnsupportedDistributionError):
            power_law(object(), 3)


class TestDetector:
    def test_statistic_examples(self):
        assert sufficient_statistic([2.0, -3.0], [2.0, -3.0]) == 1.0
        assert sufficient_statistic([1.0, 1.0], [0.4, 0.8]) == pytest.approx(0.6, rel=1e-15)
        assert sufficient_statistic([1.0, 2.0], [1.1, 1.8]) == pytest.approx(0.94, rel=1e-15)

    def test_degenerate(self):
        with pytest.raises(DegenerateInputError):
            sufficient_statistic([0.0, 0.0], [1.0, 2.0])
        with pytest.raises(DomainError):
            sufficient_statistic([1.0], [1.0, 2.0])

    def test_threshold(self):
        assert decide(0.49) == 0
        assert decide(0.51) == 1
        assert decide(0.5) == 1
        assert detect_state([1.0, -2.0], [0.0, 0.0]) == 0
        assert detect_state([1.0, 1.0], [0.25, 0.75]) == 1

    def test_batched(self):
        x = np.array([[1.0, 1.0], [1.0, 2.0]])
        y = np.array([[0.4, 0.8], [1.1, 1.8]])
        np.testing.assert_allclose(sufficient_statistic(x, y), [0.6, 0.94])

    @given(st.lists(st.floats(-100, 100).filter(lambda v: abs(v) > 1e-3), min_size=1, max_size=20), st.integers(0, 1))
    def test_noiseless_recovers_state(self, x, s):
        x = np.array(x)
        assert sufficient_statistic(x, s * x) == pytest.approx(s, abs=1e-12)
        assert detect_state(x, s * x) == s

    def test_observe(self):
        out = observe([1.0, 2.0, 3.0], 1, 1e-9, np.random.default_rng(0))
        assert isinstance(out, DetectionOutcome)
        assert out.decision == 1 and not out.error
        assert out.decision == int(out.sufficient_statistic >= 0.5)


class TestExactError:
    def test_examples(self):
        assert exact_error_given_power(0.0, 1.0) == 0.5
        assert exact_error_given_power(4 * 2.3**2, 2.3) == pytest.approx(Q1, rel=1e-14)
        assert exact_error_given_power(36.0, 1.0) == pytest.approx(Q3, rel=1e-14)

    def test_domain(self):
        with pytest.raises(DomainError):
            exact_error_given_power(1.0, 0.0)
        with pytest.raises(DomainError):
            exact_error_given_power(-1.0, 1.0)

    @given(st.floats(0, 1e3), st.floats(1e-2, 1e2), st.floats(1e-3, 1e3))
    def test_scaling(self, p, sigma, c):
        a = exact_error_given_power(c * p, math.sqrt(c) * sigma)
        b = exact_error_given_power(p, sigma)
        assert a == pytest.approx(b, rel=1e-12, abs=1e-300)


class TestAverageError:
    @pytest.mark.parametrize("dist", ALL_DISTS + [GaussianMixture(0.5), GaussianMixture(4.0), SignedChi(1), Gaussian(3.0)])
    @pytest.mark.parametrize("n", [1, 2, 5, 8])
    def test_against_scipy_oracle(self, dist, n):
        params = ChannelParams.from_db(10.0, 10.0)
        assert avg_error_exact(dist, n, params) == pytest.approx(oracle_avg_error(dist, n, params), rel=1e-8)

    @pytest.mark.parametrize("db", [0.0, 20.0])
    def test_against_oracle_other_snr(self, db):
        params = ChannelParams.from_db(db, db)
        for dist in ALL_DISTS:
            assert avg_error_exact(dist, 6, params) == pytest.approx(oracle_avg_error(dist, 6, params), rel=1e-8)

    def test_binary_is_closed_form(self):
        params = ChannelParams(1.0, 1.0)  # sigma = 1 for unit amplitude
        assert avg_error_exact(BinaryPam(1.0), 4, params) == pytest.approx(Q1, rel=1e-14)

    def test_deep_tail_is_finite_in_log_domain(self):
        params = ChannelParams.from_db(10.0, 10.0)
        v = log2_avg_error_exact(Gaussian(1.0), 2000, params)
        assert math.isfinite(v) and v < -1500

    def test_power_laws(self):
        assert power_law(BinaryPam(2.0), 3).kind == "fixed"
        assert power_law(GaussianMixture(2.0), 3).lam == 6.0
        assert power_law(SignedChi(4), 3).dof == 12
        assert power_law(GaussianMixture(0.0), 3).kind == "chi2"


class TestChernoffAverage:
    def test_examples(self):
        params = ChannelParams(1.0, 1.0)  # Gaussian{1}: sigma^2 = 1
        assert chernoff_avg_error(Gaussian(1.0), 2, params) == pytest.approx(0.8, rel=1e-15)
        for n in (1, 3, 10):
            g = chernoff_avg_error(Gaussian(1.0), n, params)
            assert chernoff_avg_error(GaussianMixture(0.0), n, params) == g
            assert chernoff_avg_error(SignedChi(1), n, params) == pytest.approx(g, rel=1e-15)

    def test_closed_forms_against_sigma(self):
        params = ChannelParams.from_db(10.0, 10.0)
        n = 7
        s2 = 1.0 / params.snr2
        assert chernoff_avg_error(Gaussian(1.0), n, params) == pytest.approx((1 + 1 / (4 * s2)) ** (-n / 2), rel=1e-13)
        a = 1.5
        s2 = (1 + a) / params.snr2
        expect = (1 + 1 / (4 * s2)) ** (-n / 2) * math.exp(-a * n / (8 * s2 + 2))
        assert chernoff_avg_error(GaussianMixture(a), n, params) == pytest.approx(expect, rel=1e-13)
        assert chernoff_avg_error(BinaryPam(1.0), n, params) == pytest.approx(math.exp(-n * params.snr2 / 8), rel=1e-13)

    @pytest.mark.parametrize("db", [0.0, 10.0, 20.0])
    @pytest.mark.parametrize("dist", ALL_DISTS + [GaussianMixture(4.0), SignedChi(20)])
    def test_exact_below_bound(self, dist, db):
        params = ChannelParams.from_db(db, db)
        for n in (1, 2, 5, 16, 64, 200):
            assert avg_error_exact(dist, n, params) <= chernoff_avg_error(dist, n, params)

    def test_exponents(self):
        params = ChannelParams.from_db(10.0, 10.0)
        assert detection_exponent(BinaryPam(1.0), params) == pytest.approx(1.8033688011112042592, rel=1e-14)
        assert detection_exponent(Gaussian(1.0), params) == pytest.approx(0.90367746102880205372, rel=1e-14)
        assert detection_exponent(SignedChi(80), params) == pytest.approx(1.7757647743381375061, rel=1e-13)
