import math

import numpy as np
import pytest
from scipy import stats

from isacregion import mc
from isacregion.channel import BinaryPam, ChannelParams, Gaussian, GaussianMixture, SignedChi, avg_error_exact, chernoff_avg_error, detection_exponent
from isacregion.errors import DomainError
from isacregion.mc import (
    DEFAULT_FIT_GRID,
    McEstimate,
    audit_bounds,
    chi2_identity,
    fit_exponent,
    mc_detection_error,
    ncx2_identity,
    standard_distributions,
)

Q1 = 0.15865525393145705141
P10 = ChannelParams.from_db(10.0, 10.0)
UNIT = ChannelParams(1.0, 1.0)  # sigma = 1 for unit-power inputs


class TestMcEstimate:
    def test_fields(self):
        est = McEstimate(1000, 100)
        assert est.p_hat == 0.1
        assert est.ci_half_width == pytest.approx(1.96 * math.sqrt(0.1 * 0.9 / 1000))

    def test_z_and_pool(self):
        est = McEstimate(10_000, 1_100)
        assert est.z_score(0.1) == pytest.approx(0.01 / math.sqrt(0.09 / 10_000))
        assert est.pooled(McEstimate(5_000, 400)) == McEstimate(15_000, 1_500)
        assert McEstimate(1000, 0).z_score(0.0) == 0.0


class TestMonteCarlo:
    def test_noiseless(self):
        est = mc_detection_error(Gaussian(1.0), 8, ChannelParams.from_db(10.0, 60.0), trials=10_000, seed=1)
        assert est.errors_observed == 0

    def test_binary_matches_q1(self):
        est = mc_detection_error(BinaryPam(1.0), 4, UNIT, trials=200_000, seed=2)
        assert abs(est.z_score(Q1)) <= 5

    def test_gaussian_matches_quadrature(self):
        est = mc_detection_error(Gaussian(1.0), 4, UNIT, trials=200_000, seed=3)
        assert abs(est.z_score(avg_error_exact(Gaussian(1.0), 4, UNIT))) <= 5

    @pytest.mark.parametrize("dist", [GaussianMixture(1.0), SignedChi(4)])
    def test_other_laws(self, dist):
        est = mc_detection_error(dist, 3, P10, trials=200_000, seed=4)
        assert abs(est.z_score(avg_error_exact(dist, 3, P10))) <= 5

    def test_seed_determinism(self):
        a = mc_detection_error(SignedChi(3), 2, P10, trials=50_000, seed=9)
        b = mc_detection_error(SignedChi(3), 2, P10, trials=50_000, seed=9)
        c = mc_detection_error(SignedChi(3), 2, P10, trials=50_000, seed=10)
        assert a == b
        assert a != c

    def test_stream_split_determinism(self):
        a = mc_detection_error(Gaussian(1.0), 2, P10, trials=30_001, seed=5, streams=3)
        b = mc_detection_error(Gaussian(1.0), 2, P10, trials=30_001, seed=5, streams=3)
        assert a == b and a.trials == 30_001

    def test_partition_independence(self):
        dist, n = Gaussian(1.0), 2
        one = mc_detection_error(dist, n, P10, trials=400_000, seed=21)
        two = mc_detection_error(dist, n, P10, trials=400_000, seed=22, streams=2)
        # two binomial counts with the same p: difference within 5 SE
        p = (one.errors_observed + two.errors_observed) / (2 * 400_000)
        se = math.sqrt(2 * p * (1 - p) / 400_000)
        assert abs(one.p_hat - two.p_hat) <= 5 * se
        exact = avg_error_exact(dist, n, P10)
        assert abs(two.z_score(exact)) <= 5

    @pytest.mark.parametrize("kw", [dict(trials=999), dict(n=0), dict(streams=0)])
    def test_domain(self, kw):
        args = dict(dist=Gaussian(1.0), n=2, params=P10, trials=1000)
        args.update(kw)
        with pytest.raises(DomainError):
            mc_detection_error(**args)


class TestFits:
    @pytest.mark.parametrize("dist", standard_distributions())
    def test_within_two_percent(self, dist):
        fit = fit_exponent(dist, P10)
        target = detection_exponent(dist, P10)
        assert fit.n_grid == DEFAULT_FIT_GRID
        assert abs(fit.slope / target - 1) <= 0.02
        assert 0.999 <= fit.r_squared <= 1.0

    def test_closed_form_targets(self):
        assert detection_exponent(BinaryPam(1.0), P10) == pytest.approx(1.8033688011112042592, rel=1e-14)
        assert detection_exponent(Gaussian(1.0), P10) == pytest.approx(0.90367746102880205372, rel=1e-14)
        assert detection_exponent(SignedChi(4), P10) == pytest.approx(2 * math.log2(1 + 10 / 16), rel=1e-14)

    @pytest.mark.parametrize("dist", standard_distributions())
    def test_doubling_range_gets_closer(self, dist):
        target = detection_exponent(dist, P10)
        short = fit_exponent(dist, P10, range(50, 401, 50))
        long = fit_exponent(dist, P10, range(100, 801, 100))
        assert abs(long.slope - target) < abs(short.slope - target)

    def test_regression_matches_scipy(self):
        fit = fit_exponent(Gaussian(1.0), P10, [10, 20, 30, 40, 50])
        ref = stats.linregress(fit.n_grid, -np.array(fit.log_errors))
        assert fit.slope == pytest.approx(ref.slope, rel=1e-14)
        for n, lg in zip(fit.n_grid, fit.log_errors):
            assert lg == pytest.approx(math.log2(avg_error_exact(Gaussian(1.0), n, P10)), rel=1e-12)

    @pytest.mark.parametrize("grid", [[1, 2, 3], [1, 3, 2, 4]])
    def test_bad_grid(self, grid):
        with pytest.raises(DomainError):
            fit_exponent(Gaussian(1.0), P10, grid)


class TestAudit:
    @pytest.mark.parametrize("dist", standard_distributions())
    def test_all_pass(self, dist):
        rep = audit_bounds(dist, P10, range(1, 65))
        assert rep.passed and rep.worst_chernoff_margin >= 0
        assert rep.checks == (128 if isinstance(dist, BinaryPam) else 64)

    def test_binary_sandwich_n16(self):
        rep = audit_bounds(BinaryPam(1.0), P10, [16])
        assert rep.passed and rep.worst_sandwich_margin > 0

    def test_mixture_a0_equals_gaussian_bound(self):
        for n in (1, 7, 64):
            assert chernoff_avg_error(GaussianMixture(0.0), n, P10) == chernoff_avg_error(Gaussian(1.0), n, P10)

    def test_violation_is_reported_not_raised(self, monkeypatch):
        monkeypatch.setattr(mc, "log2_chernoff_avg_error", lambda dist, n, params: -1e6)
        rep = audit_bounds(Gaussian(1.0), P10, [1, 2])
        assert not rep.passed and len(rep.violations) == 2
        assert rep.violations[0][1] == 1


class TestIdentities:
    @pytest.mark.parametrize("n", [1, 2, 17, 200])
    @pytest.mark.parametrize("db", [0.0, 10.0, 20.0])
    def test_chi2(self, n, db):
        value, closed = chi2_identity(n, 10 ** (-db / 10))
        assert value == pytest.approx(closed, rel=1e-8)

    @pytest.mark.parametrize("n", [2, 31, 100])
    @pytest.mark.parametrize("a", [0.5, 1.0, 4.0])
    def test_ncx2(self, n, a):
        value, closed = ncx2_identity(n, a * n, (1 + a) / 10.0)
        assert value == pytest.approx(closed, rel=1e-6)

    def test_suites_report(self):
        res = mc.identity_suite()
        assert len(res) == 6 and all(r.passed for r in res)
