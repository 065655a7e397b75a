"""Verification layer: Monte Carlo detection error, exponent fits and bound audits.

Monte Carlo is only used at short blocklengths where the error is large
enough to be estimated. Exponent fits use the exact quadrature values, which
go far below what sampling could ever reach.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy import stats

from . import channel
from .channel import (
    BinaryPam,
    ChannelParams,
    InputDistribution,
    log2_avg_error_exact,
    log2_chernoff_avg_error,
    make_rng,
)
from .errors import AccuracyError, DomainError
from .specfun import (
    DEFAULT_QUADRATURE,
    QuadratureConfig,
    integrate_with_error,
    log_chi2_pdf,
    log_ncx2_pdf,
    q_function,
    q_sandwich,
)

DEFAULT_FIT_GRID = tuple(range(50, 401, 50))
DEFAULT_MC_BLOCKLENGTHS = tuple(range(1, 9))
DEFAULT_TRIALS = 1_000_000

_CHUNK = 1 << 16


@dataclass(frozen=True)
class McEstimate:
    trials: int
    errors_observed: int

    @property
    def p_hat(self) -> float:
        return self.errors_observed / self.trials

    @property
    def ci_half_width(self) -> float:
        p = self.p_hat
        return 1.96 * math.sqrt(p * (1.0 - p) / self.trials)

    def z_score(self, p_true: float) -> float:
        """Deviation from ``p_true`` in binomial standard errors under ``p_true``."""
        se = math.sqrt(p_true * (1.0 - p_true) / self.trials)
        if se == 0:
            return 0.0 if self.p_hat == p_true else math.inf
        return (self.p_hat - p_true) / se

    def pooled(self, other: "McEstimate") -> "McEstimate":
        return McEstimate(self.trials + other.trials, self.errors_observed + other.errors_observed)


def _count_errors(dist: InputDistribution, n: int, sigma: float, trials: int, rng: np.random.Generator) -> int:
    errors = 0
    done = 0
    while done < trials:
        m = min(_CHUNK, trials - done)
        state = rng.integers(0, 2, size=m)
        x = dist.sample(rng, (m, n))
        z = sigma * rng.standard_normal((m, n))
        y = state[:, None] * x + z
        decision = channel.detect_state(x, y)
        errors += int(np.count_nonzero(decision != state))
        done += m
    return errors


def mc_detection_error(
    dist: InputDistribution,
    n: int,
    params: ChannelParams,
    trials: int = DEFAULT_TRIALS,
    seed=0,
    streams: int = 1,
) -> McEstimate:
    """Simulate the state detector over ``trials`` independent blocks.

    Each trial draws S uniform on {0, 1}, X^n from ``dist`` and
    Z^n ~ N(0, sigma^2), then applies the minimum-distance rule. With
    ``streams > 1`` the trials are split over independent child seeds of
    ``seed``; the result is reproducible for a fixed (seed, trials, streams).
    """
    if int(trials) != trials or trials < 1000:
        raise DomainError("Monte Carlo needs at least 1000 trials")
    if int(n) != n or n < 1:
        raise DomainError("n must be a positive integer")
    if int(streams) != streams or streams < 1:
        raise DomainError("streams must be a positive integer")
    sigma = math.sqrt(params.sensing_noise_var(dist.second_moment))
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    if streams == 1:
        return McEstimate(int(trials), _count_errors(dist, int(n), sigma, int(trials), make_rng(root)))
    shares = [trials // streams + (i < trials % streams) for i in range(streams)]
    total = 0
    for child, share in zip(root.spawn(streams), shares):
        total += _count_errors(dist, int(n), sigma, share, make_rng(child))
    return McEstimate(int(trials), total)


@dataclass(frozen=True)
class ExponentFit:
    n_grid: tuple
    log_errors: tuple  # log2 of the exact error at each n
    slope: float  # negated regression slope, estimates E
    intercept: float
    r_squared: float


def fit_exponent(
    dist: InputDistribution,
    params: ChannelParams,
    n_grid: Sequence[int] = DEFAULT_FIT_GRID,
    cfg: QuadratureConfig = DEFAULT_QUADRATURE,
) -> ExponentFit:
    """Least-squares slope of -log2(eps_n) against n from exact error values."""
    n_grid = tuple(int(n) for n in n_grid)
    if len(n_grid) < 4:
        raise DomainError("need at least 4 blocklengths to fit an exponent")
    if any(b <= a for a, b in zip(n_grid, n_grid[1:])):
        raise DomainError("n_grid must be strictly increasing")
    logs = []
    for n in n_grid:
        try:
            logs.append(log2_avg_error_exact(dist, n, params, cfg))
        except AccuracyError as exc:
            raise AccuracyError(f"quadrature failed at n={n}: {exc}", exc.estimate, exc.error) from exc
    reg = stats.linregress(n_grid, -np.asarray(logs))
    return ExponentFit(n_grid, tuple(logs), float(reg.slope), float(reg.intercept), float(reg.rvalue**2))


@dataclass
class AuditReport:
    dist: InputDistribution
    checks: int = 0
    violations: list = field(default_factory=list)
    worst_chernoff_margin: float = math.inf  # min over n of log2(bound) - log2(exact)
    worst_sandwich_margin: Optional[float] = None

    @property
    def passed(self) -> bool:
        return not self.violations


def audit_bounds(
    dist: InputDistribution,
    params: ChannelParams,
    n_grid: Iterable[int],
    cfg: QuadratureConfig = DEFAULT_QUADRATURE,
) -> AuditReport:
    """Check exact error <= Chernoff average for every n (and the Q sandwich for binary PAM).

    Violations are collected in the report rather than raised.
    """
    report = AuditReport(dist)
    sigma = math.sqrt(params.sensing_noise_var(dist.second_moment))
    for n in n_grid:
        exact = log2_avg_error_exact(dist, n, params, cfg)
        bound = log2_chernoff_avg_error(dist, n, params)
        margin = bound - exact
        report.checks += 1
        report.worst_chernoff_margin = min(report.worst_chernoff_margin, margin)
        if margin < 0:
            report.violations.append((dist, n, "chernoff", margin))
        if isinstance(dist, BinaryPam):
            x = math.sqrt(n) * dist.amplitude / (2.0 * sigma)
            lower, upper = q_sandwich(x)
            q = q_function(x)
            report.checks += 1
            if q > 0:
                m = min(q - lower, upper - q) / q
                report.worst_sandwich_margin = m if report.worst_sandwich_margin is None else min(report.worst_sandwich_margin, m)
            if not lower <= q <= upper:
                report.violations.append((dist, n, "sandwich", (lower, q, upper)))
    return report


def _peak_scaled_integral(log_f, centre: float, spread: float, cfg: QuadratureConfig) -> float:
    """Integrate exp(log_f) over [0, inf), scaling by the peak so relative accuracy holds."""
    grid = np.linspace(max(0.0, centre - 40.0 * spread), centre + 40.0 * spread, 401)[1:]
    shift = float(np.max(log_f(grid)))
    pts = [p for p in (centre - 6 * spread, centre, centre + 6 * spread) if p > 0]
    value, _ = integrate_with_error(lambda x: np.exp(log_f(x) - shift), 0.0, math.inf, cfg, points=pts)
    return value * math.exp(shift)


def chi2_identity(n: int, sigma2: float, cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> tuple[float, float]:
    """Quadrature of f_chi2(x; n) exp(-x/(8 sigma^2)) on [0, inf) and its closed form."""
    closed = (1.0 + 1.0 / (4.0 * sigma2)) ** (-0.5 * n)
    tilt = 1.0 + 1.0 / (4.0 * sigma2)
    value = _peak_scaled_integral(
        lambda x: log_chi2_pdf(x, n) - x / (8.0 * sigma2), n / tilt, math.sqrt(2.0 * n) / tilt, cfg
    )
    return value, closed


def ncx2_identity(n: int, lam: float, sigma2: float, cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> tuple[float, float]:
    """Quadrature of f_ncx2(x; n, lam) exp(-x/(8 sigma^2)) and its closed form."""
    closed = (1.0 + 1.0 / (4.0 * sigma2)) ** (-0.5 * n) * math.exp(-lam / (8.0 * sigma2 + 2.0))
    tilt = 1.0 + 1.0 / (4.0 * sigma2)
    lam_t = lam / tilt
    value = _peak_scaled_integral(
        lambda x: log_ncx2_pdf(x, n, lam) - x / (8.0 * sigma2),
        (n + lam_t) / tilt,
        math.sqrt(2.0 * (n + 2.0 * lam_t)) / tilt,
        cfg,
    )
    return value, closed


def standard_distributions() -> list[InputDistribution]:
    """One representative of each input family, as used by the verification suites."""
    return [BinaryPam(1.0), channel.Gaussian(1.0), channel.GaussianMixture(1.0), channel.SignedChi(4)]


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


IDENTITY_SNRS_DB = (0.0, 10.0, 20.0)
MIXTURE_AS = (0.5, 1.0, 4.0)


def identity_suite(cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> list[CheckResult]:
    """Chi-squared and non-central chi-squared moment-generating identities."""
    results = []
    for db in IDENTITY_SNRS_DB:
        sigma2 = 1.0 / channel.db_to_linear(db)
        worst, where = 0.0, None
        for n in range(1, 201):
            value, closed = chi2_identity(n, sigma2, cfg)
            rel = abs(value / closed - 1.0)
            if rel >= worst:
                worst, where = rel, n
        results.append(
            CheckResult(f"chi2 identity n=1..200 SNR2={db:g}dB", worst <= 1e-8, f"max rel err {worst:.2e} (n={where}, tol 1e-8)")
        )
    for a in MIXTURE_AS:
        sigma2 = (1.0 + a) / channel.db_to_linear(10.0)
        worst, where = 0.0, None
        for n in range(2, 101):
            value, closed = ncx2_identity(n, a * n, sigma2, cfg)
            rel = abs(value / closed - 1.0)
            if rel >= worst:
                worst, where = rel, n
        results.append(
            CheckResult(f"ncx2 identity n=2..100 a={a:g}", worst <= 1e-6, f"max rel err {worst:.2e} (n={where}, tol 1e-6)")
        )
    return results


def mc_suite(
    params: ChannelParams,
    trials: int = DEFAULT_TRIALS,
    seed=0,
    blocklengths: Sequence[int] = DEFAULT_MC_BLOCKLENGTHS,
    cfg: QuadratureConfig = DEFAULT_QUADRATURE,
) -> list[CheckResult]:
    """Monte Carlo detection error against the exact quadrature value, 5-SE bands."""
    root = np.random.SeedSequence(seed)
    children = iter(root.spawn(len(standard_distributions()) * len(blocklengths)))
    results = []
    for dist in standard_distributions():
        for n in blocklengths:
            est = mc_detection_error(dist, n, params, trials, next(children))
            exact = channel.avg_error_exact(dist, n, params, cfg)
            z = est.z_score(exact)
            results.append(
                CheckResult(
                    f"MC {dist} n={n}",
                    abs(z) <= 5.0,
                    f"p_hat={est.p_hat!r} exact={exact:.6g} z={z:+.2f}",
                )
            )
    return results


def exponent_suite(
    params: ChannelParams,
    n_grid: Sequence[int] = DEFAULT_FIT_GRID,
    audit_grid: Sequence[int] = tuple(range(1, 65)),
    cfg: QuadratureConfig = DEFAULT_QUADRATURE,
) -> list[CheckResult]:
    """Exponent fits within 2% of closed forms with r^2 >= 0.999, plus bound audits."""
    results = []
    for dist in standard_distributions():
        fit = fit_exponent(dist, params, n_grid, cfg)
        target = channel.detection_exponent(dist, params)
        rel = abs(fit.slope / target - 1.0)
        results.append(
            CheckResult(
                f"exponent fit {dist}",
                rel <= 0.02 and fit.r_squared >= 0.999,
                f"slope={fit.slope:.6f} closed={target:.6f} rel={rel:.2e} r2={fit.r_squared:.7f}",
            )
        )
    for dist in standard_distributions():
        rep = audit_bounds(dist, params, audit_grid, cfg)
        results.append(
            CheckResult(
                f"bound audit {dist}",
                rep.passed,
                f"{rep.checks} checks, {len(rep.violations)} violations, min log2 margin {rep.worst_chernoff_margin:.3f}",
            )
        )
    return results
