"""Gaussian ISAC channel: input laws, the state detector and its error probability.

The detector sees ``Y_i = S X_i + Z_i`` with ``S`` in {0, 1} and knows the
transmitted ``X^n``. The minimum-distance rule on the scalar statistic
``sum(x y) / sum(x^2)`` is optimal and its error, conditioned on the
transmitted energy ``p``, is ``Q(sqrt(p) / (2 sigma))``.

Power convention: every input law is used at its natural normalization
(unit-variance Gaussian component for the mixture, variance ``k`` for the
signed-chi law, ``amplitude^2`` for binary PAM) and the noise variances follow
from the SNRs, ``sigma^2 = E[X^2] / snr2`` and ``sigma_tilde^2 = E[X^2] / snr1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import DegenerateInputError, DomainError, UnsupportedDistributionError
from .specfun import (
    DEFAULT_QUADRATURE,
    LOG2E,
    QuadratureConfig,
    integrate_with_error,
    log_chi2_pdf,
    log_ncx2_pdf,
    log_q_function,
    q_function,
)


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def linear_to_db(value: float) -> float:
    if value <= 0:
        raise DomainError("only positive ratios have a dB value")
    return 10.0 * math.log10(value)


@dataclass(frozen=True)
class ChannelParams:
    """Linear communication (``snr1``) and sensing (``snr2``) SNRs."""

    snr1: float
    snr2: float

    def __post_init__(self):
        for name in ("snr1", "snr2"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise DomainError(f"{name} must be a positive finite number, got {v!r}")

    @classmethod
    def from_db(cls, snr1_db: float, snr2_db: float) -> "ChannelParams":
        return cls(db_to_linear(snr1_db), db_to_linear(snr2_db))

    @property
    def snr1_db(self) -> float:
        return linear_to_db(self.snr1)

    @property
    def snr2_db(self) -> float:
        return linear_to_db(self.snr2)

    def comm_noise_var(self, power: float = 1.0) -> float:
        """Decoder noise variance sigma_tilde^2 for transmit power ``power``."""
        return power / self.snr1

    def sensing_noise_var(self, power: float = 1.0) -> float:
        """Detector noise variance sigma^2 for transmit power ``power``."""
        return power / self.snr2


@dataclass(frozen=True)
class BinaryPam:
    """Equiprobable symbols +-amplitude."""

    amplitude: float = 1.0

    def __post_init__(self):
        if not self.amplitude > 0:
            raise DomainError("BinaryPam amplitude must be positive")

    @property
    def second_moment(self) -> float:
        return self.amplitude**2

    def sample(self, rng: np.random.Generator, shape) -> np.ndarray:
        signs = rng.integers(0, 2, size=shape) * 2 - 1
        return self.amplitude * signs.astype(float)


@dataclass(frozen=True)
class Gaussian:
    variance: float = 1.0

    def __post_init__(self):
        if not self.variance > 0:
            raise DomainError("Gaussian variance must be positive")

    @property
    def second_moment(self) -> float:
        return self.variance

    def sample(self, rng: np.random.Generator, shape) -> np.ndarray:
        return math.sqrt(self.variance) * rng.standard_normal(shape)


@dataclass(frozen=True)
class GaussianMixture:
    """Unit-variance Gaussian plus an independent +-sqrt(a) PAM symbol."""

    a: float

    def __post_init__(self):
        if not (math.isfinite(self.a) and self.a >= 0):
            raise DomainError("mixture parameter a must be finite and non-negative")

    @property
    def second_moment(self) -> float:
        return 1.0 + self.a

    def sample(self, rng: np.random.Generator, shape) -> np.ndarray:
        g = rng.standard_normal(shape)
        signs = rng.integers(0, 2, size=shape) * 2 - 1
        return g + math.sqrt(self.a) * signs


@dataclass(frozen=True)
class SignedChi:
    """X = U G with U a fair sign and G chi-distributed with k degrees of freedom."""

    k: int

    def __post_init__(self):
        if isinstance(self.k, bool) or int(self.k) != self.k or self.k < 1:
            raise DomainError(f"SignedChi needs a positive integer k, got {self.k!r}")
        object.__setattr__(self, "k", int(self.k))

    @property
    def second_moment(self) -> float:
        return float(self.k)

    def sample(self, rng: np.random.Generator, shape) -> np.ndarray:
        shape = tuple(np.atleast_1d(shape))
        normals = rng.standard_normal(shape + (self.k,))
        g = np.sqrt(np.einsum("...i,...i->...", normals, normals))
        signs = rng.integers(0, 2, size=shape) * 2 - 1
        return signs * g


InputDistribution = Union[BinaryPam, Gaussian, GaussianMixture, SignedChi]


def _check_dist(dist) -> None:
    if not isinstance(dist, (BinaryPam, Gaussian, GaussianMixture, SignedChi)):
        raise UnsupportedDistributionError(f"no power law known for {dist!r}")


def make_rng(seed) -> np.random.Generator:
    """PCG64 generator seeded through ``SeedSequence`` (portable and reproducible)."""
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(seed))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def sample_inputs(dist: InputDistribution, n: int, seed) -> np.ndarray:
    """``n`` i.i.d. channel inputs from ``dist``; ``seed`` may be an int or a Generator."""
    _check_dist(dist)
    if int(n) != n or n < 1:
        raise DomainError("n must be a positive integer")
    return dist.sample(make_rng(seed), (int(n),))


@dataclass(frozen=True)
class DetectionOutcome:
    sufficient_statistic: float
    decision: int
    truth: int

    @property
    def error(self) -> bool:
        return self.decision != self.truth


def sufficient_statistic(x, y):
    """``sum(x*y) / sum(x^2)`` along the last axis.

    Equals ``S + Z'`` with ``Z' ~ N(0, sigma^2 / sum(x^2))``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise DomainError("x and y must have the same shape")
    if x.shape[-1:] == (0,):
        raise DomainError("need at least one channel use")
    energy = np.einsum("...i,...i->...", x, x)
    if np.any(energy == 0):
        raise DegenerateInputError("all-zero input: the detection statistic is undefined")
    stat = np.einsum("...i,...i->...", x, y) / energy
    return float(stat) if np.ndim(stat) == 0 else stat


def decide(statistic):
    """Minimum-distance decision for S in {0, 1}; a tie at 1/2 goes to 1."""
    d = (np.asarray(statistic) >= 0.5).astype(int)
    return int(d) if np.ndim(d) == 0 else d


def detect_state(x, y):
    """ML estimate of the state from the known input ``x`` and observation ``y``."""
    return decide(sufficient_statistic(x, y))


def observe(x, state: int, sigma: float, rng) -> DetectionOutcome:
    """Pass ``x`` through the sensing channel once and run the detector."""
    x = np.asarray(x, dtype=float)
    y = state * x + sigma * make_rng(rng).standard_normal(x.shape)
    stat = sufficient_statistic(x, y)
    return DetectionOutcome(stat, decide(stat), int(state))


def exact_error_given_power(power_sum, sigma: float):
    """Exact detection error Q(sqrt(power_sum) / (2 sigma)) for a given energy."""
    if not sigma > 0:
        raise DomainError("sigma must be positive")
    p = np.asarray(power_sum, dtype=float)
    if np.any(p < 0):
        raise DomainError("power_sum must be non-negative")
    return q_function(np.sqrt(p) / (2.0 * sigma))


@dataclass(frozen=True)
class PowerLaw:
    """Law of the transmitted energy ``sum X_i^2`` in units of ``scale``.

    ``kind`` is ``"fixed"`` (energy = scale), ``"chi2"`` or ``"ncx2"`` (energy =
    scale * W with W chi-squared of ``dof`` degrees of freedom and
    non-centrality ``lam``).
    """

    kind: str
    scale: float
    dof: float = 0.0
    lam: float = 0.0


def power_law(dist: InputDistribution, n: int) -> PowerLaw:
    _check_dist(dist)
    if int(n) != n or n < 1:
        raise DomainError("n must be a positive integer")
    if isinstance(dist, BinaryPam):
        return PowerLaw("fixed", n * dist.amplitude**2)
    if isinstance(dist, Gaussian):
        return PowerLaw("chi2", dist.variance, dof=n)
    if isinstance(dist, GaussianMixture):
        if dist.a == 0:
            return PowerLaw("chi2", 1.0, dof=n)
        return PowerLaw("ncx2", 1.0, dof=n, lam=dist.a * n)
    return PowerLaw("chi2", 1.0, dof=n * dist.k)


def _sigma2(dist: InputDistribution, params: ChannelParams) -> float:
    return params.sensing_noise_var(dist.second_moment)


def log2_avg_error_exact(
    dist: InputDistribution, n: int, params: ChannelParams, cfg: QuadratureConfig = DEFAULT_QUADRATURE
) -> float:
    """log2 of the exact average detection error E[Q(sqrt(sum X^2) / (2 sigma))].

    Works in the log domain so that errors far below the double range of
    interest (2^-700 and beyond) keep full relative accuracy.
    """
    law = power_law(dist, n)
    sigma2 = _sigma2(dist, params)
    if law.kind == "fixed":
        return log_q_function(math.sqrt(law.scale / sigma2) / 2.0) * LOG2E

    # energy = scale * w, so the Q argument is sqrt(c w) / 2 with c = scale / sigma^2
    c = law.scale / sigma2
    dof, lam = law.dof, law.lam

    def log_density(w):
        return log_ncx2_pdf(w, dof, lam) if lam > 0 else log_chi2_pdf(w, dof)

    def log_integrand(w):
        w = np.asarray(w, dtype=float)
        return log_density(w) + log_q_function(np.sqrt(c * w) / 2.0)

    # the Chernoff-tilted law locates the bulk of the integrand
    tilt = 1.0 + c / 4.0
    lam_t = lam / tilt
    centre = (dof + lam_t) / tilt
    spread = math.sqrt(2.0 * (dof + 2.0 * lam_t)) / tilt
    lo, hi = max(0.0, centre - 40.0 * spread), centre + 40.0 * spread
    grid = np.linspace(lo, hi, 401)[1:]
    shift = float(np.max(log_integrand(grid)))

    def integrand(w):
        with np.errstate(over="ignore"):
            return np.exp(log_integrand(w) - shift)

    points = [centre + m * spread for m in (-12.0, -3.0, 0.0, 3.0, 12.0)]
    value, _ = integrate_with_error(integrand, 0.0, math.inf, cfg, points=[p for p in points if p > 0])
    return (shift + math.log(value)) * LOG2E


def avg_error_exact(
    dist: InputDistribution, n: int, params: ChannelParams, cfg: QuadratureConfig = DEFAULT_QUADRATURE
) -> float:
    """Exact average detection error after ``n`` channel uses."""
    return 2.0 ** log2_avg_error_exact(dist, n, params, cfg)


def log2_chernoff_avg_error(dist: InputDistribution, n: int, params: ChannelParams) -> float:
    _check_dist(dist)
    if int(n) != n or n < 1:
        raise DomainError("n must be a positive integer")
    snr = params.snr2
    if isinstance(dist, BinaryPam):
        return -n * snr / 8.0 * LOG2E
    if isinstance(dist, Gaussian):
        return -0.5 * n * math.log2(1.0 + snr / 4.0)
    if isinstance(dist, GaussianMixture):
        a = dist.a
        return -0.5 * n * math.log2(1.0 + snr / (4.0 * (1.0 + a))) - n * a * snr / (
            8.0 + 8.0 * a + 2.0 * snr
        ) * LOG2E
    k = dist.k
    return -0.5 * n * k * math.log2(1.0 + snr / (4.0 * k))


def chernoff_avg_error(dist: InputDistribution, n: int, params: ChannelParams) -> float:
    """Closed-form average of the Chernoff bound exp(-x^2/2) over the energy law."""
    return 2.0 ** log2_chernoff_avg_error(dist, n, params)


def detection_exponent(dist: InputDistribution, params: ChannelParams) -> float:
    """Asymptotic detection exponent in bits per channel use."""
    return -log2_chernoff_avg_error(dist, 1, params)
