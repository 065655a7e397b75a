"""Achievable rate-exponent pairs: corner points, time sharing and the two
parametric input families (Gaussian mixture and signed chi).

All rates and exponents are in bits (base-2 logarithms).
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy import optimize

from .channel import ChannelParams
from .errors import AccuracyError, ConvergenceError, DomainError
from .specfun import (
    DEFAULT_QUADRATURE,
    LOG2E,
    QuadratureConfig,
    gauss_hermite_nodes,
    gauss_kronrod_panels,
    integrate_with_error,
    log_gamma,
)


@dataclass(frozen=True)
class RatePoint:
    rate: float
    exponent: float

    def __post_init__(self):
        for name in ("rate", "exponent"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise DomainError(f"RatePoint.{name} must be finite and >= 0, got {v!r}")


class Scheme(enum.Enum):
    TIME_SHARING = "timeshare"
    GAUSSIAN_MIXTURE = "mixture"
    SIGNED_CHI = "signedchi"
    CORNER_SENSING = "corner-sensing"
    CORNER_COMM = "corner-comm"


@dataclass(frozen=True)
class CurvePoint:
    param: float
    point: Optional[RatePoint]
    status: str = "ok"  # "ok" or "noconv"


@dataclass
class RegionCurve:
    scheme: Scheme
    params: Optional[ChannelParams]
    grid: list[CurvePoint] = field(default_factory=list)

    def __post_init__(self):
        values = [g.param for g in self.grid]
        if any(b <= a for a, b in zip(values, values[1:])):
            raise DomainError("curve parameters must be strictly increasing")

    def ok_points(self) -> list[CurvePoint]:
        return [g for g in self.grid if g.point is not None]

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(param, rate, exponent)`` over the converged points."""
        ok = self.ok_points()
        return (
            np.array([g.param for g in ok]),
            np.array([g.point.rate for g in ok]),
            np.array([g.point.exponent for g in ok]),
        )


def _softplus_bits(z):
    # log2(1 + e^z) without overflow
    return np.logaddexp(0.0, z) * LOG2E


def _binary_awgn_integrand(snr: float, x):
    return 1.0 - _softplus_bits(-2.0 * snr - 2.0 * x * math.sqrt(snr))


def rate_binary_awgn(snr: float, cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """Mutual information of equiprobable +-1 inputs on an AWGN channel, in bits.

    Gauss-Hermite quadrature of E[1 - log2(1 + exp(-2 snr - 2 sqrt(snr) Z))].
    The integrand has poles close to the real axis near x = -sqrt(snr), so the
    node count is doubled (up to 16x the configured count) until two
    successive rules agree.
    """
    if not (math.isfinite(snr) and snr > 0):
        raise DomainError("snr must be positive and finite")

    def gh(nodes):
        t, w = gauss_hermite_nodes(nodes)
        return float(w @ _binary_awgn_integrand(snr, math.sqrt(2.0) * t)) / math.sqrt(math.pi)

    nodes = cfg.hermite_nodes
    prev, full = gh(max(2, nodes // 2)), gh(nodes)
    while True:
        err = abs(full - prev)
        tol = max(cfg.abs_tol, cfg.rel_tol * abs(full), 1e3 * np.finfo(float).eps)
        if err <= tol:
            break
        if nodes >= 16 * cfg.hermite_nodes:
            raise AccuracyError(
                f"Gauss-Hermite rate at snr={snr!r} did not settle (change {err:.3g})",
                estimate=full,
                error=err,
            )
        nodes *= 2
        prev, full = full, gh(nodes)
    return min(max(full, 0.0), 1.0)


def corner_sensing(params: ChannelParams, cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> RatePoint:
    """Constant-power (binary PAM) corner: (R_s, snr2/8 log2 e)."""
    return RatePoint(rate_binary_awgn(params.snr1, cfg), params.snr2 / 8.0 * LOG2E)


def corner_comm(params: ChannelParams) -> RatePoint:
    """Gaussian-input corner: capacity and its exponent 1/2 log2(1 + snr2/4)."""
    return RatePoint(0.5 * math.log2(1.0 + params.snr1), 0.5 * math.log2(1.0 + params.snr2 / 4.0))


def time_sharing_segment(p1: RatePoint, p2: RatePoint, steps: int, params: Optional[ChannelParams] = None) -> RegionCurve:
    """Points lam*p1 + (1-lam)*p2 for ``steps`` values of lam evenly spread on [0, 1]."""
    if int(steps) != steps or steps < 2:
        raise DomainError("time sharing needs at least 2 steps")
    grid = []
    for lam in np.linspace(0.0, 1.0, int(steps)):
        lam = float(lam)
        r = lam * p1.rate + (1.0 - lam) * p2.rate
        e = lam * p1.exponent + (1.0 - lam) * p2.exponent
        grid.append(CurvePoint(lam, RatePoint(max(r, 0.0), max(e, 0.0))))
    return RegionCurve(Scheme.TIME_SHARING, params, grid)


def mixture_exponent(a: float, snr2: float) -> float:
    return 0.5 * math.log2(1.0 + snr2 / (4.0 + 4.0 * a)) + a * snr2 / (8.0 + 8.0 * a + 2.0 * snr2) * LOG2E


def theorem1_point(
    a: float,
    params: ChannelParams,
    cfg: QuadratureConfig = DEFAULT_QUADRATURE,
    *,
    printed_form: bool = False,
) -> RatePoint:
    """Rate-exponent pair of the Gaussian-mixture input with PAM power ``a``.

    The rate is the superposition (successive cancellation) rate: the Gaussian
    layer at SNR snr1/(1+a) plus the binary layer decoded against Gaussian
    interference at effective SNR a snr1/(1+a+snr1).

    ``printed_form=True`` instead evaluates the binary layer with
    sqrt(snr1/(1+a+snr1)) in the cross term, as the closed form is sometimes
    quoted; it does not reduce to the corners and is kept only for comparison.
    """
    if not (math.isfinite(a) and a >= 0):
        raise DomainError("a must be finite and non-negative")
    snr1, snr2 = params.snr1, params.snr2
    gauss_layer = 0.5 * math.log2(1.0 + snr1 / (1.0 + a))
    if a == 0:
        pam_layer = 0.0
    elif printed_form:
        eff = a * snr1 / (1.0 + a + snr1)
        cross = math.sqrt(snr1 / (1.0 + a + snr1))
        t, w = gauss_hermite_nodes(cfg.hermite_nodes)
        x = math.sqrt(2.0) * t
        vals = 1.0 - _softplus_bits(-2.0 * eff - 2.0 * x * cross)
        pam_layer = float(w @ vals) / math.sqrt(math.pi)
    else:
        pam_layer = rate_binary_awgn(a * snr1 / (1.0 + a + snr1), cfg)
    return RatePoint(max(gauss_layer + pam_layer, 0.0), mixture_exponent(a, snr2))


def signed_chi_log_pdf(x, k: int):
    """Log density of X = U G (fair sign times chi_k); symmetric in x."""
    k = _check_k(k)
    x = np.abs(np.asarray(x, dtype=float))
    with np.errstate(divide="ignore"):
        logx = np.log(x)
    head = (k - 1) * logx if k > 1 else np.zeros_like(x)
    out = head - 0.5 * x * x - 0.5 * k * math.log(2.0) - log_gamma(0.5 * k)
    return float(out) if out.ndim == 0 else out


def signed_chi_pdf(x, k: int):
    """Density |x|^(k-1) exp(-x^2/2) / (2^(k/2) Gamma(k/2))."""
    out = np.exp(signed_chi_log_pdf(x, k))
    return float(out) if np.ndim(out) == 0 else out


def _check_k(k) -> int:
    if isinstance(k, bool) or not float(k).is_integer() or k < 1:
        raise DomainError(f"k must be a positive integer, got {k!r}")
    return int(k)


def signed_chi_exponent(k: int, snr2: float) -> float:
    k = _check_k(k)
    return 0.5 * k * math.log2(1.0 + snr2 / (4.0 * k))


# drop density mass below exp(-_LOG_CUT) relative to the peak (about 1e-20)
_LOG_CUT = 46.0


def _chi_support(k: int) -> tuple[float, float]:
    """Amplitude interval outside of which the chi_k density is negligible."""
    if k == 1:
        mode, logpeak = 0.0, 0.0
    else:
        mode = math.sqrt(k - 1.0)
        logpeak = (k - 1) * math.log(mode) - 0.5 * mode * mode

    def excess(x):
        head = (k - 1) * math.log(x) if k > 1 else 0.0
        return head - 0.5 * x * x - logpeak + _LOG_CUT

    hi = optimize.brentq(excess, max(mode, 1e-12), mode + 2.0 * math.sqrt(2.0 * _LOG_CUT) + 1.0)
    lo = 0.0
    if k > 1 and excess(1e-300) < 0:
        lo = optimize.brentq(excess, 1e-300, mode)
    return lo, hi


class _OutputDensity:
    """Density of Y = X + N(0, s2) with X signed-chi, by inner quadrature over x > 0.

    f_Y(y) = int_0^inf f_X(x) [phi_s(y - x) + phi_s(y + x)] dx; the x-window for
    each y is its support cut at 12 noise standard deviations.
    """

    def __init__(self, k: int, s2: float, rel_tol: float):
        self.k = k
        self.s = math.sqrt(s2)
        self.xlo, self.xhi = _chi_support(k)
        self.reach = 12.0 * self.s
        self.rel_tol = rel_tol
        self.lognorm = -0.5 * k * math.log(2.0) - log_gamma(0.5 * k) - math.log(self.s * math.sqrt(2.0 * math.pi))
        # peak density scale used as the absolute floor
        self.floor = 1e-20 * min(1.0, 1.0 / self.s)
        self.panel = min(2.0 * self.s, 1.0)

    @property
    def ymax(self) -> float:
        return self.xhi + self.reach

    def __call__(self, y: np.ndarray) -> np.ndarray:
        y = np.abs(np.asarray(y, dtype=float))
        lo = np.maximum(self.xlo, y - self.reach)
        hi = np.minimum(self.xhi, y + self.reach)
        out = np.zeros_like(y)
        live = hi > lo
        if not np.any(live):
            return out
        yl, lo, hi = y[live], lo[live], hi[live]
        k, s = self.k, self.s

        def g(x):
            yy = yl.reshape(yl.shape + (1,) * (x.ndim - 1))
            with np.errstate(divide="ignore"):
                head = (k - 1) * np.log(x) if k > 1 else 0.0
            base = head - 0.5 * x * x + self.lognorm
            a = base - 0.5 * ((yy - x) / s) ** 2
            b = base - 0.5 * ((yy + x) / s) ** 2
            return np.exp(np.logaddexp(a, b))

        panels = max(1, int(math.ceil(float(np.max(hi - lo)) / self.panel)))
        for _ in range(6):
            val, err = gauss_kronrod_panels(g, lo, hi, panels)
            if np.all(err <= np.maximum(self.rel_tol * np.abs(val), self.floor)):
                break
            panels *= 2
        else:
            raise ConvergenceError(
                f"output density quadrature did not converge for k={k}",
                estimate=float("nan"),
                error=float(np.max(err)),
            )
        out[live] = val
        return out


def output_entropy_bits(k: int, snr1: float, cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """Differential entropy h(X + Z~) in bits, X signed-chi(k), Z~ ~ N(0, k/snr1)."""
    k = _check_k(k)
    if not (math.isfinite(snr1) and snr1 > 0):
        raise DomainError("snr1 must be positive and finite")
    dens = _OutputDensity(k, k / snr1, rel_tol=1e-12)

    def integrand(y):
        f = dens(y)
        with np.errstate(divide="ignore", invalid="ignore"):
            v = -f * np.log2(f)
        return np.where(f > 0, v, 0.0)

    # inner-quadrature noise limits what the outer integral can resolve
    outer = QuadratureConfig(
        hermite_nodes=cfg.hermite_nodes,
        abs_tol=max(cfg.abs_tol, 1e-10),
        rel_tol=max(cfg.rel_tol, 1e-10),
        max_subdivisions=cfg.max_subdivisions,
    )
    peaks = [p for p in (dens.xlo, math.sqrt(k - 1.0), dens.xhi) if 0 < p < dens.ymax]
    try:
        half, _ = integrate_with_error(integrand, 0.0, dens.ymax, outer, points=peaks)
    except AccuracyError as exc:
        raise ConvergenceError(f"entropy integral for k={k} did not converge: {exc}", exc.estimate, exc.error) from exc
    return 2.0 * half


def theorem2_point(k: int, params: ChannelParams, cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> RatePoint:
    """Rate-exponent pair of the signed-chi input with ``k`` degrees of freedom.

    Rate is h(X + Z~) - 1/2 log2(2 pi e k / snr1); the exponent is
    k/2 log2(1 + snr2/(4k)).
    """
    k = _check_k(k)
    h = output_entropy_bits(k, params.snr1, cfg)
    rate = h - 0.5 * math.log2(2.0 * math.pi * math.e * k / params.snr1)
    if rate < 0:
        if rate < -1e-8:
            raise ConvergenceError(f"negative rate {rate!r} for k={k}", estimate=rate)
        rate = 0.0
    return RatePoint(rate, signed_chi_exponent(k, params.snr2))


DEFAULT_MIXTURE_GRID = (0.0, *np.logspace(-2, 3, 60).tolist())
DEFAULT_K_GRID = tuple(range(1, 81))
DEFAULT_TIMESHARE_GRID = tuple(np.linspace(0.0, 1.0, 11).tolist())


def default_grid(scheme: Scheme) -> tuple:
    return {
        Scheme.GAUSSIAN_MIXTURE: DEFAULT_MIXTURE_GRID,
        Scheme.SIGNED_CHI: DEFAULT_K_GRID,
        Scheme.TIME_SHARING: DEFAULT_TIMESHARE_GRID,
    }[scheme]


def sweep_region(
    scheme: Scheme,
    params: ChannelParams,
    grid: Optional[Sequence[float]] = None,
    cfg: QuadratureConfig = DEFAULT_QUADRATURE,
    workers: int = 1,
) -> RegionCurve:
    """Evaluate one rate-exponent curve on a strictly increasing parameter grid.

    Time sharing is parameterised by the weight on the sensing corner. Points
    whose entropy integral does not converge are kept with status "noconv".
    """
    scheme = Scheme(scheme)
    grid = default_grid(scheme) if grid is None else tuple(float(g) for g in grid)
    if not grid:
        raise DomainError("grid must be non-empty")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise DomainError("grid must be strictly increasing")

    if scheme is Scheme.TIME_SHARING:
        if grid[0] < 0 or grid[-1] > 1:
            raise DomainError("time-sharing weights must lie in [0, 1]")
        ps, pc = corner_sensing(params, cfg), corner_comm(params)
        pts = [
            CurvePoint(lam, RatePoint(lam * ps.rate + (1 - lam) * pc.rate, lam * ps.exponent + (1 - lam) * pc.exponent))
            for lam in grid
        ]
        return RegionCurve(scheme, params, pts)

    if scheme is Scheme.GAUSSIAN_MIXTURE:
        def one(a):
            return CurvePoint(a, theorem1_point(a, params, cfg))
    elif scheme is Scheme.SIGNED_CHI:
        for k in grid:
            _check_k(k)

        def one(k):
            try:
                return CurvePoint(k, theorem2_point(int(k), params, cfg))
            except ConvergenceError:
                return CurvePoint(k, None, "noconv")
    else:
        raise DomainError(f"{scheme.value} is a single point, not a swept curve")

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            pts = list(pool.map(one, grid))
    else:
        pts = [one(g) for g in grid]
    return RegionCurve(scheme, params, pts)


def dominated_area(rates: Iterable[float], exponents: Iterable[float]) -> float:
    """Area of the set of (R, E) >= 0 dominated by the piecewise-linear curve.

    The curve is extended flat from its highest-exponent end down to R = 0, as
    any point with lower rate and exponent is dominated by that end.
    """
    r = np.asarray(list(rates), dtype=float)
    e = np.asarray(list(exponents), dtype=float)
    if r.size == 0:
        return 0.0
    order = np.argsort(r)
    r, e = r[order], e[order]
    area = r[0] * e[0] + float(np.sum(0.5 * (e[1:] + e[:-1]) * np.diff(r)))
    return area


def hull_contains(curve: RegionCurve, p1: RatePoint, p2: RatePoint, slack: float = 0.0) -> np.ndarray:
    """Whether each converged curve point lies under the segment p1-p2 (and its flat extensions)."""
    _, r, e = curve.arrays()
    lo, hi = sorted([p1, p2], key=lambda p: p.rate)
    line = np.interp(r, [lo.rate, hi.rate], [lo.exponent, hi.exponent])
    inside = (e <= line + slack) & (r <= hi.rate + slack)
    inside |= (r <= lo.rate + slack) & (e <= lo.exponent + slack)
    return inside


def rate_at_exponent(curve: RegionCurve, exponent: float) -> float:
    """Rate of a monotone curve at the given exponent, by linear interpolation."""
    _, r, e = curve.arrays()
    order = np.argsort(e)
    e, r = e[order], r[order]
    if not e[0] <= exponent <= e[-1]:
        raise DomainError("exponent outside the curve's range")
    return float(np.interp(exponent, e, r))


def mixture_rate_at_exponent(exponent: float, params: ChannelParams, cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """Rate of the Gaussian-mixture curve where its exponent equals ``exponent``.

    The exponent is strictly increasing in ``a``, so ``a`` is found by bracketing.
    """
    snr2 = params.snr2
    lo_e = mixture_exponent(0.0, snr2)
    top = snr2 / 8.0 * LOG2E
    if not lo_e <= exponent < top:
        raise DomainError("exponent outside the mixture curve's range")
    if exponent == lo_e:
        return theorem1_point(0.0, params, cfg).rate
    hi = 1.0
    while mixture_exponent(hi, snr2) < exponent:
        hi *= 4.0
    a = optimize.brentq(lambda a: mixture_exponent(a, snr2) - exponent, 0.0, hi, xtol=1e-14, rtol=1e-14)
    return theorem1_point(a, params, cfg).rate
