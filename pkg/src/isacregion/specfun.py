"""Special functions and quadrature rules.

Everything that can overflow (gamma, modified Bessel, chi-squared densities)
is evaluated in the log domain. The Gaussian tail function is computed from
``erfc`` rather than ``1 - cdf`` so that it keeps full relative accuracy far
out in the tail, which the exponent checks rely on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy import special

from .errors import AccuracyError, DomainError

LOG2E = math.log2(math.e)

__all__ = [
    "QuadratureConfig",
    "DEFAULT_QUADRATURE",
    "q_function",
    "log_q_function",
    "normal_pdf",
    "chernoff_q_bound",
    "q_sandwich",
    "log_gamma",
    "log_bessel_i",
    "log_chi2_pdf",
    "log_ncx2_pdf",
    "gauss_hermite_nodes",
    "gauss_kronrod_panels",
    "adaptive_integrate",
    "integrate_with_error",
]


@dataclass(frozen=True)
class QuadratureConfig:
    """Accuracy controls for the numerical integrals."""

    hermite_nodes: int = 200
    abs_tol: float = 1e-12
    rel_tol: float = 1e-10
    max_subdivisions: int = 2000

    def __post_init__(self):
        if int(self.hermite_nodes) != self.hermite_nodes or self.hermite_nodes < 2:
            raise DomainError(f"hermite_nodes must be an integer >= 2, got {self.hermite_nodes!r}")
        if self.abs_tol < 0 or self.rel_tol < 0:
            raise DomainError("tolerances must be non-negative")
        if self.abs_tol == 0 and self.rel_tol == 0:
            raise DomainError("abs_tol and rel_tol cannot both be zero")
        if int(self.max_subdivisions) != self.max_subdivisions or self.max_subdivisions < 1:
            raise DomainError("max_subdivisions must be a positive integer")

    def as_dict(self) -> dict:
        return {
            "hermite_nodes": self.hermite_nodes,
            "abs_tol": self.abs_tol,
            "rel_tol": self.rel_tol,
            "max_subdivisions": self.max_subdivisions,
        }


DEFAULT_QUADRATURE = QuadratureConfig()


def _finite(x, name="x"):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite")
    return arr


def _out(arr):
    return float(arr) if np.ndim(arr) == 0 else arr


def q_function(x):
    """Gaussian tail probability Q(x) = P[N(0,1) > x] = erfc(x/sqrt(2))/2."""
    x = _finite(x)
    return _out(0.5 * special.erfc(x / math.sqrt(2.0)))


def log_q_function(x):
    """Natural log of Q(x), accurate where Q itself underflows."""
    x = _finite(x)
    return _out(special.log_ndtr(-x))


def normal_pdf(x):
    x = np.asarray(x, dtype=float)
    return _out(np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi))


def chernoff_q_bound(x):
    """Upper bound exp(-x^2/2) on Q(x), valid for x >= 0."""
    x = _finite(x)
    if np.any(x < 0):
        raise DomainError("the Chernoff bound on Q is only valid for x >= 0")
    return _out(np.exp(-0.5 * x * x))


def q_sandwich(x):
    """Return ``(lower, upper)`` with x/(x^2+1) phi(x) <= Q(x) <= phi(x)/x."""
    x = _finite(x)
    if np.any(x <= 0):
        raise DomainError("the Q sandwich needs x > 0 (the upper bound diverges at 0)")
    phi = np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
    return _out(x / (x * x + 1.0) * phi), _out(phi / x)


def log_gamma(x):
    """Natural log of the gamma function for x > 0."""
    x = _finite(x)
    if np.any(x <= 0):
        raise DomainError("log_gamma is defined here for x > 0 only")
    return _out(special.gammaln(x))


# Debye polynomials u_k(t) for the uniform large-order expansion of I_nu.
def _debye_terms(t, nu):
    t2 = t * t
    u1 = t * (3.0 - 5.0 * t2) / 24.0
    u2 = t2 * (81.0 - 462.0 * t2 + 385.0 * t2 * t2) / 1152.0
    u3 = t * t2 * (30375.0 - 369603.0 * t2 + 765765.0 * t2**2 - 425425.0 * t2**3) / 414720.0
    u4 = t2 * t2 * (
        4465125.0 - 94121676.0 * t2 + 349922430.0 * t2**2 - 446185740.0 * t2**3 + 185910725.0 * t2**4
    ) / 39813120.0
    return 1.0 + u1 / nu + u2 / nu**2 + u3 / nu**3 + u4 / nu**4


def _log_bessel_i_debye(nu, x):
    z = x / nu
    root = np.sqrt(1.0 + z * z)
    t = 1.0 / root
    eta = root + np.log(z) - np.log1p(root)
    return (
        nu * eta
        - 0.5 * math.log(2.0 * math.pi * nu)
        - 0.5 * np.log(root)
        + np.log(_debye_terms(t, nu))
    )


def _log_bessel_i_series(nu, x):
    # leading terms of the power series; only reached for tiny x
    q = 0.25 * x * x
    return nu * np.log(0.5 * x) - special.gammaln(nu + 1.0) + np.log1p(
        q / (nu + 1.0) * (1.0 + q / (2.0 * (nu + 2.0)))
    )


def log_bessel_i(nu: float, x):
    """Natural log of the modified Bessel function I_nu(x) for nu >= 0, x >= 0.

    Uses the exponentially scaled scipy routine where it does not underflow and
    a uniform asymptotic (Debye) expansion or the leading power-series terms
    where it does. ``log I_nu(0)`` is 0 for nu = 0 and -inf otherwise.
    """
    if not math.isfinite(nu) or nu < 0:
        raise DomainError("log_bessel_i needs a finite order nu >= 0")
    x = _finite(x)
    if np.any(x < 0):
        raise DomainError("log_bessel_i needs x >= 0")
    xs = np.atleast_1d(x)
    out = np.empty_like(xs)
    zero = xs == 0
    out[zero] = 0.0 if nu == 0 else -np.inf
    pos = ~zero
    if np.any(pos):
        xp = xs[pos]
        scaled = special.ive(nu, xp)
        good = scaled > 1e-280
        res = np.empty_like(xp)
        res[good] = np.log(scaled[good]) + xp[good]
        bad = ~good
        if np.any(bad):
            if nu >= 25:
                res[bad] = _log_bessel_i_debye(nu, xp[bad])
            else:
                res[bad] = _log_bessel_i_series(nu, xp[bad])
        out[pos] = res
    return float(out[0]) if np.ndim(x) == 0 else out


def log_chi2_pdf(x, dof: float):
    """Log density of the central chi-squared law with ``dof`` degrees of freedom."""
    if dof <= 0:
        raise DomainError("degrees of freedom must be positive")
    x = np.asarray(x, dtype=float)
    half = 0.5 * dof
    with np.errstate(divide="ignore"):
        out = special.xlogy(half - 1.0, x) - 0.5 * x - half * math.log(2.0) - special.gammaln(half)
    out = np.where(x < 0, -np.inf, out)
    if dof < 2:
        out = np.where(x == 0, np.inf, out)
    return _out(out)


def log_ncx2_pdf(x, dof: float, lam: float):
    """Log density of the non-central chi-squared law.

    f(x) = 1/2 exp(-(x+lam)/2) (x/lam)^(dof/4-1/2) I_{dof/2-1}(sqrt(lam x)),
    with the modified Bessel factor handled by :func:`log_bessel_i`.
    """
    if lam < 0:
        raise DomainError("non-centrality must be non-negative")
    if lam == 0:
        return log_chi2_pdf(x, dof)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.full_like(x, -np.inf)
    pos = x > 0
    xp = x[pos]
    if dof == 1:
        # I_{-1/2}(z) = sqrt(2/(pi z)) cosh z
        r, s = np.sqrt(xp), math.sqrt(lam)
        a = -0.5 * (r - s) ** 2
        b = -0.5 * (r + s) ** 2
        out[pos] = np.logaddexp(a, b) - 0.5 * np.log(8.0 * math.pi * xp)
    else:
        nu = 0.5 * dof - 1.0
        if nu < 0:
            raise DomainError("non-central chi-squared supports dof = 1 or dof >= 2")
        out[pos] = (
            -math.log(2.0)
            - 0.5 * (xp + lam)
            + (0.25 * dof - 0.5) * np.log(xp / lam)
            + log_bessel_i(nu, np.sqrt(lam * xp))
        )
        if dof == 2:
            out[x == 0] = -math.log(2.0) - 0.5 * lam
    if dof == 1:
        out[x == 0] = np.inf
    return out if out.size > 1 or np.ndim(x) else float(out[0])


@lru_cache(maxsize=32)
def _hermite_table(n: int):
    nodes, weights = special.roots_hermite(n)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def gauss_hermite_nodes(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights for integrals of the form ``int exp(-t^2) f(t) dt``.

    Returns read-only arrays; the table is cached per ``n``.
    """
    if int(n) != n or n < 2:
        raise DomainError("Gauss-Hermite rules need n >= 2 nodes")
    return _hermite_table(int(n))


# 21-point Kronrod rule with its embedded 10-point Gauss rule on [-1, 1].
_XGK = np.array([
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.0,
])
_WGK = np.array([
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077600525452742,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
])
_WG = np.array([
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
])

GK_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
GK_WEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
_g = np.zeros(11)
_g[1::2] = _WG
G_WEIGHTS = np.concatenate([_g[:-1], _g[::-1]])
del _g

_EPS = np.finfo(float).eps
_TINY = np.finfo(float).tiny


def _gk21_estimates(fvals: np.ndarray, half: np.ndarray):
    """Kronrod value and QUADPACK-style error for panels along the last axis."""
    kron = fvals @ GK_WEIGHTS
    gauss = fvals @ G_WEIGHTS
    mean = 0.5 * kron
    resabs = np.abs(fvals) @ GK_WEIGHTS
    resasc = np.abs(fvals - mean[..., None]) @ GK_WEIGHTS
    err = np.abs(kron - gauss)
    with np.errstate(divide="ignore", invalid="ignore"):
        scaled = resasc * np.minimum(1.0, (200.0 * err / resasc) ** 1.5)
    err = np.where((resasc != 0) & (err != 0), scaled, err)
    err = np.where(resabs > _TINY / (50 * _EPS), np.maximum(50 * _EPS * resabs, err), err)
    ah = np.abs(half)
    return kron * half, err * ah


def gauss_kronrod_panels(f: Callable[[np.ndarray], np.ndarray], lo: np.ndarray, hi: np.ndarray, panels: int):
    """Composite 21-point Gauss-Kronrod rule on ``panels`` equal pieces.

    ``lo`` and ``hi`` may be arrays, giving one integral per entry; ``f`` is
    called once with an array of shape ``lo.shape + (panels, 21)``. Returns
    the integral estimates and error estimates.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    width = (hi - lo) / panels
    starts = lo[..., None] + width[..., None] * np.arange(panels)
    half = 0.5 * width[..., None]
    nodes = (starts + half)[..., None] + half[..., None] * GK_NODES
    vals = np.asarray(f(nodes), dtype=float)
    res, err = _gk21_estimates(vals, np.broadcast_to(half, starts.shape))
    return res.sum(axis=-1), err.sum(axis=-1)


class _Segments:
    """Map a global coordinate t in [0, S) onto the pieces of the real line."""

    def __init__(self, edges: Sequence[float]):
        self.a = np.array(edges[:-1], dtype=float)
        self.b = np.array(edges[1:], dtype=float)
        self.count = len(self.a)

    def map(self, t: np.ndarray):
        j = np.clip(np.floor(t).astype(int), 0, self.count - 1)
        u = t - j
        a, b = self.a[j], self.b[j]
        fin_a, fin_b = np.isfinite(a), np.isfinite(b)
        x = np.empty_like(t)
        jac = np.empty_like(t)
        both = fin_a & fin_b
        x[both] = a[both] + (b[both] - a[both]) * u[both]
        jac[both] = (b - a)[both]
        right = fin_a & ~fin_b
        ur = u[right]
        x[right] = a[right] + ur / (1.0 - ur)
        jac[right] = 1.0 / (1.0 - ur) ** 2
        left = ~fin_a & fin_b
        ul = u[left]
        x[left] = b[left] - (1.0 - ul) / ul
        jac[left] = 1.0 / ul**2
        return x, jac


def integrate_with_error(
    f: Callable[[np.ndarray], np.ndarray],
    lo: float,
    hi: float,
    cfg: QuadratureConfig = DEFAULT_QUADRATURE,
    points: Sequence[float] = (),
) -> tuple[float, float]:
    """Globally adaptive Gauss-Kronrod integration; returns ``(value, error)``.

    ``f`` must accept and return numpy arrays. Infinite limits are handled by
    x = a + u/(1-u) on the unbounded piece. ``points`` are extra breakpoints
    (kinks, peaks) that initial intervals should not straddle.
    """
    if math.isnan(lo) or math.isnan(hi) or not lo < hi:
        raise DomainError("integration limits must satisfy lo < hi")
    inner = sorted({float(p) for p in points if lo < p < hi and math.isfinite(p)})
    edges = [lo, *inner, hi]
    if math.isinf(lo) and math.isinf(hi) and not inner:
        edges = [lo, 0.0, hi]
    seg = _Segments(edges)

    def g(t):
        x, jac = seg.map(t)
        fx = np.asarray(f(x), dtype=float)
        if not np.all(np.isfinite(fx)):
            raise DomainError("integrand returned a non-finite value")
        with np.errstate(over="ignore", invalid="ignore"):
            out = fx * jac
        return np.where(fx == 0, 0.0, out)

    def evaluate(ta, tb):
        half = 0.5 * (tb - ta)
        nodes = (0.5 * (ta + tb))[:, None] + half[:, None] * GK_NODES
        vals = g(nodes.ravel()).reshape(nodes.shape)
        return _gk21_estimates(vals, half)

    ta = np.arange(seg.count, dtype=float)
    tb = ta + 1.0
    res, err = evaluate(ta, tb)
    splits = 0
    while True:
        total = float(res.sum())
        toterr = float(err.sum())
        tol = max(cfg.abs_tol, cfg.rel_tol * abs(total))
        if toterr <= tol:
            return total, toterr
        budget = cfg.max_subdivisions - splits
        if budget <= 0:
            raise AccuracyError(
                f"subdivision budget {cfg.max_subdivisions} exhausted: "
                f"estimate {total!r}, error {toterr:.3g} > tolerance {tol:.3g}",
                estimate=total,
                error=toterr,
            )
        order = np.argsort(-err)
        excess = toterr - np.cumsum(err[order])
        take = int(np.searchsorted(-excess, -tol)) + 1
        take = max(1, min(take, 64, budget))
        pick = order[:take]
        a, b = ta[pick], tb[pick]
        mid = 0.5 * (a + b)
        if np.any((mid <= a) | (mid >= b)):
            raise AccuracyError(
                "roundoff prevents further subdivision", estimate=total, error=toterr
            )
        na = np.concatenate([a, mid])
        nb = np.concatenate([mid, b])
        nres, nerr = evaluate(na, nb)
        keep = np.ones(len(ta), dtype=bool)
        keep[pick] = False
        ta = np.concatenate([ta[keep], na])
        tb = np.concatenate([tb[keep], nb])
        res = np.concatenate([res[keep], nres])
        err = np.concatenate([err[keep], nerr])
        splits += take


def adaptive_integrate(
    f: Callable[[np.ndarray], np.ndarray],
    lo: float,
    hi: float,
    cfg: QuadratureConfig = DEFAULT_QUADRATURE,
    points: Sequence[float] = (),
) -> float:
    """Integrate a vectorized ``f`` over [lo, hi] (either limit may be infinite).

    Raises :class:`AccuracyError` carrying the best estimate if the
    subdivision budget in ``cfg`` runs out first.
    """
    return integrate_with_error(f, lo, hi, cfg, points)[0]
