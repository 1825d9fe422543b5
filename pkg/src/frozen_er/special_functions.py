"""Scalar special functions and the discrete laws built on Cayley weights."""
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.special import airye, erfcx, gammaln

from .errors import DomainError, NumericalError

EULER_GAMMA = 0.57721566490153286060651209
SERIES_RTOL = 1e-14
SERIES_CAP = 10**6
_CHUNK = 4096

# B_2k / (2k) for the asymptotic digamma expansion
_DIGAMMA_COEFFS = (
    1.0 / 12,
    -1.0 / 120,
    1.0 / 252,
    -1.0 / 240,
    1.0 / 132,
    -691.0 / 32760,
    1.0 / 12,
)


def digamma(x):
    x = float(x)
    if not x > 0 or not math.isfinite(x):
        raise DomainError(f"digamma needs x > 0, got {x}")
    shift = 0.0
    while x < 6.0:
        shift -= 1.0 / x
        x += 1.0
    inv2 = 1.0 / (x * x)
    tail = 0.0
    pw = inv2
    for c in _DIGAMMA_COEFFS:
        tail += c * pw
        pw *= inv2
    return shift + math.log(x) - 0.5 / x - tail


def _log_cayley_weight(k):
    # log(k^(k-2) / k!)
    k = np.asarray(k, dtype=float)
    return (k - 2.0) * np.log(k) - gammaln(k + 1.0)


def _sum_log_terms(log_term, start=1):
    """Sum exp(log_term(k)) for k >= start until the relative cutoff or the cap.

    Returns (total, last_k, converged)."""
    total = 0.0
    k0 = start
    while k0 < start + SERIES_CAP:
        k = np.arange(k0, min(k0 + _CHUNK, start + SERIES_CAP), dtype=float)
        terms = np.exp(log_term(k))
        csum = total + np.cumsum(terms)
        small = np.nonzero(terms < SERIES_RTOL * csum)[0]
        if small.size:
            i = small[0]
            return float(csum[i]), int(k[i]), True
        total = float(csum[-1])
        k0 += _CHUNK
    return total, start + SERIES_CAP - 1, False


def tree_fn(x):
    """T(x) = sum_k k^(k-2)/k! x^k on (0, 1/e]."""
    x = float(x)
    if not (0.0 < x <= math.exp(-1.0) * (1 + 1e-15)):
        raise DomainError(f"tree_fn needs 0 < x <= 1/e, got {x}")
    lx = math.log(x)
    total, last, _ = _sum_log_terms(lambda k: _log_cayley_weight(k) + k * lx)
    # The relative cutoff stops far too early when ex is near 1 (terms decay
    # like k^-5/2), so the remainder is always added. Stirling gives
    # term_k ~ (ex)^k k^(-5/2) / sqrt(2 pi), and the midpoint integral
    # approximates the remaining sum to O(K^-4.5).
    a = last + 0.5
    z = max(-(1.0 + lx), 0.0) * a
    # a^(3/2) int_a^inf exp(-z u/a) u^(-5/2) du in closed form via erfcx
    rz = math.sqrt(z)
    shape = (2.0 / 3.0) * math.exp(-z) * (1.0 - 2.0 * z * (1.0 - math.sqrt(math.pi) * rz * erfcx(rz)))
    return total + shape * a ** -1.5 / math.sqrt(2 * math.pi)


def theta_from_x(x):
    """The root theta in (0,1] of theta*exp(-theta) = x."""
    x = float(x)
    if not (0.0 < x <= math.exp(-1.0) * (1 + 1e-15)):
        raise DomainError(f"x must lie in (0, 1/e], got {x}")
    if x >= math.exp(-1.0):
        return 1.0
    lo, hi = 0.0, 1.0
    th = min(x * (1 + 2 * x), 0.5)
    for _ in range(200):
        f = th * math.exp(-th) - x
        if f > 0:
            hi = th
        else:
            lo = th
        d = (1 - th) * math.exp(-th)
        nxt = th - f / d if d > 0 else 0.5 * (lo + hi)
        if not (lo < nxt < hi):
            nxt = 0.5 * (lo + hi)
        if abs(nxt - th) <= 1e-16 * max(th, 1e-300):
            th = nxt
            break
        th = nxt
    return th


@dataclass(frozen=True)
class BorelParams:
    theta: float
    r: int = 1

    def __post_init__(self):
        if not (0.0 < self.theta <= 1.0):
            raise DomainError(f"theta must lie in (0,1], got {self.theta}")
        if int(self.r) != self.r or self.r < 1:
            raise DomainError(f"r must be a positive integer, got {self.r}")


@dataclass(frozen=True)
class MuX:
    x: float
    theta: float
    t_of_x: float

    @classmethod
    def from_theta(cls, theta):
        theta = float(theta)
        if not (0.0 < theta <= 1.0):
            raise DomainError(f"theta must lie in (0,1], got {theta}")
        return cls(theta * math.exp(-theta), theta, theta - theta * theta / 2)

    @classmethod
    def from_x(cls, x):
        th = theta_from_x(x)
        return cls(float(x), th, th - th * th / 2)

    @property
    def mean(self):
        return 2.0 / (2.0 - self.theta)

    @property
    def variance(self):
        th = self.theta
        if th >= 1.0:
            return math.inf
        return 2 * th / ((1 - th) * (2 - th) ** 2)


def borel_log_pmf(theta, r, k):
    k = np.asarray(k, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (
            math.log(r)
            - gammaln(k - r + 1.0)
            + (k - r - 1.0) * np.log(k)
            + (k - r) * math.log(theta)
            - theta * k
        )
    return np.where(k >= r, out, -np.inf)


def borel_pmf(params, k):
    """Borel (r=1) or Borel-Tanner pmf at k."""
    if k < params.r:
        return 0.0
    return float(np.exp(borel_log_pmf(params.theta, params.r, k)))


def mu_log_pmf(mu, k):
    k = np.asarray(k, dtype=float)
    return _log_cayley_weight(k) + k * math.log(mu.x) - math.log(mu.t_of_x)


def mu_pmf(mu, k):
    if k < 1:
        raise DomainError("mu_pmf needs k >= 1")
    return float(np.exp(mu_log_pmf(mu, k)))


def mu_pmf_vector(mu, kmax):
    """mu_x(1..kmax) as an array (index 0 holds k=1)."""
    return np.exp(mu_log_pmf(mu, np.arange(1, kmax + 1)))


def partial_sum_s(n_terms, theta):
    """S_N(theta) = sum_{k<=N} k^k/k! theta^(k-1) e^(-theta k)."""
    n_terms = int(n_terms)
    theta = float(theta)
    if n_terms < 1:
        raise DomainError("n_terms must be positive")
    if not (0.0 <= theta <= 1.0):
        raise DomainError(f"theta must lie in [0,1], got {theta}")
    if theta == 0.0:
        return 1.0
    lt = math.log(theta)
    total = 0.0
    for k0 in range(1, n_terms + 1, 1 << 16):
        k = np.arange(k0, min(k0 + (1 << 16), n_terms + 1), dtype=float)
        lw = k * np.log(k) - gammaln(k + 1.0) + (k - 1.0) * lt - theta * k
        total += float(np.sum(np.exp(lw)))
    return total


# --- 3/2-stable density -----------------------------------------------------

_GL_HI = np.polynomial.legendre.leggauss(24)
_GL_LO = np.polynomial.legendre.leggauss(12)
_P1_TMAX = 17.0  # exp(-(2/3) t^1.5) < 1e-20 beyond
_P1_LEFT = -3.0


def _phase(x, t):
    return x * t + (2.0 / 3.0) * t ** 1.5


def _phase_roots(x, targets, lo, hi):
    """Solve phase(t) = target on a monotone branch [lo, hi] by bisection."""
    targets = np.asarray(targets, dtype=float)
    a = np.full(targets.shape, lo)
    b = np.full(targets.shape, hi)
    increasing = _phase(x, hi) >= _phase(x, lo)
    for _ in range(80):
        mid = 0.5 * (a + b)
        above = _phase(x, mid) > targets
        if increasing:
            b = np.where(above, mid, b)
            a = np.where(above, a, mid)
        else:
            a = np.where(above, mid, a)
            b = np.where(above, b, mid)
    return 0.5 * (a + b)


def _branch_breaks(x, lo, hi):
    f0, f1 = _phase(x, lo), _phase(x, hi)
    a, b = min(f0, f1), max(f0, f1)
    j0 = math.ceil((a - math.pi / 2) / math.pi)
    j1 = math.floor((b - math.pi / 2) / math.pi)
    if j1 < j0:
        return np.empty(0)
    targets = math.pi / 2 + math.pi * np.arange(j0, j1 + 1)
    return _phase_roots(x, targets, lo, hi)


def _block_sums(x, edges, rule):
    # integrate in u = sqrt(t), where the integrand 2u exp(-2/3 u^3) cos(x u^2 + 2/3 u^3) is smooth
    nodes, weights = rule
    a = edges[:-1, None]
    b = edges[1:, None]
    u = 0.5 * (b - a) * nodes[None, :] + 0.5 * (a + b)
    f = 2.0 * u * np.exp(-(2.0 / 3.0) * u ** 3) * np.cos(x * u * u + (2.0 / 3.0) * u ** 3)
    return 0.5 * (b - a)[:, 0] * (f @ weights)


def _rooted_weight(i):
    """i^(i-2)/(i-1)! as an exact rational."""
    return Fraction(i) ** (i - 2) / math.factorial(i - 1)


def borel_convolution_identity(k):
    """Both sides of 2 k^(k-3)/(k-2)! = sum_i i^(i-2)/(i-1)! (k-i)^(k-i-2)/(k-i-1)!, exactly."""
    k = int(k)
    if k < 2:
        raise DomainError("the convolution identity needs k >= 2")
    lhs = 2 * Fraction(k) ** (k - 3) / math.factorial(k - 2)
    rhs = sum(_rooted_weight(i) * _rooted_weight(k - i) for i in range(1, k))
    return lhs, rhs


def p1_airy(x):
    """Closed form p_1(x) = e^(x^3/12) (-(x/2) Ai(x^2/4) - Ai'(x^2/4)).

    A saddle point at t = -i x^2/2 gives the left tail exp(x^3/6), the same
    decay as a rescaled Map-Airy law, and the two agree identically. With
    scaled Airy functions both terms are positive for x < 0, so the left tail
    keeps full relative accuracy."""
    x = float(x)
    z = 0.25 * x * x
    eai, eaip, _, _ = airye(z)
    # airye scales by exp(2/3 z^1.5) = exp(|x|^3 / 12)
    scale = x ** 3 / 12.0 - abs(x) ** 3 / 12.0
    return math.exp(scale) * (-0.5 * x * eai - eaip)


def stable_density_p1(x):
    """p_1(x) = (1/pi) int_0^inf exp(-2/3 t^1.5) cos(x t + 2/3 t^1.5) dt.

    Oscillatory quadrature, except on x < -3 where the value is below the
    quadrature's absolute accuracy and the Airy closed form is used."""
    x = float(x)
    if not math.isfinite(x):
        raise DomainError("stable_density_p1 needs a finite argument")
    if x < _P1_LEFT:
        return p1_airy(x)
    pts = [0.0]
    if x < 0 and x * x < _P1_TMAX:
        turn = x * x
        pts += list(_branch_breaks(x, 0.0, turn)) + [turn]
        pts += list(_branch_breaks(x, turn, _P1_TMAX))
    else:
        pts += list(_branch_breaks(x, 0.0, _P1_TMAX))
    pts.append(_P1_TMAX)
    edges = np.sqrt(np.unique(np.asarray(pts)))
    hi = _block_sums(x, edges, _GL_HI)
    lo = _block_sums(x, edges, _GL_LO)
    # The damping is super-exponential, so the alternating block sum converges
    # absolutely before _P1_TMAX and needs no extrapolation.
    val = float(np.sum(hi)) / math.pi
    err = float(np.sum(np.abs(hi - lo))) / math.pi
    if err > 1e-8:
        raise NumericalError(f"p1({x}) quadrature did not converge: block error {err:.2e}")
    return val
