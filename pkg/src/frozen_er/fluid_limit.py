"""Deterministic limit functions of the frozen process.

The gel mass g_p is the inverse of f_p(s) = 1/2 sum_n s^n / (1 + p n) on
[1/2, inf), and zero before 1/2. Everything else is an explicit function of g_p.
"""
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate
from scipy.special import gammaln, roots_jacobi

from .errors import DomainError, NumericalError
from .special_functions import EULER_GAMMA, digamma

SAT_GAP = 1e-8
_SERIES_SWITCH = 0.5
_SERIES_N = np.arange(64, dtype=float)
_JACOBI_NODES = 64


def _check_p(p):
    p = float(p)
    if not (0.0 < p <= 1.0):
        raise DomainError(f"p must lie in (0,1], got {p}")
    return p


@lru_cache(maxsize=32)
def _jacobi_rule(a):
    x, w = roots_jacobi(_JACOBI_NODES, 0.0, a)
    return x, w


def _f_series(p, s):
    terms = s[:, None] ** _SERIES_N[None, :] / (1.0 + p * _SERIES_N[None, :])
    return 0.5 * terms.sum(axis=1)


def _f_integral(p, s):
    # f_p(s) = 1/2 + s^(-1/p) / (2p) * int_0^Y (1 - e^-z)^(1/p) dz,  Y = -ln(1-s).
    # Writing (1-e^-z)^a = z^a ((1-e^-z)/z)^a puts the endpoint behaviour into a
    # Gauss-Jacobi weight; the remaining factor is analytic on the interval.
    a = 1.0 / p
    x, w = _jacobi_rule(a)
    big_y = -np.log1p(-s)
    z = 0.5 * big_y[:, None] * (1.0 + x[None, :])
    smooth = np.where(z > 0, -np.expm1(-z) / np.where(z > 0, z, 1.0), 1.0) ** a
    k = (0.5 * big_y) ** (a + 1.0) * (smooth @ w)
    return 0.5 + 0.5 * a * k * s ** (-a)


def f_p(p, s):
    """The series f_p(s); accepts scalars or arrays with 0 <= s < 1."""
    p = _check_p(p)
    arr = np.atleast_1d(np.asarray(s, dtype=float))
    if np.any(arr < 0) or np.any(arr >= 1) or np.any(~np.isfinite(arr)):
        raise DomainError("f_p needs 0 <= s < 1")
    out = np.empty_like(arr)
    lo = arr <= _SERIES_SWITCH
    if lo.any():
        out[lo] = _f_series(p, arr[lo])
    if (~lo).any():
        out[~lo] = _f_integral(p, arr[~lo])
    return out if np.ndim(s) else float(out[0])


def f_p_prime(p, s):
    """Derivative of f_p.

    Below the series switch the series is differentiated term by term. Above it
    the identity f'(s) = (1 - 2 f(s)(1-s)) / (2 p s (1-s)) is used, which is the
    inverse-function form of g' = 2pg(1-g)/(1-2t(1-g))."""
    p = _check_p(p)
    arr = np.atleast_1d(np.asarray(s, dtype=float))
    out = np.empty_like(arr)
    lo = arr <= _SERIES_SWITCH
    if lo.any():
        sl = arr[lo]
        n = _SERIES_N[1:]
        out[lo] = 0.5 * (n[None, :] * sl[:, None] ** (n[None, :] - 1) / (1 + p * n[None, :])).sum(axis=1)
    if (~lo).any():
        sh = arr[~lo]
        fv = _f_integral(p, sh)
        out[~lo] = (1.0 - 2.0 * fv * (1.0 - sh)) / (2.0 * p * sh * (1.0 - sh))
    return out if np.ndim(s) else float(out[0])


class GelCurve:
    """Tabulated inverse of f_p for one p. Immutable once built."""

    def __init__(self, p, gap=SAT_GAP, n_cheb=1024):
        self.p = _check_p(p)
        self.gap = gap
        j = np.arange(n_cheb + 1)
        top = 1.0 - gap
        cheb = top * 0.5 * (1.0 - np.cos(np.pi * j / n_cheb))
        # the kink at t = 1/2 maps to small s; the far tail to s near 1
        near_crit = np.linspace(0.0, 0.3, 301)
        near_one = 1.0 - np.logspace(-1, math.log10(gap), 400)
        s = np.unique(np.concatenate([cheb, near_crit, near_one, [top]]))
        s = s[s <= top]
        f = f_p(self.p, s)
        if not np.all(np.diff(f) > 0):
            raise NumericalError("f_p table is not strictly increasing")
        self.s_grid = s
        self.f_grid = f
        self.t_sat = float(f[-1])
        self.tol = 1e-9
        self.s_grid.setflags(write=False)
        self.f_grid.setflags(write=False)

    def invert(self, t):
        """Return (g_p(t), saturated) for scalar or array t."""
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        if np.any(t_arr < 0):
            raise DomainError("g_p needs t >= 0")
        out = np.zeros_like(t_arr)
        sat = t_arr >= self.t_sat
        out[sat] = 1.0 - self.gap
        act = (t_arr > 0.5) & ~sat
        if act.any():
            out[act] = self._solve(t_arr[act])
        if np.ndim(t):
            return out, sat
        return float(out[0]), bool(sat[0])

    def _solve(self, t):
        idx = np.searchsorted(self.f_grid, t)
        lo = self.s_grid[idx - 1].copy()
        hi = self.s_grid[idx].copy()
        flo = self.f_grid[idx - 1]
        fhi = self.f_grid[idx]
        s = lo + (t - flo) / (fhi - flo) * (hi - lo)
        todo = np.ones(t.shape, dtype=bool)
        for _ in range(100):
            ii = np.nonzero(todo)[0]
            if ii.size == 0:
                break
            si = s[ii]
            r = f_p(self.p, si) - t[ii]
            lo[ii] = np.where(r < 0, si, lo[ii])
            hi[ii] = np.where(r > 0, si, hi[ii])
            d = f_p_prime(self.p, si)
            nxt = si - r / d
            done = (np.abs(r) <= 4e-16 * t[ii]) | (np.abs(nxt - si) <= 1e-16) | (hi[ii] - lo[ii] <= 2e-16)
            bad = ~((nxt > lo[ii]) & (nxt < hi[ii]))
            nxt = np.where(bad, 0.5 * (lo[ii] + hi[ii]), nxt)
            s[ii] = np.where(done, si, nxt)
            todo[ii[done]] = False
        if todo.any():
            raise NumericalError("g_p inversion did not converge")
        return s

    def g(self, t):
        return self.invert(t)[0]


@lru_cache(maxsize=16)
def gel_curve(p):
    return GelCurve(p)


def g_p(curve, t):
    return curve.g(t)


def v_p(curve, t):
    return 1.0 - curve.g(t)


def e_p(curve, t):
    return t * (1.0 - curve.g(t)) ** 2


def r_p(curve, t):
    return t * (1.0 - curve.g(t))


def d_p(curve, t):
    g = curve.g(t)
    return t - g - t * (1.0 - g) ** 2


def t_pk(curve, k, t):
    """Limit density of trees of size k at time t."""
    k = int(k)
    if k < 1:
        raise DomainError("k must be positive")
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    u = 1.0 - curve.g(t_arr)
    out = np.zeros_like(t_arr)
    pos = t_arr > 0
    if k == 1:
        out = u * np.exp(-2.0 * t_arr * u)
    elif k <= 30:
        w = k ** (k - 2) / math.factorial(k)
        out[pos] = w * (2 * t_arr[pos]) ** (k - 1) * u[pos] ** k * np.exp(-2.0 * k * t_arr[pos] * u[pos])
    else:
        lw = (k - 2) * math.log(k) - gammaln(k + 1.0)
        tp, up = t_arr[pos], u[pos]
        out[pos] = np.exp(lw + (k - 1) * np.log(2 * tp) + k * np.log(up) - 2.0 * k * tp * up)
    return out if np.ndim(t) else float(out[0])


def ode_residuals(curve, t, h=1e-5, kmax=10):
    """Centered-difference residuals of the gel, discard and tree-count ODEs."""
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t_arr <= 0.5 + 1e-3):
        raise DomainError("residuals need t > 1/2 + 1e-3")
    p = curve.p
    gp, gm, g0 = curve.g(t_arr + h), curve.g(t_arr - h), curve.g(t_arr)
    rhs_g = 2 * p * g0 * (1 - g0) / (1 - 2 * t_arr * (1 - g0))
    res_g = np.abs((gp - gm) / (2 * h) - rhs_g)
    dp = d_p(curve, t_arr + h)
    dm = d_p(curve, t_arr - h)
    rhs_d = 2 * (1 - p) * g0 * (1 - g0) + g0 * g0
    res_d = np.abs((dp - dm) / (2 * h) - rhs_d)
    tk = np.array([t_pk(curve, k, t_arr) for k in range(1, kmax + 1)])
    res_t = np.zeros_like(t_arr)
    for k in range(1, kmax + 1):
        deriv = (t_pk(curve, k, t_arr + h) - t_pk(curve, k, t_arr - h)) / (2 * h)
        gain = np.zeros_like(t_arr)
        for i in range(1, k):
            gain += i * (k - i) * tk[i - 1] * tk[k - i - 1]
        rhs = gain - 2 * k * tk[k - 1] * (1 - (1 - p) * g0)
        res_t = np.maximum(res_t, np.abs(deriv - rhs))
    if np.ndim(t):
        return res_g, res_d, res_t
    return float(res_g[0]), float(res_d[0]), float(res_t[0])


def slowdown_constant(p):
    """psi(1/p) + Euler gamma."""
    return digamma(1.0 / _check_p(p)) + EULER_GAMMA


def integral_identity_check(p, curve=None):
    """(lhs, rhs) of (1-p) int_0^inf (1 - g_p) dt = (psi(1/p) + gamma) / 2."""
    p = _check_p(p)
    rhs = 0.5 * slowdown_constant(p)
    if p == 1.0:
        return 0.0, rhs
    curve = curve or gel_curve(p)
    top = curve.t_sat
    body, err = integrate.quad(
        lambda t: 1.0 - curve.g(t), 0.5, top, limit=500, epsabs=1e-11, epsrel=1e-12
    )
    if err > 1e-7:
        raise NumericalError(f"integral quadrature error {err:.2e}")
    # beyond saturation 1 - g decays like exp(-2pt)
    tail = curve.gap / (2 * p)
    lhs = (1 - p) * (0.5 + body + tail)
    return lhs, rhs


@dataclass(frozen=True)
class ThresholdTime:
    p: float
    k: int
    n: int
    value: float


def threshold_time(p, k, n):
    p = _check_p(p)
    if n < 3 or k < 1:
        raise DomainError("threshold_time needs n >= 3 and k >= 1")
    a = math.log(n) / (k * p)
    return ThresholdTime(p, k, n, a + (k - 1) / (k * p) * math.log(a))


def log_cayley_over_factorial(k):
    # ln(k^(k-2) / k!)
    return (k - 2) * math.log(k) - math.lgamma(k + 1)


def gumbel_shift(p, k):
    """(shift, scale) with A^(k+)/n - t^(k)/2 -> shift + scale * Gumbel."""
    p = _check_p(p)
    scale = 1.0 / (2 * k * p)
    shift = -slowdown_constant(p) / (2 * p) + log_cayley_over_factorial(k) / (2 * k * p)
    return shift, scale


def largest_tree_constant(t, curve):
    """Limit of (largest tree size) / ln n at step n t."""
    r = float(r_p(curve, t))
    c = 2 * r
    denom = c - 1 - math.log(c) if c > 0 else math.inf
    if abs(c - 1.0) < 1e-12 or denom <= 0:
        raise DomainError("largest_tree_constant is undefined at the critical time")
    return 1.0 / denom


def tail_constant(p):
    """lim (1 - g_p(t)) e^{2pt} = exp(-(psi(1/p) + gamma))."""
    return math.exp(-slowdown_constant(p))
