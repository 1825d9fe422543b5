"""Exact and asymptotic counts of labeled forests, and the one-step kernel.

#W(N, M) is the number of forests on N labeled vertices with M edges.
"""
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .errors import DomainError
from .special_functions import MuX, mu_pmf_vector, stable_density_p1

DEFAULT_MAX_N = 400


class ForestCountTable:
    """Lazily filled table of #W(N, M) as Python integers.

    Row N holds #W(N, 0..N-1). Rows are built from the recurrence on the tree
    containing a fixed vertex: a tree of size j uses j-1 edges, so
    #W(N, M) = sum_j C(N-1, j-1) j^(j-2) #W(N-j, M-j+1).
    """

    def __init__(self, max_n=DEFAULT_MAX_N):
        self.max_n = int(max_n)
        self._rows = [[1]]  # N = 0: the empty forest
        self._cayley = [0, 1]

    def _tree_count(self, j):
        while len(self._cayley) <= j:
            k = len(self._cayley)
            self._cayley.append(k ** (k - 2))
        return self._cayley[j]

    def _extend(self, n_target):
        while len(self._rows) <= n_target:
            n = len(self._rows)
            row = [0] * n
            for j in range(1, n + 1):
                w = math.comb(n - 1, j - 1) * self._tree_count(j)
                sub = self._rows[n - j]
                # edges inside the tree of vertex 1: j - 1; the rest from sub
                for m_rest, c in enumerate(sub):
                    if c:
                        row[m_rest + j - 1] += w * c
            self._rows.append(row)

    def count(self, n, m):
        n, m = int(n), int(m)
        if n < 0 or m < 0:
            return 0
        if n == 0:
            return 1 if m == 0 else 0
        if m > n - 1:
            return 0
        if n > self.max_n:
            raise DomainError(f"N={n} exceeds table size {self.max_n}")
        self._extend(n)
        return self._rows[n][m]

    def row(self, n):
        self._extend(n)
        return list(self._rows[n])


_DEFAULT_TABLE = ForestCountTable()


def count_forests_exact(n, m, table=None):
    return (table or _DEFAULT_TABLE).count(n, m)


def walk_probability(n_steps, target, theta):
    """P(S_K = N) for the walk with mu_x increments, x = theta e^-theta."""
    mu = MuX.from_theta(theta)
    if n_steps == 0:
        return 1.0 if target == 0 else 0.0
    if target < n_steps:
        return 0.0
    pmf = np.concatenate([[0.0], mu_pmf_vector(mu, target)])
    dist = np.zeros(target + 1)
    dist[0] = 1.0
    for _ in range(n_steps):
        dist = np.convolve(dist, pmf)[: target + 1]
    return float(dist[target])


def walk_count(n, m, theta):
    """Right side of #W(N,M) = N!/(N-M)! T(x)^(N-M) / x^N P(S_(N-M) = N)."""
    mu = MuX.from_theta(theta)
    k = n - m
    q = walk_probability(k, n, theta)
    if q == 0.0:
        return 0.0
    log_pre = math.lgamma(n + 1) - math.lgamma(k + 1) + k * math.log(mu.t_of_x) - n * math.log(mu.x)
    return math.exp(log_pre + math.log(q))


def count_identity_check(n, m, theta):
    """Relative deviation between the walk identity and the exact count."""
    if m > n - 1 or m < 0:
        raise DomainError("need 0 <= M <= N-1")
    exact = count_forests_exact(n, m)
    return abs(walk_count(n, m, theta) - exact) / exact


# --- asymptotic regimes ------------------------------------------------------


def _omega(n, m):
    return (2 * m - n) / n ** (2.0 / 3.0)


def _log_subcritical(n, m):
    return 2 * m * math.log(n) - m * math.log(2) - math.lgamma(m + 1) + 0.5 * math.log1p(-2 * m / n)


def _log_critical(n, m):
    om = _omega(n, m)
    return (
        (n - 1.0 / 6.0) * math.log(n)
        - (n - m) * math.log(2)
        - math.lgamma(n - m + 1)
        + 0.5 * math.log(2 * math.pi)
        + math.log(stable_density_p1(om))
    )


def _log_supercritical(n, m):
    return (
        (n - 2) * math.log(n)
        - (n - m - 1) * math.log(2)
        - math.lgamma(n - m)
        - 2.5 * math.log(2 * m / n - 1)
    )


def britikov_all(n, m):
    """Every applicable log-estimate of #W(N,M), keyed by regime."""
    if not (1 <= m <= n - 1):
        raise DomainError("need 1 <= M <= N-1")
    out = {"near-critical": _log_critical(n, m)}
    if 2 * m < n:
        out["subcritical"] = _log_subcritical(n, m)
    if 2 * m > n:
        out["supercritical"] = _log_supercritical(n, m)
    return out


def britikov_asymptotic(n, m, cutoff=1.0):
    """(regime, natural-log estimate of #W(N,M))."""
    est = britikov_all(n, m)
    om = _omega(n, m)
    if abs(om) <= cutoff:
        regime = "near-critical"
    elif om < 0:
        regime = "subcritical"
    else:
        regime = "supercritical"
    return regime, est[regime]


# --- one-step transition kernel ---------------------------------------------


@dataclass(frozen=True)
class KernelState:
    n: int
    v: int
    e: int
    g: int

    def __post_init__(self):
        if self.v + self.g != self.n or self.v < 0 or self.g < 0:
            raise DomainError("need v + g = n with v, g >= 0")
        if not (0 <= self.e <= max(self.v - 1, 0)):
            raise DomainError("need 0 <= e <= max(v-1, 0)")


def gel_jump_pmf(p, state, k, table=None):
    """P(Delta G = k | state). Exact (a Fraction) when p is a Fraction or int."""
    table = table or _DEFAULT_TABLE
    n, v, e, g = state.n, state.v, state.e, state.g
    if k < 1 or k > e + 1 or k > v:
        return Fraction(0) if isinstance(p, (Fraction, int)) else 0.0
    ratio = Fraction(
        math.comb(v, k) * _cayley(k) * table.count(v - k, e - k + 1),
        table.count(v, e),
    )
    weight = k * (k - 1) + 2 * p * k * g
    return ratio * weight / (n * (n - 1))


def discard_prob(p, state):
    """P(Delta D = 1 | state)."""
    n, g = state.n, state.g
    num = 2 * (1 - p) * g * (n - g) + g * (g - 1)
    if isinstance(num, int):
        return Fraction(num, n * (n - 1))
    return num / (n * (n - 1))


def gel_jump_distribution(p, state, table=None):
    """Map k -> P(Delta G = k) for every k with positive mass, plus 0 -> rest."""
    out = {}
    for k in range(1, state.e + 2):
        q = gel_jump_pmf(p, state, k, table)
        if q:
            out[k] = q
    out[0] = 1 - sum(out.values())
    return out


@lru_cache(maxsize=None)
def _cayley(k):
    return 1 if k <= 2 else k ** (k - 2)
