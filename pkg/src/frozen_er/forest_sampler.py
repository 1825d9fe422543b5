"""Exact uniform sampling of labeled forests with N vertices and M edges.

Tree sizes are the increments of a random walk with mu_x steps conditioned to
hit N after N-M steps; they are drawn backwards from tables of P(S_j = s).
Each block of labels then receives an independent uniform Cayley tree.
"""
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from ._accel import jit
from .errors import DomainError
from .special_functions import MuX, mu_pmf_vector

_THETA_FLOOR = 1e-9


def default_theta(n, m):
    return min(max(2.0 * m / n, _THETA_FLOOR), 1.0)


@lru_cache(maxsize=64)
def walk_table(n, m, theta):
    """Rows j = 0..N-M of P(S_j = j + d), d = 0..M, each scaled to max 1.

    Returns (table, nu) where nu[i] = mu_x(i + 1)."""
    k = n - m
    nu = mu_pmf_vector(MuX.from_theta(theta), m + 1)
    tab = np.zeros((k + 1, m + 1))
    tab[0, 0] = 1.0
    for j in range(1, k + 1):
        row = np.convolve(tab[j - 1], nu)[: m + 1]
        tab[j] = row / row.max()
    tab.setflags(write=False)
    return tab, nu


@jit
def _backward_sizes(tab, nu, uniforms, out):
    k = tab.shape[0] - 1
    d = tab.shape[1] - 1
    for j in range(k, 0, -1):
        prev = tab[j - 1]
        total = 0.0
        for i in range(d + 1):
            total += nu[i] * prev[d - i]
        target = uniforms[j - 1] * total
        acc = 0.0
        pick = d
        for i in range(d + 1):
            acc += nu[i] * prev[d - i]
            if acc > target:
                pick = i
                break
        out[j - 1] = pick + 1
        d -= pick
    return out


@jit
def _backward_sizes_batch(tab, nu, uniforms, out):
    for r in range(uniforms.shape[0]):
        _backward_sizes(tab, nu, uniforms[r], out[r])
    return out


def sample_component_sizes(n, m, rng, theta=None, count=None):
    """Tree sizes of a uniform forest in W(N, M), in walk order.

    With count set, returns a (count, N-M) array of independent draws."""
    n, m = int(n), int(m)
    if n - m <= 0 or m < 0:
        raise DomainError("need 0 <= M <= N-1")
    theta = default_theta(n, m) if theta is None else float(theta)
    k = n - m
    shape = (k,) if count is None else (int(count), k)
    if m == 0:
        return np.ones(shape, dtype=np.int64)
    tab, nu = walk_table(n, m, theta)
    u = rng.random(shape)
    out = np.empty(shape, dtype=np.int64)
    if count is None:
        return _backward_sizes(tab, nu, u, out)
    return _backward_sizes_batch(tab, nu, u, out)


@jit
def _prufer_decode(code, k, eu, ev):
    """Decode a Pruefer code over 0..k-1 into k-1 edges (linear time)."""
    degree = np.ones(k, dtype=np.int64)
    for x in code:
        degree[x] += 1
    ptr = 0
    while degree[ptr] != 1:
        ptr += 1
    leaf = ptr
    for i in range(k - 2):
        x = code[i]
        eu[i] = leaf
        ev[i] = x
        degree[x] -= 1
        if degree[x] == 1 and x < ptr:
            leaf = x
        else:
            ptr += 1
            while degree[ptr] != 1:
                ptr += 1
            leaf = ptr
    # the last two vertices of degree one
    a = leaf
    b = -1
    for y in range(k - 1, -1, -1):
        if degree[y] == 1 and y != a:
            b = y
            break
    eu[k - 2] = a
    ev[k - 2] = b
    return eu, ev


def sample_cayley_tree(vertex_labels, rng):
    """Uniform labeled tree on the given labels, as a list of (u, v) pairs."""
    labels = list(vertex_labels)
    k = len(labels)
    if k == 0:
        raise DomainError("need at least one vertex")
    if k == 1:
        return []
    if k == 2:
        return [(labels[0], labels[1])]
    code = rng.integers(0, k, size=k - 2)
    eu = np.empty(k - 1, dtype=np.int64)
    ev = np.empty(k - 1, dtype=np.int64)
    _prufer_decode(code, k, eu, ev)
    return [(labels[a], labels[b]) for a, b in zip(eu.tolist(), ev.tolist())]


@dataclass
class Forest:
    n_vertices: int
    edges: list
    components: list = field(default_factory=list)

    def edge_key(self):
        return tuple(sorted((min(a, b), max(a, b)) for a, b in self.edges))


def _check_acyclic(n, edges):
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in edges:
        ra, rb = find(a), find(b)
        if ra == rb:
            raise AssertionError("sampled forest contains a cycle")
        parent[ra] = rb


def sample_forest(n, m, rng, theta=None):
    """A uniform element of W(N, M) on vertices 0..N-1."""
    sizes = sample_component_sizes(n, m, rng, theta)
    perm = rng.permutation(n)
    edges = []
    comps = []
    pos = 0
    for k in sizes.tolist():
        block = perm[pos : pos + k].tolist()
        pos += k
        comps.append(sorted(block))
        edges.extend(sample_cayley_tree(block, rng))
    _check_acyclic(n, edges)
    return Forest(n, edges, comps)


def largest_sizes(n, m, rng, count, theta=None):
    """Largest tree size in each of `count` uniform forests of W(N, M)."""
    return sample_component_sizes(n, m, rng, theta, count=count).max(axis=1)


def expected_largest_constant(n, m):
    """ln(N) / (2c - 1 - ln 2c) with c = M/N, the concentration point of the largest tree."""
    c = m / n
    return math.log(n) / (2 * c - 1 - math.log(2 * c))
