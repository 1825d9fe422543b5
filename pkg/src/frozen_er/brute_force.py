"""Exhaustive enumeration oracles for small instances.

Nothing here shares code with the counting recurrences or the samplers; it
exists to check them.
"""
import itertools
from collections import Counter
from fractions import Fraction
from functools import lru_cache


def _pairs(v):
    return list(itertools.combinations(range(v), 2))


def iter_forests(v):
    """Yield every forest on vertices 0..v-1 as a tuple of edge indices into _pairs(v)."""
    pairs = _pairs(v)
    n_pairs = len(pairs)

    def grow(start, edges, comp):
        yield tuple(edges)
        for idx in range(start, n_pairs):
            a, b = pairs[idx]
            ca, cb = comp[a], comp[b]
            if ca == cb:
                continue
            new = [ca if c == cb else c for c in comp]
            edges.append(idx)
            yield from grow(idx + 1, edges, new)
            edges.pop()

    yield from grow(0, [], list(range(v)))


def forests_with_edges(v, e):
    """All forests on v vertices with e edges, as sorted tuples of (a, b) pairs."""
    pairs = _pairs(v)
    return [tuple(pairs[i] for i in f) for f in iter_forests(v) if len(f) == e]


def component_sizes(v, edges):
    comp = list(range(v))

    def find(x):
        while comp[x] != x:
            x = comp[x]
        return x

    for a, b in edges:
        comp[find(a)] = find(b)
    return tuple(sorted(Counter(find(x) for x in range(v)).values(), reverse=True))


@lru_cache(maxsize=None)
def size_profile(v):
    """Map e -> Counter of size multisets over all forests on v vertices with e edges."""
    pairs = _pairs(v)
    out = {}
    for f in iter_forests(v):
        sizes = component_sizes(v, [pairs[i] for i in f])
        out.setdefault(len(f), Counter())[sizes] += 1
    return out


def one_step_gel_jump(p, n, v, e):
    """Exact law of Delta G after one step from a uniform forest on (v, e) plus n-v frozen vertices.

    Each tree of size k freezes when the drawn pair lies inside it (k(k-1) ordered
    pairs) or, with probability p, when it is paired with a frozen vertex
    (2 k g ordered pairs)."""
    g = n - v
    prof = size_profile(v)[e] if v > 0 else Counter({(): 1})
    total = sum(prof.values())
    law = Counter()
    for sizes, mult in prof.items():
        for k in sizes:
            law[k] += Fraction(mult, total) * (k * (k - 1) + 2 * p * k * g) / (n * (n - 1))
    law[0] = 1 - sum(law.values())
    return dict(law)


def count_forests_brute(v, e):
    if v == 0:
        return 1 if e == 0 else 0
    return sum(size_profile(v).get(e, Counter()).values())
