"""The p-frozen Erdos-Renyi process.

Each step draws a uniform pair of distinct vertices:
  * both in trees: the edge is added; inside one tree it closes a cycle and the
    tree freezes, across two trees they merge;
  * both frozen: discarded;
  * one frozen, one in a tree: with probability p the tree is glued to the gel,
    otherwise the edge is discarded.

Random draws are generated in blocks by numpy and consumed by a compiled
kernel, so a run is bit-for-bit identical with or without numba.
"""
import hashlib
import json
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from ._accel import jit
from .errors import DomainError
from .forest_sampler import _backward_sizes, default_theta, walk_table

# event codes
MERGE, FREEZE, GLUE, DISCARD, IGNORED = 1, 2, 3, 4, 5
EVENT_NAMES = {MERGE: "TreeMerge", FREEZE: "Freeze", GLUE: "GlueToGel", DISCARD: "Discard", IGNORED: "Ignored"}

# integer counters
C_M, C_G, C_D, C_V, C_E, C_TREES, C_IGN, C_WATCH, C_GPOS, C_LOG, C_NEDGE, C_EVENT, C_ESIZE = range(13)
N_COUNTERS = 13
# float counters
F_T, F_AREA, F_WATCH = range(3)
N_FCOUNTERS = 3

# kernel exit status
RUNNING, ABSORBED, STEP_LIMIT, TIME_LIMIT, WATCH_FROZEN = 0, 1, 2, 3, 4


@jit(inline=True)
def _find(parent, x):
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


@jit(inline=True)
def _drop_tree(hist, ge, last, tlast, cnt, ft, k, kmax):
    # a tree of size k leaves the forest (freeze or glue)
    hist[k] -= 1
    cnt[C_TREES] -= 1
    m = cnt[C_M]
    if k <= kmax and hist[k] == 0:
        last[0, k] = m
        tlast[0, k] = ft[F_T]
    top = k if k < kmax else kmax
    for kk in range(1, top + 1):
        ge[kk] -= 1
        if ge[kk] == 0:
            last[1, kk] = m
            tlast[1, kk] = ft[F_T]


@jit(inline=True)
def _merge(parent, csize, hist, cnt, ft, ge, last, tlast, edges, ra, rb, a, b, kmax):
    sa = csize[ra]
    sb = csize[rb]
    if sa < sb:
        parent[ra] = rb
        csize[rb] = sa + sb
    else:
        parent[rb] = ra
        csize[ra] = sa + sb
    hist[sa] -= 1
    hist[sb] -= 1
    hist[sa + sb] += 1
    cnt[C_E] += 1
    cnt[C_TREES] -= 1
    m = cnt[C_M]
    if sa <= kmax and hist[sa] == 0:
        last[0, sa] = m
        tlast[0, sa] = ft[F_T]
    if sb <= kmax and hist[sb] == 0:
        last[0, sb] = m
        tlast[0, sb] = ft[F_T]
    lo = sa if sa < sb else sb
    hi = sa + sb - lo
    top = sa + sb if sa + sb < kmax else kmax
    for kk in range(1, top + 1):
        if kk <= lo:
            ge[kk] -= 1
        elif kk > hi:
            ge[kk] += 1
    if edges.shape[1] > 0:
        ne = cnt[C_NEDGE]
        edges[0, ne] = a
        edges[1, ne] = b
        cnt[C_NEDGE] = ne + 1
    return sa + sb


@jit(inline=True)
def _freeze(parent, csize, frozen, hist, cnt, ft, ge, last, tlast, rt, rg, kmax, watch):
    """Tree rooted at rt becomes frozen, in place (rg < 0) or glued onto the frozen root rg."""
    k = csize[rt]
    if rg < 0:
        frozen[rt] = 1
    elif csize[rg] < k:
        parent[rg] = rt
        csize[rt] += csize[rg]
        frozen[rt] = 1
    else:
        parent[rt] = rg
        csize[rg] += k
    cnt[C_G] += k
    cnt[C_V] -= k
    cnt[C_E] -= k - 1
    _drop_tree(hist, ge, last, tlast, cnt, ft, k, kmax)
    if cnt[C_WATCH] < 0 and frozen[_find(parent, watch)] == 1:
        cnt[C_WATCH] = cnt[C_M]
        ft[F_WATCH] = ft[F_T]
    return k


@jit(inline=True)
def _apply_event(parent, csize, frozen, hist, cnt, ft, ge, last, tlast, edges, ra, rb, a, b, coin, p, strict, kmax, watch):
    """Rules for one drawn pair whose roots are ra, rb; the step counter is already advanced."""
    fa = frozen[ra]
    fb = frozen[rb]
    ev = DISCARD
    size = 0
    if fa == 1 and fb == 1:
        cnt[C_D] += 1
    elif fa == 0 and fb == 0:
        if ra != rb:
            size = _merge(parent, csize, hist, cnt, ft, ge, last, tlast, edges, ra, rb, a, b, kmax)
            ev = MERGE
        elif strict and coin < 2.0 / csize[ra]:
            # the ring hit one of the k-1 edges already in the tree
            cnt[C_IGN] += 1
            ev = IGNORED
            size = csize[ra]
        else:
            size = _freeze(parent, csize, frozen, hist, cnt, ft, ge, last, tlast, ra, -1, kmax, watch)
            ev = FREEZE
    elif coin < p:
        if fa == 1:
            size = _freeze(parent, csize, frozen, hist, cnt, ft, ge, last, tlast, rb, ra, kmax, watch)
        else:
            size = _freeze(parent, csize, frozen, hist, cnt, ft, ge, last, tlast, ra, rb, kmax, watch)
        ev = GLUE
    else:
        cnt[C_D] += 1
    cnt[C_EVENT] = ev
    cnt[C_ESIZE] = size
    return ev


@jit
def _apply_pair(parent, csize, frozen, hist, cnt, ft, ge, last, tlast, edges, a, b, coin, p, strict, kmax, watch):
    """Apply one drawn pair (a, b). Returns the event code."""
    ra = _find(parent, a)
    rb = _find(parent, b)
    cnt[C_M] += 1
    return _apply_event(parent, csize, frozen, hist, cnt, ft, ge, last, tlast, edges, ra, rb, a, b, coin, p,
                        strict, kmax, watch)


@jit(inline=True)
def _record(traj, row, x, cnt, hist, kmax):
    traj[row, 0] = x
    traj[row, 1] = cnt[C_G]
    traj[row, 2] = cnt[C_D]
    traj[row, 3] = cnt[C_V]
    traj[row, 4] = cnt[C_E]
    for k in range(1, kmax + 1):
        traj[row, 4 + k] = hist[k]


EVENT = -1


@jit(inline=True)
def _scan(parent, frozen, hist, cnt, ft, grid, traj, ii, jj, coins, waits, s, p, poisson, kmax, m_stop, t_stop):
    """Consume steps that are plain discards. Stops at the first step that changes
    the forest or the gel, with time and grid already advanced for it.

    Returns (index, status, root a, root b); status EVENT means step `index`
    still has to be applied. Everything this loop touches is inlined: a
    compiled call taking arrays inside it would make numba reference count
    those arrays on every iteration."""
    ng = grid.shape[0]
    nblock = ii.shape[0]
    while s < nblock:
        if poisson:
            tn = ft[F_T] + waits[s]
            if tn > t_stop:
                return s, TIME_LIMIT, -1, -1
            while cnt[C_GPOS] < ng and grid[cnt[C_GPOS]] < tn:
                _record(traj, cnt[C_GPOS], grid[cnt[C_GPOS]], cnt, hist, kmax)
                cnt[C_GPOS] += 1
            ft[F_AREA] += cnt[C_G] * (tn - ft[F_T])
            ft[F_T] = tn
        else:
            if cnt[C_M] >= m_stop:
                return s, STEP_LIMIT, -1, -1
            while cnt[C_GPOS] < ng and grid[cnt[C_GPOS]] <= cnt[C_M]:
                _record(traj, cnt[C_GPOS], grid[cnt[C_GPOS]], cnt, hist, kmax)
                cnt[C_GPOS] += 1
        ra = _find(parent, ii[s])
        rb = _find(parent, jj[s])
        fa = frozen[ra]
        fb = frozen[rb]
        if (fa == 1 and fb == 1) or (fa != fb and coins[s] >= p):
            cnt[C_M] += 1
            cnt[C_D] += 1
            cnt[C_EVENT] = DISCARD
            cnt[C_ESIZE] = 0
            s += 1
            continue
        return s, EVENT, ra, rb
    return s, RUNNING, -1, -1


@jit
def _advance(
    parent, csize, frozen, hist, cnt, ft, ge, last, tlast, edges, grid, traj, glog_t, glog_g,
    ii, jj, coins, waits, start, p, poisson, strict, kmax, watch, m_stop, t_stop, stop_on_watch,
):
    """Consume draws from index `start` until a stop condition or the block ends.

    Returns (next unused index, status)."""
    n = parent.shape[0]
    use_log = glog_t.shape[0] > 0
    s = start
    while True:
        s, status, ra, rb = _scan(parent, frozen, hist, cnt, ft, grid, traj, ii, jj, coins, waits, s, p,
                                  poisson, kmax, m_stop, t_stop)
        if status != EVENT:
            return s, status
        g_before = cnt[C_G]
        cnt[C_M] += 1
        _apply_event(parent, csize, frozen, hist, cnt, ft, ge, last, tlast, edges, ra, rb, ii[s], jj[s],
                     coins[s], p, strict, kmax, watch)
        s += 1
        if use_log and cnt[C_G] != g_before:
            pos = cnt[C_LOG]
            glog_t[pos] = ft[F_T] if poisson else cnt[C_M]
            glog_g[pos] = cnt[C_G]
            cnt[C_LOG] = pos + 1
        if cnt[C_G] == n:
            return s, ABSORBED
        if stop_on_watch and cnt[C_WATCH] >= 0:
            return s, WATCH_FROZEN


@jit
def _flush(grid, traj, cnt, hist, kmax, limit):
    ng = grid.shape[0]
    while cnt[C_GPOS] < ng and grid[cnt[C_GPOS]] <= limit:
        _record(traj, cnt[C_GPOS], grid[cnt[C_GPOS]], cnt, hist, kmax)
        cnt[C_GPOS] += 1


class GraphState:
    """Mutable state of one run: union-find arrays, counters and histograms."""

    def __init__(self, n, p, k_max=10, keep_edges=False, watch=0):
        n = int(n)
        if n < 2:
            raise DomainError("need n >= 2")
        if not (0.0 <= p <= 1.0):
            raise DomainError("p must lie in [0,1]")
        self.n = n
        self.p = float(p)
        self.k_max = int(k_max)
        self.watch = int(watch)
        self.parent = np.arange(n, dtype=np.int64)
        self.csize = np.ones(n, dtype=np.int64)
        self.frozen = np.zeros(n, dtype=np.uint8)
        self.hist = np.zeros(n + 1, dtype=np.int64)
        self.hist[1] = n
        self.cnt = np.zeros(N_COUNTERS, dtype=np.int64)
        self.cnt[C_V] = n
        self.cnt[C_TREES] = n
        self.cnt[C_WATCH] = -1
        self.ft = np.zeros(N_FCOUNTERS)
        self.ft[F_WATCH] = -1.0
        self.ge = np.zeros(self.k_max + 2, dtype=np.int64)
        self.ge[1] = n
        self.last = np.zeros((2, self.k_max + 2), dtype=np.int64)
        self.tlast = np.zeros((2, self.k_max + 2))
        if keep_edges:
            if n > 10**4:
                raise DomainError("keep_edges is limited to n <= 10^4")
            self.edges = np.zeros((2, n), dtype=np.int64)
        else:
            self.edges = np.zeros((2, 0), dtype=np.int64)

    @classmethod
    def from_components(cls, n, p, trees, frozen_vertices, k_max=10):
        """State with the given tree blocks (vertex lists) and one frozen block."""
        st = cls(n, p, k_max)
        st.hist[:] = 0
        st.ge[:] = 0
        seen = set()
        v = e = 0
        for block in trees:
            root = block[0]
            for x in block:
                st.parent[x] = root
            st.csize[root] = len(block)
            st.hist[len(block)] += 1
            for kk in range(1, min(len(block), st.k_max) + 1):
                st.ge[kk] += 1
            v += len(block)
            e += len(block) - 1
            seen.update(block)
        fz = list(frozen_vertices)
        if fz:
            root = fz[0]
            for x in fz:
                st.parent[x] = root
            st.csize[root] = len(fz)
            st.frozen[root] = 1
            seen.update(fz)
        if seen != set(range(n)):
            raise DomainError("blocks must partition the vertex set")
        st.cnt[C_V] = v
        st.cnt[C_E] = e
        st.cnt[C_G] = len(fz)
        st.cnt[C_TREES] = len(trees)
        # treat the injected edges as present from the start
        st.cnt[C_M] = e + len(fz)
        return st

    # counters
    m = property(lambda self: int(self.cnt[C_M]))
    g = property(lambda self: int(self.cnt[C_G]))
    d = property(lambda self: int(self.cnt[C_D]))
    v = property(lambda self: int(self.cnt[C_V]))
    e = property(lambda self: int(self.cnt[C_E]))
    ignored = property(lambda self: int(self.cnt[C_IGN]))
    n_trees = property(lambda self: int(self.cnt[C_TREES]))
    time = property(lambda self: float(self.ft[F_T]))

    @property
    def tree_size_hist(self):
        nz = np.nonzero(self.hist)[0]
        return {int(k): int(self.hist[k]) for k in nz}

    def root(self, x):
        return int(_find(self.parent, x))

    def is_frozen(self, x):
        return bool(self.frozen[_find(self.parent, x)])

    def component_size(self, x):
        return int(self.csize[_find(self.parent, x)])

    def largest_trees(self, count=1):
        """The `count` largest tree sizes, in decreasing order (zeros if fewer trees)."""
        out = []
        k = self.n
        h = self.hist
        while k > 0 and len(out) < count:
            c = int(h[k])
            out.extend([k] * min(c, count - len(out)))
            k -= 1
        return out + [0] * (count - len(out))

    def forest_edges(self):
        """Edges of the tree components (requires keep_edges)."""
        ne = int(self.cnt[C_NEDGE])
        out = []
        for a, b in zip(self.edges[0, :ne].tolist(), self.edges[1, :ne].tolist()):
            if not self.frozen[_find(self.parent, a)]:
                out.append((a, b))
        return out

    def check_invariants(self):
        n = self.n
        assert self.v + self.g == n
        assert self.e + self.g + self.d + self.ignored == self.m
        assert self.g <= min(self.m, n)
        ks = np.arange(n + 1)
        assert int((ks * self.hist).sum()) == self.v
        assert int(self.hist.sum()) == self.n_trees


@dataclass
class StepOutcome:
    kind: str
    size: int = 0
    dt: float = 0.0


def _draw_block(rng, n, size, poisson, rate):
    ii = rng.integers(0, n, size=size)
    jj = rng.integers(0, n - 1, size=size)
    jj += jj >= ii
    coins = rng.random(size)
    waits = rng.standard_exponential(size) / rate if poisson else np.zeros(0)
    return ii, jj, coins, waits


_NO_GRID = np.zeros(0)
_NO_TRAJ = np.zeros((0, 0))
_NO_LOG_T = np.zeros(0)
_NO_LOG_G = np.zeros(0, dtype=np.int64)


def _single_step(state, rng, poisson, strict=False, rate=None):
    n = state.n
    rate = rate if rate is not None else (n - 1) / 2.0
    ii, jj, coins, waits = _draw_block(rng, n, 1, poisson, rate)
    t0 = state.time
    _advance(
        state.parent, state.csize, state.frozen, state.hist, state.cnt, state.ft, state.ge,
        state.last, state.tlast, state.edges, _NO_GRID, _NO_TRAJ, _NO_LOG_T, _NO_LOG_G,
        ii, jj, coins, waits, 0, state.p, poisson, strict, state.k_max, state.watch,
        np.iinfo(np.int64).max, np.inf, False,
    )
    ev = int(state.cnt[C_EVENT])
    return StepOutcome(EVENT_NAMES[ev], int(state.cnt[C_ESIZE]), state.time - t0)


def step_discrete(state, rng):
    """One discrete step; returns the outcome kind and the tree size involved."""
    return _single_step(state, rng, False)


def step_poissonized(state, rng, strict=False):
    """Advance the clock by an Exp((n-1)/2) wait, then apply one drawn pair."""
    return _single_step(state, rng, True, strict)


@dataclass
class RunConfig:
    n: int
    p: float
    mode: str = "discrete"
    seed: int = 0
    grid: int = 512
    k_max: int = 10
    horizon: float = None
    max_steps: int = None
    stop_step: int = None
    stop_time: float = None
    stop_on_watch: bool = False
    strict_ppp: bool = False
    keep_edges: bool = False
    log_gel: bool = False
    pair_rate: float = None
    watch: int = 0

    def validate(self):
        if self.n < 2:
            raise DomainError("need n >= 2")
        if not (0.0 < self.p <= 1.0):
            raise DomainError("p must lie in (0,1]")
        if self.mode not in ("discrete", "poissonized"):
            raise DomainError(f"unknown mode {self.mode!r}")
        if self.grid < 0 or self.k_max < 1:
            raise DomainError("grid must be >= 0 and k_max >= 1")

    def digest(self):
        blob = json.dumps(asdict(self), sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class RunRecord:
    config: RunConfig
    columns: list
    trajectory: np.ndarray
    a_k: dict
    a_kplus: dict
    absorption: float
    incomplete: bool
    final: dict
    watch_step: int = -1
    watch_time: float = -1.0
    gel_area: float = 0.0
    gel_log: np.ndarray = None
    wall_seconds: float = 0.0
    state: GraphState = field(default=None, repr=False)

    def to_json(self):
        cfg = asdict(self.config)
        return {
            "version": __version__,
            "config_hash": self.config.digest(),
            "seed": self.config.seed,
            "config": cfg,
            "absorption": self.absorption,
            "a_k": {str(k): v for k, v in self.a_k.items()},
            "a_kplus": {str(k): v for k, v in self.a_kplus.items()},
            "incomplete": self.incomplete,
            "final": self.final,
            "watch_step": self.watch_step,
            "watch_time": self.watch_time,
            "columns": self.columns,
            "n_grid_points": int(self.trajectory.shape[0]),
            "wall_seconds": self.wall_seconds,
        }

    def trajectory_csv(self):
        lines = [",".join(self.columns)]
        for row in self.trajectory:
            x = row[0]
            head = f"{x:.10g}" if self.config.mode == "poissonized" else str(int(x))
            lines.append(",".join([head] + [str(int(v)) for v in row[1:]]))
        return "\n".join(lines) + "\n"


BLOCK = 1 << 15


def default_horizon(n, p, mode):
    t = (math.log(n) + 10.0) / (2.0 * p)
    return t if mode == "discrete" else 2.0 * t


def make_grid(cfg):
    horizon = cfg.horizon if cfg.horizon is not None else default_horizon(cfg.n, cfg.p, cfg.mode)
    if cfg.grid == 0:
        return np.zeros(0)
    if cfg.mode == "discrete":
        top = math.floor(cfg.n * horizon)
        g = np.unique(np.round(np.linspace(0, top, cfg.grid)))
        return g.astype(float)
    return np.linspace(0.0, horizon, cfg.grid)


def run(cfg, rng=None, state=None):
    """Run one replica until absorption or a configured stop; returns a RunRecord."""
    cfg.validate()
    t0 = time.perf_counter()
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    n = cfg.n
    poisson = cfg.mode == "poissonized"
    st = state or GraphState(n, cfg.p, cfg.k_max, cfg.keep_edges, cfg.watch)
    kmax = st.k_max
    grid = make_grid(cfg)
    traj = np.zeros((grid.shape[0], 5 + kmax))
    if cfg.log_gel:
        glog_t = np.zeros(n + 1)
        glog_g = np.zeros(n + 1, dtype=np.int64)
    else:
        glog_t, glog_g = _NO_LOG_T, _NO_LOG_G
    rate = (n - 1) / 2.0 if cfg.pair_rate is None else cfg.pair_rate * n * (n - 1) / 2.0
    cap = cfg.max_steps if cfg.max_steps is not None else int(40 * n * (math.log(n) + 5) / cfg.p)
    m_stop = cap if cfg.stop_step is None else min(cap, int(cfg.stop_step))
    t_stop = np.inf if cfg.stop_time is None else float(cfg.stop_time)
    status = RUNNING
    while status == RUNNING:
        if not poisson:
            left = m_stop - st.m
            if left <= 0:
                status = STEP_LIMIT
                break
            size = min(BLOCK, left)
        else:
            if st.m >= cap:
                status = STEP_LIMIT
                break
            size = min(BLOCK, cap - st.m)
        ii, jj, coins, waits = _draw_block(rng, n, size, poisson, rate)
        _, status = _advance(
            st.parent, st.csize, st.frozen, st.hist, st.cnt, st.ft, st.ge, st.last, st.tlast,
            st.edges, grid, traj, glog_t, glog_g, ii, jj, coins, waits, 0, st.p, poisson,
            cfg.strict_ppp, kmax, st.watch, m_stop, t_stop, cfg.stop_on_watch,
        )
    absorbed = st.g == n
    if absorbed:
        limit = np.inf
    elif poisson:
        limit = t_stop if status == TIME_LIMIT else st.time
        if status == TIME_LIMIT:
            st.ft[F_AREA] += st.g * (t_stop - st.time)
            st.ft[F_T] = t_stop
    else:
        limit = st.m
    _flush(grid, traj, st.cnt, st.hist, kmax, limit)
    traj = traj[: int(st.cnt[C_GPOS])]
    use_time = poisson
    a_k = {k: (float(st.tlast[0, k]) if use_time else int(st.last[0, k])) for k in range(1, kmax + 1)}
    a_kp = {k: (float(st.tlast[1, k]) if use_time else int(st.last[1, k])) for k in range(1, kmax + 1)}
    columns = ["t" if poisson else "m", "G", "D", "V", "E"] + [f"N{k}" for k in range(1, kmax + 1)]
    incomplete = status == STEP_LIMIT and cfg.stop_step is None and not absorbed
    glog = None
    if cfg.log_gel:
        npos = int(st.cnt[C_LOG])
        glog = np.column_stack([glog_t[:npos], glog_g[:npos]])
    return RunRecord(
        config=cfg,
        columns=columns,
        trajectory=traj,
        a_k=a_k,
        a_kplus=a_kp,
        absorption=(a_kp[1] if absorbed else math.nan),
        incomplete=incomplete,
        final={"m": st.m, "t": st.time, "G": st.g, "D": st.d, "V": st.v, "E": st.e, "ignored": st.ignored},
        watch_step=int(st.cnt[C_WATCH]),
        watch_time=float(st.ft[F_WATCH]),
        gel_area=float(st.ft[F_AREA]),
        gel_log=glog,
        wall_seconds=time.perf_counter() - t0,
        state=st,
    )


def replica_rngs(seed, count):
    """Independent generators for `count` replicas derived from one master seed."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(count)]


# --- one-step kernel draws from uniform forests ------------------------------


@jit
def _one_step_from_forests(tab, nu, size_u, keys_order, ii, jj, coins, n, v, p, kmax, counts):
    """For each draw: a uniform forest on (v, e) among vertices 0..v-1 via
    walk sizes and a random label order, vertices v..n-1 frozen, one step.
    Tallies Delta G into counts."""
    from_sizes = np.empty(tab.shape[0] - 1, dtype=np.int64)
    parent = np.empty(n, dtype=np.int64)
    csize = np.ones(n, dtype=np.int64)
    frozen = np.zeros(n, dtype=np.uint8)
    hist = np.zeros(n + 1, dtype=np.int64)
    cnt = np.zeros(N_COUNTERS, dtype=np.int64)
    ft = np.zeros(N_FCOUNTERS)
    ge = np.zeros(kmax + 2, dtype=np.int64)
    last = np.zeros((2, kmax + 2), dtype=np.int64)
    tlast = np.zeros((2, kmax + 2))
    edges = np.zeros((2, 0), dtype=np.int64)
    for r in range(ii.shape[0]):
        for x in range(n):
            parent[x] = x
            csize[x] = 1
            frozen[x] = 0
        hist[:] = 0
        ge[:] = 0
        cnt[:] = 0
        cnt[C_WATCH] = 0
        if v > 0:
            _backward_sizes(tab, nu, size_u[r], from_sizes)
            pos = 0
            for b in range(from_sizes.shape[0]):
                k = from_sizes[b]
                root = keys_order[r, pos]
                for q in range(pos, pos + k):
                    parent[keys_order[r, q]] = root
                csize[root] = k
                hist[k] += 1
                top = k if k < kmax else kmax
                for kk in range(1, top + 1):
                    ge[kk] += 1
                pos += k
        if v < n:
            for x in range(v, n):
                parent[x] = v
            csize[v] = n - v
            frozen[v] = 1
        cnt[C_G] = n - v
        cnt[C_V] = v
        g0 = cnt[C_G]
        _apply_pair(parent, csize, frozen, hist, cnt, ft, ge, last, tlast, edges,
                    ii[r], jj[r], coins[r], p, False, kmax, 0)
        counts[cnt[C_G] - g0] += 1
    return counts


def one_step_gel_jumps(n, v, e, p, draws, rng, k_max=10):
    """Empirical counts of Delta G over `draws` single steps, each from a fresh
    uniform forest with v vertices and e edges plus n - v frozen vertices."""
    counts = np.zeros(n + 1, dtype=np.int64)
    if v > 0:
        theta = default_theta(v, e)
        if e == 0:
            tab = np.ones((v + 1, 1))
            nu = np.ones(1)
        else:
            tab, nu = walk_table(v, e, theta)
        size_u = rng.random((draws, v - e))
        keys = np.argsort(rng.random((draws, v)), axis=1).astype(np.int64)
    else:
        tab = np.ones((1, 1))
        nu = np.ones(1)
        size_u = np.zeros((draws, 0))
        keys = np.zeros((draws, 0), dtype=np.int64)
    ii = rng.integers(0, n, size=draws)
    jj = rng.integers(0, n - 1, size=draws)
    jj += jj >= ii
    coins = rng.random(draws)
    return _one_step_from_forests(tab, nu, size_u, keys, ii, jj, coins, n, v, p, k_max, counts)
