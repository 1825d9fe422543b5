"""Monte-Carlo experiments that confront the simulator with the limit laws."""
import csv
import io
import json
import math
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import stats

from . import __version__
from ._accel import worker_count
from .errors import DomainError
from .fluid_limit import (
    d_p,
    e_p,
    gel_curve,
    largest_tree_constant,
    log_cayley_over_factorial,
    r_p,
    slowdown_constant,
    t_pk,
    threshold_time,
)
from .forest_counts import KernelState, gel_jump_distribution
from .simulator import (
    GraphState,
    RunConfig,
    _advance,
    _draw_block,
    one_step_gel_jumps,
    replica_rngs,
    run,
)

ALPHA = 0.001


@dataclass
class ExperimentReport:
    name: str
    config: dict
    seed: int
    replicas: list = field(default_factory=list)
    stats: dict = field(default_factory=dict)
    verdict: bool = False
    criterion: str = ""
    wall_seconds: float = 0.0

    def to_json(self):
        return {
            "version": __version__,
            "name": self.name,
            "seed": self.seed,
            "config": self.config,
            "stats": _plain(self.stats),
            "verdict": bool(self.verdict),
            "criterion": self.criterion,
            "n_replicas": len(self.replicas),
            "wall_seconds": self.wall_seconds,
        }

    def replicas_csv(self):
        if not self.replicas:
            return ""
        keys = list(self.replicas[0].keys())
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
        w.writeheader()
        for row in self.replicas:
            w.writerow(_plain(row))
        return buf.getvalue()

    def summary_line(self):
        tag = "PASS" if self.verdict else "FAIL"
        return f"[{tag}] {self.name}: {self.criterion}"


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Fraction):
        return float(obj)
    return obj


def _map_replicas(fn, seed, count):
    rngs = replica_rngs(seed, count)
    workers = min(worker_count(), count)
    if workers <= 1:
        return [fn(r) for r in rngs]
    with ThreadPoolExecutor(workers) as pool:
        return list(pool.map(fn, rngs))


def _finish(report, t0):
    report.wall_seconds = time.perf_counter() - t0
    return report


def _chi_square(observed, expected_probs, min_expected=5.0):
    """Chi-square goodness of fit; bins with expectation below min_expected are pooled."""
    obs = np.asarray(observed, dtype=float)
    probs = np.asarray(expected_probs, dtype=float)
    exp = probs * obs.sum()
    if np.any((exp <= 0) & (obs > 0)):
        return math.inf, 0.0, 0
    keep = exp > 0
    obs, exp = obs[keep], exp[keep]
    big = exp >= min_expected
    if not big.all():
        obs = np.append(obs[big], obs[~big].sum())
        exp = np.append(exp[big], exp[~big].sum())
        if exp[-1] < min_expected and len(exp) > 1:
            obs = np.append(obs[:-2], obs[-2:].sum())
            exp = np.append(exp[:-2], exp[-2:].sum())
    if len(obs) < 2:
        return 0.0, 1.0, 0
    stat, pval = stats.chisquare(obs, exp * obs.sum() / exp.sum())
    return float(stat), float(pval), len(obs) - 1


def gumbel_cdf(x):
    return np.exp(-np.exp(-np.asarray(x, dtype=float)))


def ks_critical(n_samples, alpha=ALPHA):
    return float(stats.kstwo.ppf(1.0 - alpha, n_samples))


# --- trajectory --------------------------------------------------------------


def trajectory_experiment(p, n, replicas, horizon=3.0, seed=0, k_max=10, grid=301, tol=None, tree_tol=None):
    """Sup-norm deviations of the rescaled counters from their fluid limits on [0, horizon]."""
    t0 = time.perf_counter()
    curve = gel_curve(p)
    tol = 5.0 * n ** -0.25 if tol is None else tol
    tree_tol = tol if tree_tol is None else tree_tol
    stop = int(math.floor(n * horizon))
    cfg = RunConfig(n=n, p=p, seed=seed, grid=grid if stop > 0 else 1, k_max=k_max,
                    horizon=horizon, stop_step=stop)

    def one(rng):
        rec = run(cfg, rng)
        tr = rec.trajectory
        t = tr[:, 0] / n
        g_emp, d_emp, v_emp, e_emp = tr[:, 1] / n, tr[:, 2] / n, tr[:, 3], tr[:, 4] / n
        dev_g = np.abs(g_emp - curve.g(t))
        dev_d = np.abs(d_emp - d_p(curve, t))
        dev_e = np.abs(e_emp - e_p(curve, t))
        pos = v_emp > 0
        ratio = np.where(pos, tr[:, 4] / np.where(pos, v_emp, 1.0), 0.0)
        dev_r = np.where(pos, np.abs(ratio - r_p(curve, t)), 0.0)
        trees = np.zeros_like(t)
        for k in range(1, k_max + 1):
            trees += np.abs(k * tr[:, 4 + k] / n - k * t_pk(curve, k, t))
        return {
            "sup_g": float(dev_g.max()),
            "sup_d": float(dev_d.max()),
            "sup_e": float(dev_e.max()),
            "sup_r": float(dev_r.max()),
            "sup_trees": float(trees.max()),
            "sup_gel_fraction": float(g_emp.max()),
            "_trees": trees,
        }

    rows = _map_replicas(one, seed, replicas)
    pointwise = np.median(np.array([r.pop("_trees") for r in rows]), axis=0)
    med = {key: float(np.median([r[key] for r in rows])) for key in ("sup_g", "sup_d", "sup_e", "sup_r", "sup_trees")}
    med["pointwise_median_trees_max"] = float(pointwise.max()) if pointwise.size else 0.0
    ok = max(med["sup_g"], med["sup_d"], med["sup_e"]) <= tol and med["pointwise_median_trees_max"] <= tree_tol
    rep = ExperimentReport(
        "trajectory",
        {"p": p, "n": n, "replicas": replicas, "horizon": horizon, "k_max": k_max, "tol": tol, "tree_tol": tree_tol},
        seed,
        rows,
        {"medians": med, "n_replicas": replicas},
        ok,
        f"median sup |G/n-g|,|D/n-d|,|E/n-e| = {med['sup_g']:.4f},{med['sup_d']:.4f},{med['sup_e']:.4f} <= {tol};"
        f" pointwise median tree sum {med['pointwise_median_trees_max']:.4f} <= {tree_tol}",
    )
    return _finish(rep, t0)


# --- total gelation -----------------------------------------------------------


def gelation_statistic(p, k, n, a_kplus):
    """Standardized A^(k+) that converges to a standard Gumbel variable."""
    tk = threshold_time(p, k, n).value
    return 2 * k * p * (a_kplus / n - tk / 2) + k * slowdown_constant(p) - log_cayley_over_factorial(k)


def gelation_experiment(p, n, replicas, k=1, seed=0, slack=0.03):
    t0 = time.perf_counter()
    cfg = RunConfig(n=n, p=p, seed=seed, grid=0, k_max=max(k, 1))

    def one(rng):
        rec = run(cfg, rng)
        return {
            "absorption": rec.absorption,
            "a_k": rec.a_k[k],
            "a_kplus": rec.a_kplus[k],
            "incomplete": rec.incomplete,
        }

    rows = _map_replicas(one, seed, replicas)
    x = np.array([gelation_statistic(p, k, n, r["a_kplus"]) for r in rows])
    for r, xi in zip(rows, x):
        r["standardized"] = float(xi)
    ks = stats.kstest(x, "gumbel_r")
    crit = ks_critical(replicas)
    same = float(np.mean([r["a_k"] == r["a_kplus"] for r in rows]))
    ok = ks.statistic <= crit + slack and not any(r["incomplete"] for r in rows)
    if k >= 2:
        ok = ok and same >= 0.9
    rep = ExperimentReport(
        "gelation",
        {"p": p, "n": n, "replicas": replicas, "k": k, "slack": slack},
        seed,
        rows,
        {
            "ks_statistic": float(ks.statistic),
            "ks_pvalue": float(ks.pvalue),
            "ks_critical": crit,
            "mean": float(x.mean()),
            "gumbel_mean": float(np.euler_gamma),
            "std": float(x.std(ddof=1)),
            "gumbel_std": math.pi / math.sqrt(6),
            "freq_same_last_time": same,
            "n_replicas": replicas,
        },
        ok,
        f"KS {ks.statistic:.4f} <= {crit:.4f}+{slack}; P(A(k+)=A(k)) = {same:.3f}",
    )
    return _finish(rep, t0)


# --- Poisson count at threshold ---------------------------------------------------


def poisson_threshold_lambda(p, k, c=0.0):
    return math.exp(log_cayley_over_factorial(k) - k * p * c - k * slowdown_constant(p))


def tree_count_poisson_experiment(p, n, k=1, c=0.0, replicas=2000, seed=0, mean_tol=0.15):
    t0 = time.perf_counter()
    step = int(math.floor(n * (threshold_time(p, k, n).value + c) / 2))
    lam = poisson_threshold_lambda(p, k, c)
    cfg = RunConfig(n=n, p=p, seed=seed, grid=0, k_max=k, stop_step=step)

    def one(rng):
        rec = run(cfg, rng)
        return {"count": int(rec.state.hist[k]), "step": rec.state.m}

    rows = _map_replicas(one, seed, replicas)
    counts = np.array([r["count"] for r in rows])
    top = max(int(counts.max()), int(stats.poisson.ppf(1 - 1e-9, lam)))
    observed = np.bincount(counts, minlength=top + 1)
    probs = stats.poisson.pmf(np.arange(top + 1), lam)
    probs[-1] += stats.poisson.sf(top, lam)
    chi, pval, dof = _chi_square(observed, probs)
    mean = float(counts.mean())
    ok = pval > ALPHA and abs(mean - lam) <= mean_tol * lam
    rep = ExperimentReport(
        "poisson",
        {"p": p, "n": n, "k": k, "c": c, "replicas": replicas, "step": step},
        seed,
        rows,
        {"lambda": lam, "mean": mean, "variance": float(counts.var(ddof=1)), "chi2": chi,
         "chi2_pvalue": pval, "dof": dof, "n_replicas": replicas},
        ok,
        f"chi2 p = {pval:.4g} > {ALPHA}; mean {mean:.4f} vs lambda {lam:.4f} (tol {mean_tol:.0%})",
    )
    return _finish(rep, t0)


# --- largest and typical trees --------------------------------------------------


def largest_tree_experiment(p, n, t, replicas=50, seed=0, rank=1, rel_tol=0.25):
    if abs(t - 0.5) < 0.05:
        raise DomainError("t lies in the critical guard band |t - 1/2| < 0.05")
    t0 = time.perf_counter()
    curve = gel_curve(p)
    const = largest_tree_constant(t, curve)
    cfg = RunConfig(n=n, p=p, seed=seed, grid=0, stop_step=int(math.floor(n * t)))

    def one(rng):
        rec = run(cfg, rng)
        sizes = rec.state.largest_trees(rank)
        return {"size": sizes[rank - 1], "scaled": sizes[rank - 1] / math.log(n)}

    rows = _map_replicas(one, seed, replicas)
    med = float(np.median([r["scaled"] for r in rows]))
    rel = abs(med - const) / const
    rep = ExperimentReport(
        "largest_tree",
        {"p": p, "n": n, "t": t, "replicas": replicas, "rank": rank, "rel_tol": rel_tol},
        seed,
        rows,
        {"constant": const, "median_scaled": med, "relative_deviation": rel, "n_replicas": replicas},
        rel <= rel_tol,
        f"median size/ln n = {med:.3f} vs constant {const:.3f} (rel dev {rel:.2f} <= {rel_tol})",
    )
    return _finish(rep, t0)


def typical_tree_experiment(p, n, t, replicas=2000, seed=0, kmax=None):
    """Size law of the component of vertex 0 when it is a tree, plus its entrance time into the gel."""
    t0 = time.perf_counter()
    curve = gel_curve(p)
    step = int(math.floor(n * t))
    cfg = RunConfig(n=n, p=p, seed=seed, grid=0, stop_step=step, watch=0)
    rest = RunConfig(n=n, p=p, seed=seed, grid=0, stop_on_watch=True, watch=0)

    def one(rng):
        rec = run(cfg, rng)
        st = rec.state
        frozen = st.is_frozen(0)
        size = 0 if frozen else st.component_size(0)
        rec2 = run(rest, rng, state=st)
        return {"tree_size": size, "entrance": rec2.watch_step / n}

    rows = _map_replicas(one, seed, replicas)
    sizes = np.array([r["tree_size"] for r in rows])
    sizes = sizes[sizes > 0]
    u = 1.0 - curve.g(t)
    kmax = int(kmax or max(sizes.max() if sizes.size else 1, 30))
    ks_ = np.arange(1, kmax + 1)
    probs = np.array([k * t_pk(curve, int(k), t) for k in ks_]) / u if t > 0 else (ks_ == 1).astype(float)
    probs[-1] += max(0.0, 1.0 - probs.sum())
    observed = np.bincount(np.minimum(sizes, kmax), minlength=kmax + 1)[1:]
    chi, pval, dof = _chi_square(observed, probs)
    ent = np.array([r["entrance"] for r in rows])
    ks = stats.kstest(ent, lambda x: curve.g(np.asarray(x, dtype=float)))
    ok = pval > ALPHA and ks.pvalue > ALPHA
    rep = ExperimentReport(
        "typical_tree",
        {"p": p, "n": n, "t": t, "replicas": replicas},
        seed,
        rows,
        {"tree_fraction": float(sizes.size / replicas), "limit_tree_fraction": float(u),
         "chi2": chi, "chi2_pvalue": pval, "dof": dof,
         "entrance_ks": float(ks.statistic), "entrance_ks_pvalue": float(ks.pvalue),
         "n_replicas": replicas},
        ok,
        f"size chi2 p = {pval:.4g}, entrance-time KS p = {ks.pvalue:.4g} (> {ALPHA})",
    )
    return _finish(rep, t0)


# --- pinned trees and factorial moments ----------------------------------------


def _pinned_prefactor(n, k, ell, t, p):
    inner = ell * k * (ell * k - 1) / 2 - ell * (k - 1)
    return (
        (-math.expm1(-t / n)) ** (ell * (k - 1))
        * math.exp(-t / n * inner)
        * math.exp(-ell * k * (n - ell * k) / n * p * t)
    )


def pinned_probability(p, n, k, ell, t, replicas, seed=0):
    """Nested Monte-Carlo value of the probability that ell given disjoint trees of
    size k are components at time t. Returns (estimate, standard error).

    The outer expectation runs an (n - ell k)-vertex model whose pairs ring at
    the same per-pair rate 1/n as in the full model."""
    if ell * k > n:
        raise DomainError("need ell k <= n")
    pre = _pinned_prefactor(n, k, ell, t, p)
    rest = n - ell * k
    if rest < 2 or p == 1.0 or t == 0:
        return pre, 0.0
    cfg = RunConfig(n=rest, p=p, seed=seed, mode="poissonized", grid=0, strict_ppp=True,
                    stop_time=t, pair_rate=1.0 / n)
    factor = ell * k * rest / n * (1 - p)

    def one(rng):
        rec = run(cfg, rng)
        integral = t - rec.gel_area / rest
        return math.exp(-factor * integral)

    vals = np.array(_map_replicas(one, seed, replicas))
    return pre * float(vals.mean()), pre * float(vals.std(ddof=1) / math.sqrt(replicas))


def pinned_sets(n, k, ell):
    """Number of ways to place ell disjoint labeled trees of size k among n vertices."""
    return math.factorial(n) // (math.factorial(n - ell * k) * math.factorial(k) ** ell * math.factorial(ell)) * (
        (k ** (k - 2) if k >= 2 else 1) ** ell
    )


def _tree_counts_poissonized(p, n, k, t, replicas, seed):
    cfg = RunConfig(n=n, p=p, seed=seed, mode="poissonized", grid=0, strict_ppp=True, stop_time=t, k_max=max(k, 1))

    def one(rng):
        return int(run(cfg, rng).state.hist[k])

    return np.array(_map_replicas(one, seed, replicas))


def pnk_formula_experiment(p, n, k, ell, t, replicas=20000, inner_replicas=2000, seed=0):
    t0 = time.perf_counter()
    counts = _tree_counts_poissonized(p, n, k, t, replicas, seed)
    combos = np.array([math.comb(int(c), ell) for c in counts], dtype=float)
    ways = pinned_sets(n, k, ell)
    lhs = float(combos.mean() / ways)
    lhs_se = float(combos.std(ddof=1) / math.sqrt(replicas) / ways)
    rhs, rhs_se = pinned_probability(p, n, k, ell, t, inner_replicas, seed + 1)
    se = math.hypot(lhs_se, rhs_se)
    z = (lhs - rhs) / se if se > 0 else (0.0 if lhs == rhs else math.inf)
    rep = ExperimentReport(
        "pnk",
        {"p": p, "n": n, "k": k, "ell": ell, "t": t, "replicas": replicas, "inner_replicas": inner_replicas},
        seed,
        [{"count": int(c)} for c in counts],
        {"lhs": lhs, "lhs_se": lhs_se, "rhs": rhs, "rhs_se": rhs_se, "z": z, "n_replicas": replicas},
        abs(z) <= 3.0,
        f"|z| = {abs(z):.2f} <= 3 (lhs {lhs:.4g}, rhs {rhs:.4g})",
    )
    return _finish(rep, t0)


def _partitions(j, largest):
    if j == 0:
        yield ()
        return
    for first in range(min(j, largest), 0, -1):
        for rest in _partitions(j - first, first):
            yield (first,) + rest


def factorial_moment_coefficients(n, k, j):
    """Map ell -> exact coefficient multiplying the pinned probability for ell trees
    in the j-th factorial moment of k N^(k)."""
    out = {}
    cay = k ** (k - 2) if k >= 2 else 1
    for parts in _partitions(j, k):
        ell = len(parts)
        if ell * k > n:
            continue
        mult = Counter(parts)
        coef = Fraction(math.factorial(n), math.factorial(n - k * ell))
        coef *= Fraction(math.factorial(j), math.prod(math.factorial(x) for x in parts))
        coef /= math.prod(math.factorial(m) for m in mult.values())
        coef /= math.prod(math.factorial(k - x) for x in parts)
        coef *= cay ** ell
        out[ell] = out.get(ell, 0) + coef
    return out


def factorial_moment_formula(p, n, k, j, t, inner_replicas, seed=0):
    """Partition-sum value of E[prod_{i<j} (k N^(k)(t) - i)] and its standard error."""
    total, var = 0.0, 0.0
    for ell, coef in sorted(factorial_moment_coefficients(n, k, j).items()):
        pr, se = pinned_probability(p, n, k, ell, t, inner_replicas, seed + ell)
        total += float(coef) * pr
        var += (float(coef) * se) ** 2
    return total, math.sqrt(var)


def factorial_moment_experiment(p, n, k, j, t, replicas=20000, inner_replicas=2000, seed=0):
    t0 = time.perf_counter()
    counts = _tree_counts_poissonized(p, n, k, t, replicas, seed)
    kn = k * counts.astype(float)
    prod = np.ones_like(kn)
    for i in range(j):
        prod *= kn - i
    emp = float(prod.mean())
    emp_se = float(prod.std(ddof=1) / math.sqrt(replicas))
    formula, f_se = factorial_moment_formula(p, n, k, j, t, inner_replicas, seed + 100)
    se = math.hypot(emp_se, f_se)
    z = (emp - formula) / se if se > 0 else (0.0 if emp == formula else math.inf)
    rep = ExperimentReport(
        "factorial_moment",
        {"p": p, "n": n, "k": k, "j": j, "t": t, "replicas": replicas, "inner_replicas": inner_replicas},
        seed,
        [{"count": int(c)} for c in counts],
        {"empirical": emp, "empirical_se": emp_se, "formula": formula, "formula_se": f_se, "z": z,
         "n_replicas": replicas},
        abs(z) <= 3.0,
        f"|z| = {abs(z):.2f} <= 3 (empirical {emp:.4g}, formula {formula:.4g})",
    )
    return _finish(rep, t0)


# --- expectation scaling at the threshold ---------------------------------------


def expectation_bound_experiment(p, k, k_prime, c=0.0, ns=(1000, 10000, 100000), replicas=200, seed=0,
                                 slope_tol=0.3):
    t0 = time.perf_counter()
    means, rows = [], []
    for idx, n in enumerate(ns):
        t = threshold_time(p, k, n).value + c
        cfg = RunConfig(n=n, p=p, seed=seed, mode="poissonized", grid=0, k_max=max(k_prime, 1), stop_time=t)

        def one(rng, cfg=cfg):
            return int(run(cfg, rng).state.hist[k_prime])

        vals = np.array(_map_replicas(one, seed + idx, replicas))
        means.append(float(vals.mean()))
        rows.append({"n": n, "mean": float(vals.mean()), "se": float(vals.std(ddof=1) / math.sqrt(replicas))})
    expected = 1.0 - k_prime / k
    x = np.log([n / math.log(n) for n in ns])
    if all(m > 0 for m in means):
        slope = float(np.polyfit(x, np.log(means), 1)[0])
    else:
        slope = math.nan
    if k_prime > k and not math.isfinite(slope):
        ok = means[-1] < 0.1
    else:
        ok = math.isfinite(slope) and abs(slope - expected) <= slope_tol
    rep = ExperimentReport(
        "expectation_bound",
        {"p": p, "k": k, "k_prime": k_prime, "c": c, "ns": list(ns), "replicas": replicas},
        seed,
        rows,
        {"means": means, "slope": slope, "expected_slope": expected, "n_replicas": replicas},
        ok,
        f"log-log slope {slope:.3f} vs {expected:.3f} (tol {slope_tol}); means {['%.3g' % m for m in means]}",
    )
    return _finish(rep, t0)


# --- gel tail after half gelation -------------------------------------------------


def gel_tail_experiment(p, n, replicas=200, t_grid=None, seed=0):
    t0 = time.perf_counter()
    t_grid = np.linspace(0.0, 20.0, 41) if t_grid is None else np.asarray(t_grid, dtype=float)
    cfg = RunConfig(n=n, p=p, seed=seed, mode="poissonized", grid=0, log_gel=True)

    def one(rng):
        rec = run(cfg, rng)
        times, gels = rec.gel_log[:, 0], rec.gel_log[:, 1]
        idx = int(np.searchsorted(gels, n / 2.0, side="left"))
        sigma = times[idx]
        pos = np.searchsorted(times, sigma + t_grid, side="right") - 1
        g_at = gels[np.maximum(pos, 0)]
        return 1.0 - g_at / n

    vals = np.array(_map_replicas(one, seed, replicas))
    mean = vals.mean(axis=0)
    se = vals.std(axis=0, ddof=1) / math.sqrt(replicas)
    bound = np.exp(-p * t_grid / 2)
    ok = bool(np.all(mean <= bound + 3 * se))
    rep = ExperimentReport(
        "gel_tail",
        {"p": p, "n": n, "replicas": replicas, "t_grid": t_grid.tolist()},
        seed,
        [{"t": float(t), "mean": float(m), "se": float(s), "bound": float(b)}
         for t, m, s, b in zip(t_grid, mean, se, bound)],
        {"max_excess": float(np.max(mean - bound - 3 * se)), "n_replicas": replicas},
        ok,
        f"mean remaining mass <= exp(-pt/2) + 3 SE at all {len(t_grid)} grid times",
    )
    return _finish(rep, t0)


# --- de-Poissonization ---------------------------------------------------------


def poisson_deviation_prob(lam, a):
    """P(|Y - lam| >= a) for Y ~ Poisson(lam), exactly."""
    upper = stats.poisson.sf(math.ceil(lam + a) - 1, lam)
    low_edge = math.floor(lam - a)
    lower = stats.poisson.cdf(low_edge, lam) if low_edge >= 0 else 0.0
    return float(upper + lower)


def poisson_cubic_bound_holds(lam, a):
    return poisson_deviation_prob(lam, a) <= lam / a ** 3


def discrete_vs_poisson_experiment(p, n, t, replicas=400, seed=0):
    """Two-sample KS between G at Poissonized time t and G after Poisson((n-1)t/2) discrete steps."""
    t0 = time.perf_counter()
    cont = RunConfig(n=n, p=p, seed=seed, mode="poissonized", grid=0, stop_time=t)

    def one_cont(rng):
        return run(cont, rng).state.g

    def one_disc(rng):
        steps = int(rng.poisson((n - 1) * t / 2))
        cfg = RunConfig(n=n, p=p, seed=seed, grid=0, stop_step=steps)
        return run(cfg, rng).state.g

    a = np.array(_map_replicas(one_cont, seed, replicas))
    b = np.array(_map_replicas(one_disc, seed + 1, replicas))
    ks = stats.ks_2samp(a, b)
    rep = ExperimentReport(
        "discrete_vs_poisson",
        {"p": p, "n": n, "t": t, "replicas": replicas},
        seed,
        [{"poissonized": int(x), "discrete": int(y)} for x, y in zip(a, b)],
        {"ks": float(ks.statistic), "pvalue": float(ks.pvalue), "n_replicas": replicas},
        ks.pvalue > ALPHA,
        f"two-sample KS p = {ks.pvalue:.4g} > {ALPHA}",
    )
    return _finish(rep, t0)


# --- exact kernel and free forest ----------------------------------------------


def kernel_states(n_max):
    """Every (n, v, e) with 2 <= n <= n_max, 1 <= v <= n, 0 <= e <= v - 1."""
    for n in range(2, n_max + 1):
        for v in range(1, n + 1):
            for e in range(0, v):
                yield n, v, e


def kernel_equivalence_experiment(n_max=8, draws=10**6, p=Fraction(1, 2), seed=0):
    """Simulated one-step Delta G frequencies against the exact kernel for every small state."""
    t0 = time.perf_counter()
    rows = []
    states = list(kernel_states(n_max))
    rngs = replica_rngs(seed, len(states))
    for (n, v, e), rng in zip(states, rngs):
        law = gel_jump_distribution(p, KernelState(n, v, e, n - v))
        counts = one_step_gel_jumps(n, v, e, float(p), draws, rng)
        probs = np.array([float(law.get(k, 0)) for k in range(n + 1)])
        chi, pval, dof = _chi_square(counts, probs)
        rows.append({"n": n, "v": v, "e": e, "chi2": chi, "pvalue": pval, "dof": dof})
    worst = min(r["pvalue"] for r in rows)
    rep = ExperimentReport(
        "kernel_equivalence",
        {"n_max": n_max, "draws": draws, "p": float(p)},
        seed,
        rows,
        {"n_states": len(rows), "min_pvalue": worst,
         "failures": [r for r in rows if r["pvalue"] <= ALPHA], "draws_per_state": draws},
        worst > ALPHA,
        f"{len(rows)} states, min chi2 p = {worst:.4g} > {ALPHA}",
    )
    return _finish(rep, t0)


def free_forest_experiment(n=7, m=5, p=0.5, replicas=200000, seed=0, min_hits=500):
    """Chi-square uniformity of the forest part over W(V, E) in every well-populated (V, E) cell."""
    from .brute_force import forests_with_edges

    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    cells = {}
    empty_grid = np.zeros(0)
    empty_traj = np.zeros((0, 0))
    batch = 1 << 12
    done = 0
    while done < replicas:
        ii, jj, coins, _ = _draw_block(rng, n, batch * m, False, 1.0)
        for r in range(min(batch, replicas - done)):
            st = GraphState(n, p, k_max=1, keep_edges=True)
            _advance(st.parent, st.csize, st.frozen, st.hist, st.cnt, st.ft, st.ge, st.last, st.tlast,
                     st.edges, empty_grid, empty_traj, np.zeros(0), np.zeros(0, dtype=np.int64),
                     ii[r * m:(r + 1) * m], jj[r * m:(r + 1) * m], coins[r * m:(r + 1) * m], np.zeros(0),
                     0, p, False, False, 1, 0, m, np.inf, False)
            vset = [x for x in range(n) if not st.is_frozen(x)]
            forest = st.forest_edges()
            relabel = {x: i for i, x in enumerate(vset)}
            key = tuple(sorted(tuple(sorted((relabel[a], relabel[b]))) for a, b in forest))
            cells.setdefault((len(vset), len(forest)), Counter())[key] += 1
        done += batch
    rows = []
    for (v, e), counter in sorted(cells.items()):
        hits = sum(counter.values())
        support = forests_with_edges(v, e)
        if hits < max(min_hits, 5 * len(support)):
            continue
        obs = np.array([counter.get(f, 0) for f in support])
        if sum(obs) != hits:
            raise AssertionError("forest part outside the enumerated support")
        chi, pval, dof = _chi_square(obs, np.full(len(support), 1.0 / len(support)))
        rows.append({"v": v, "e": e, "hits": hits, "n_forests": len(support), "chi2": chi, "pvalue": pval})
    worst = min((r["pvalue"] for r in rows), default=0.0)
    rep = ExperimentReport(
        "free_forest",
        {"n": n, "m": m, "p": p, "replicas": replicas, "min_hits": min_hits},
        seed,
        rows,
        {"n_cells_tested": len(rows), "min_pvalue": worst},
        bool(rows) and worst > ALPHA,
        f"{len(rows)} (V,E) cells, min chi2 p = {worst:.4g} > {ALPHA}",
    )
    return _finish(rep, t0)


def sampler_uniformity_experiment(n, m, samples=300000, seed=0):
    """Chi-square uniformity of forest_sampler output over the enumerated W(N, M)."""
    from .brute_force import forests_with_edges
    from .forest_sampler import sample_forest

    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    support = forests_with_edges(n, m)
    index = {f: i for i, f in enumerate(support)}
    counts = np.zeros(len(support), dtype=np.int64)
    for _ in range(samples):
        counts[index[sample_forest(n, m, rng).edge_key()]] += 1
    chi, pval, dof = _chi_square(counts, np.full(len(support), 1.0 / len(support)))
    rep = ExperimentReport(
        "sampler_uniformity",
        {"n": n, "m": m, "samples": samples},
        seed,
        [{"forest": i, "count": int(c)} for i, c in enumerate(counts)],
        {"n_forests": len(support), "chi2": chi, "pvalue": pval, "dof": dof, "n_samples": samples},
        pval > ALPHA,
        f"W({n},{m}) with {len(support)} forests: chi2 p = {pval:.4g} > {ALPHA}",
    )
    return _finish(rep, t0)


EXPERIMENTS = {
    "trajectory": trajectory_experiment,
    "gelation": gelation_experiment,
    "poisson": tree_count_poisson_experiment,
    "largest_tree": largest_tree_experiment,
    "typical_tree": typical_tree_experiment,
    "pnk": pnk_formula_experiment,
    "factorial_moment": factorial_moment_experiment,
    "expectation_bound": expectation_bound_experiment,
    "gel_tail": gel_tail_experiment,
    "discrete_vs_poisson": discrete_vs_poisson_experiment,
    "kernel_equivalence": kernel_equivalence_experiment,
    "free_forest": free_forest_experiment,
    "sampler_uniformity": sampler_uniformity_experiment,
}


def write_report(report, out_dir):
    import os

    os.makedirs(out_dir, exist_ok=True)
    base = os.path.join(out_dir, report.name)
    with open(base + ".json", "w") as fh:
        json.dump(report.to_json(), fh, indent=2)
    with open(base + ".csv", "w") as fh:
        fh.write(report.replicas_csv())
    return base
