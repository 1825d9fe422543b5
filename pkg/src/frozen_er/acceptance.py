"""The ten acceptance criteria, runnable at full size or as a fast exact subset."""
import math
import time
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .brute_force import one_step_gel_jump
from .fluid_limit import gel_curve, integral_identity_check, ode_residuals, t_pk
from .forest_counts import (
    KernelState,
    britikov_all,
    count_forests_exact,
    count_identity_check,
    gel_jump_distribution,
)
from .special_functions import EULER_GAMMA, borel_convolution_identity, digamma, tree_fn
from .stats_harness import (
    gel_tail_experiment,
    gelation_experiment,
    kernel_equivalence_experiment,
    kernel_states,
    largest_tree_experiment,
    sampler_uniformity_experiment,
    trajectory_experiment,
    tree_count_poisson_experiment,
)

QUICK = (1, 2, 3, 4, 9)


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self):
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] criterion {self.number:2d} {self.title}: {self.detail} ({self.seconds:.1f}s)"


def _combine(parts):
    return all(ok for ok, _ in parts), "; ".join(msg for _, msg in parts)


def exact_identities(full=True, seed=0):
    parts = []
    ok = all(lhs == rhs for lhs, rhs in map(borel_convolution_identity, range(2, 61)))
    parts.append((ok, "convolution identity exact for k <= 60"))
    err = max(abs(tree_fn(th * math.exp(-th)) - (th - th * th / 2)) for th in np.linspace(0.1, 1.0, 10))
    parts.append((err <= 1e-10, f"T(theta e^-theta) max err {err:.1e}"))
    e1 = abs(digamma(1) + EULER_GAMMA)
    e2 = abs(digamma(2) + EULER_GAMMA - 1)
    parts.append((max(e1, e2) <= 1e-10, f"digamma errs {e1:.1e},{e2:.1e}"))
    cay = all(count_forests_exact(n, n - 1) == n ** (n - 2) for n in range(1, 13))
    parts.append((count_forests_exact(4, 2) == 15 and cay, "#W(4,2)=15 and Cayley for N <= 12"))
    worst = 0.0
    for n in range(2, 31):
        for m in range(0, n):
            for th in (0.3, 0.6, 1.0):
                worst = max(worst, count_identity_check(n, m, th))
    parts.append((worst <= 1e-8, f"walk identity max rel dev {worst:.1e} for N <= 30"))
    return _combine(parts)


def fluid_numerics(full=True, seed=0):
    parts = []
    t = np.linspace(0.51, 5.0, 450)
    worst = 0.0
    for p in (0.3, 0.5, 1.0):
        res = ode_residuals(gel_curve(p), t)
        worst = max(worst, *(float(r.max()) for r in res))
    parts.append((worst <= 1e-5, f"ODE residual max {worst:.1e}"))
    g = 0.5
    for _ in range(2000):
        g = 1 - math.exp(-2 * g)
    dev = abs(gel_curve(1.0).g(1.0) - g)
    parts.append((dev <= 1e-8, f"g_1(1) vs fixed point {dev:.1e}"))
    ident = max(abs(lhs - rhs) for lhs, rhs in (integral_identity_check(p) for p in (0.25, 0.5, 0.75)))
    parts.append((ident <= 1e-5, f"integral identity max dev {ident:.1e}"))
    h = 1e-4
    rel = 0.0
    for p in (0.3, 0.5, 1.0):
        c = gel_curve(p)
        slope = (c.g(0.5 + h) - c.g(0.5)) / h
        rel = max(rel, abs(slope / (2 * (1 + p)) - 1))
    parts.append((rel <= 0.01, f"right derivative at 1/2 rel dev {rel:.1e}"))
    mass = max(abs(sum(k * t_pk(gel_curve(p), k, 2.0) for k in range(1, 200)) - (1 - gel_curve(p).g(2.0)))
               for p in (0.3, 1.0))
    parts.append((mass <= 1e-6, f"tree mass sum dev {mass:.1e}"))
    return _combine(parts)


def kernel_exactness(full=True, seed=0):
    tv = Fraction(0)
    states = list(kernel_states(8))
    for p in (Fraction(1, 2), Fraction(1, 3), Fraction(1)):
        for n, v, e in states:
            law = gel_jump_distribution(p, KernelState(n, v, e, n - v))
            brute = one_step_gel_jump(p, n, v, e)
            keys = set(law) | set(brute)
            tv = max(tv, sum(abs(law.get(k, 0) - brute.get(k, 0)) for k in keys) / 2)
    draws = 10**6 if full else 2 * 10**4
    rep = kernel_equivalence_experiment(8, draws=draws, seed=seed)
    return _combine([
        (tv <= Fraction(1, 10**12), f"exact TV over {len(states)} states x 3 p = {float(tv):.1e}"),
        (rep.verdict, f"{draws} draws/state: {rep.criterion}"),
    ])


def sampler_uniformity(full=True, seed=0):
    samples = 300000 if full else 30000
    parts = []
    for i, (n, m) in enumerate(((4, 2), (5, 3))):
        rep = sampler_uniformity_experiment(n, m, samples, seed=seed + i)
        parts.append((rep.verdict, rep.criterion))
    return _combine(parts)


def trajectory_limit(full=True, seed=0):
    n, reps = (10**5, 20) if full else (10**4, 10)
    parts = []
    for i, p in enumerate((0.5, 1.0)):
        rep = trajectory_experiment(p, n, reps, horizon=3.0, seed=seed + i, tol=0.02, tree_tol=0.05)
        parts.append((rep.verdict, f"p={p}: {rep.criterion}"))
    return _combine(parts)


def gelation_gumbel(full=True, seed=0):
    n, reps = (10**5, 500) if full else (10**4, 200)
    parts = []
    for i, (p, k) in enumerate(((1.0, 1), (0.5, 1), (0.5, 2))):
        rep = gelation_experiment(p, n, reps, k=k, seed=seed + i, slack=0.03)
        parts.append((rep.verdict, f"(p,k)=({p},{k}): {rep.criterion}"))
    return _combine(parts)


def poisson_threshold(full=True, seed=0):
    n, reps = (10**5, 2000) if full else (10**4, 500)
    parts = []
    for i, p in enumerate((0.5, 1.0)):
        rep = tree_count_poisson_experiment(p, n, k=1, replicas=reps, seed=seed + i)
        parts.append((rep.verdict, f"p={p}: {rep.criterion}"))
    return _combine(parts)


def largest_tree(full=True, seed=0):
    n, reps = (10**5, 50) if full else (10**4, 20)
    parts = []
    for i, t in enumerate((0.25, 1.5)):
        rep = largest_tree_experiment(0.5, n, t, replicas=reps, seed=seed + i)
        parts.append((rep.verdict, f"t={t}: {rep.criterion}"))
    return _combine(parts)


def britikov_regimes(full=True, seed=0):
    n = 300
    parts = []
    for m, regime, tol in ((60, "subcritical", 0.05), (150, "near-critical", 0.10), (230, "supercritical", 0.10)):
        exact = math.log(count_forests_exact(n, m))
        rel = abs(britikov_all(n, m)[regime] - exact) / exact
        parts.append((rel <= tol, f"M={m} {regime} rel {rel:.1e}"))
    return _combine(parts)


def gel_tail(full=True, seed=0):
    reps = 200 if full else 50
    parts = []
    for i, p in enumerate((0.3, 1.0)):
        rep = gel_tail_experiment(p, 10**4, replicas=reps, seed=seed + i)
        parts.append((rep.verdict, f"p={p}: max excess {rep.stats['max_excess']:.2e}"))
    return _combine(parts)


CRITERIA = {
    1: ("exact identities", exact_identities),
    2: ("fluid-limit numerics", fluid_numerics),
    3: ("kernel exactness", kernel_exactness),
    4: ("forest sampler uniformity", sampler_uniformity),
    5: ("trajectory fluid limit", trajectory_limit),
    6: ("gelation Gumbel law", gelation_gumbel),
    7: ("Poisson limit at threshold", poisson_threshold),
    8: ("largest-tree law", largest_tree),
    9: ("forest count regimes", britikov_regimes),
    10: ("gel tail bound", gel_tail),
}


def run_criterion(number, full=True, seed=0):
    title, fn = CRITERIA[number]
    t0 = time.perf_counter()
    passed, detail = fn(full=full, seed=seed)
    return CriterionResult(number, title, bool(passed), detail, time.perf_counter() - t0)


def run_acceptance(full=False, seed=0, numbers=None, echo=None):
    numbers = numbers or (tuple(CRITERIA) if full else QUICK)
    out = []
    for k in numbers:
        res = run_criterion(k, full=full, seed=seed)
        if echo:
            echo(res.line())
        out.append(res)
    return out
