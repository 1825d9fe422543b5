import json
import math
import os
import subprocess
import sys
from fractions import Fraction

import numpy as np
import pytest
from scipy import stats

from frozen_er.errors import DomainError
from frozen_er.fluid_limit import gel_curve
from frozen_er.simulator import RunConfig, run
from frozen_er.stats_harness import (
    EXPERIMENTS,
    discrete_vs_poisson_experiment,
    expectation_bound_experiment,
    factorial_moment_coefficients,
    factorial_moment_experiment,
    free_forest_experiment,
    gel_tail_experiment,
    gelation_experiment,
    gelation_statistic,
    gumbel_cdf,
    kernel_equivalence_experiment,
    largest_tree_experiment,
    pinned_probability,
    pinned_sets,
    pnk_formula_experiment,
    poisson_cubic_bound_holds,
    poisson_deviation_prob,
    poisson_threshold_lambda,
    sampler_uniformity_experiment,
    trajectory_experiment,
    tree_count_poisson_experiment,
    typical_tree_experiment,
    write_report,
)


class TestReferenceCurves:
    def test_gumbel_at_zero(self):
        assert abs(float(gumbel_cdf(0.0)) - math.exp(-1)) <= 1e-15

    def test_gumbel_matches_scipy(self):
        x = np.linspace(-3, 6, 50)
        assert np.allclose(gumbel_cdf(x), stats.gumbel_r.cdf(x), atol=1e-15)

    @pytest.mark.parametrize("p,k,want", [(1.0, 1, 1.0), (0.5, 1, math.exp(-1)), (1.0, 2, 0.5)])
    def test_poisson_lambda(self, p, k, want):
        assert abs(poisson_threshold_lambda(p, k, 0.0) - want) <= 1e-10

    def test_lambda_shift(self):
        assert poisson_threshold_lambda(0.5, 2, 1.0) == pytest.approx(0.5 * math.exp(-1) * math.exp(-2), rel=1e-10)

    def test_gelation_statistic_centering(self):
        # with A^(1+) at exactly n t^(1)/2 the statistic is k (psi(1/p) + gamma) - ln(k^(k-2)/k!)
        from frozen_er.fluid_limit import threshold_time

        n = 10**5
        a = n * threshold_time(1.0, 1, n).value / 2
        assert abs(gelation_statistic(1.0, 1, n, a)) <= 1e-10


class TestPoissonConcentration:
    @pytest.mark.parametrize("lam", [10.0, 1000.0])
    def test_cubic_bound(self, lam):
        assert poisson_cubic_bound_holds(lam, lam ** 0.8)

    def test_deviation_prob_exact(self):
        lam, a = 10.0, 4.0
        k = np.arange(0, 200)
        pmf = stats.poisson.pmf(k, lam)
        brute = float(pmf[np.abs(k - lam) >= a].sum())
        assert abs(poisson_deviation_prob(lam, a) - brute) <= 1e-14


class TestTrajectory:
    def test_zero_horizon(self):
        rep = trajectory_experiment(1.0, 1000, 3, horizon=0.0)
        med = rep.stats["medians"]
        assert all(med[k] == 0.0 for k in ("sup_g", "sup_d", "sup_e", "sup_r", "sup_trees"))

    def test_default_tolerance(self):
        rep = trajectory_experiment(1.0, 10**4, 5, seed=1)
        assert rep.config["tol"] == pytest.approx(0.5)
        assert rep.verdict

    def test_subcritical_gel_is_small(self):
        n = 10**5
        rec = run(RunConfig(n=n, p=0.5, seed=2, grid=200, horizon=0.45))
        assert rec.trajectory[:, 1].max() / n <= 0.01

    def test_tracks_fluid_limit(self):
        rep = trajectory_experiment(0.5, 10**5, 3, seed=3)
        med = rep.stats["medians"]
        # the gel and edge errors are dominated by the n^(-1/3) critical window
        assert med["sup_d"] <= 0.01 and med["pointwise_median_trees_max"] <= 0.05
        assert med["sup_g"] <= 0.06 and med["sup_e"] <= 0.06


class TestGelation:
    def test_erdos_renyi_gumbel(self):
        rep = gelation_experiment(1.0, 10**4, 200, k=1, seed=4)
        assert rep.verdict and rep.stats["n_replicas"] == 200

    def test_same_last_time_for_pairs(self):
        rep = gelation_experiment(0.5, 10**4, 200, k=2, seed=5)
        assert rep.stats["freq_same_last_time"] >= 0.9


class TestTreeCounts:
    def test_poisson_at_threshold(self):
        rep = tree_count_poisson_experiment(0.5, 10**4, k=1, replicas=1000, seed=6)
        assert rep.stats["chi2_pvalue"] > 0.001
        assert rep.stats["lambda"] == pytest.approx(math.exp(-1))

    def test_expectation_same_size(self):
        rep = expectation_bound_experiment(1.0, 1, 1, ns=(1000, 10000), replicas=200, seed=7)
        assert max(rep.stats["means"]) <= 3 * poisson_threshold_lambda(1.0, 1)

    def test_expectation_growth(self):
        rep = expectation_bound_experiment(1.0, 2, 1, replicas=200, seed=8)
        assert rep.verdict, rep.criterion

    def test_expectation_decay(self):
        rep = expectation_bound_experiment(1.0, 1, 2, ns=(10**3, 10**4, 10**5), replicas=200, seed=9)
        assert rep.stats["means"][-1] < 0.1


class TestTrees:
    def test_guard_band(self):
        with pytest.raises(DomainError):
            largest_tree_experiment(0.5, 1000, 0.52)

    def test_rank_does_not_change_the_constant(self):
        a = largest_tree_experiment(0.5, 2000, 1.5, replicas=3, rank=1)
        b = largest_tree_experiment(0.5, 2000, 1.5, replicas=3, rank=3)
        assert a.stats["constant"] == b.stats["constant"]
        assert all(x["size"] >= y["size"] for x, y in zip(a.replicas, b.replicas))

    @pytest.mark.parametrize("t", [0.25, 1.0])
    def test_typical_tree(self, t):
        rep = typical_tree_experiment(0.5, 10**4, t, replicas=1500, seed=10)
        assert rep.verdict, rep.criterion

    def test_typical_tree_at_zero(self):
        rep = typical_tree_experiment(1.0, 2000, 0.0, replicas=50, seed=11)
        assert all(r["tree_size"] == 1 for r in rep.replicas)


class TestPinnedTrees:
    def test_zero_time(self):
        assert pinned_probability(0.5, 50, 1, 1, 0.0, 10) == (1.0, 0.0)

    def test_singletons_early(self):
        n, t = 100, 0.05
        est, se = pinned_probability(0.5, n, 1, 1, t, 200, seed=12)
        assert abs(est - math.exp(-t)) <= 3 * se + 2 * t / n

    def test_pinned_sets(self):
        # three labeled paths on each 3-subset
        assert pinned_sets(5, 3, 1) == math.comb(5, 3) * 3
        assert pinned_sets(4, 2, 2) == 3
        assert pinned_sets(6, 1, 2) == 15

    def test_formula_pairs(self):
        rep = pnk_formula_experiment(0.5, 100, 2, 1, 2.0, replicas=6000, inner_replicas=600, seed=13)
        assert rep.verdict, rep.criterion

    def test_factorial_coefficients_first_moment(self):
        n, k = 40, 3
        coef = factorial_moment_coefficients(n, k, 1)
        assert coef == {1: Fraction(n * math.comb(n - 1, k - 1) * k ** (k - 2))}

    def test_factorial_coefficients_beyond_n(self):
        assert factorial_moment_coefficients(3, 1, 4) == {}

    def test_factorial_coefficients_brute_force(self):
        # E[(kN)(kN-1)] for k = 2 on n = 4: ordered pairs of vertices in size-2 trees
        coef = factorial_moment_coefficients(4, 2, 2)
        # same tree: 2 ordered pairs per tree, 6 trees; different trees: 8 ordered pairs per pairing, 3 pairings
        assert coef == {1: Fraction(12), 2: Fraction(24)}

    def test_factorial_moment(self):
        rep = factorial_moment_experiment(0.5, 40, 2, 2, 1.0, replicas=6000, inner_replicas=600, seed=14)
        assert rep.verdict, rep.criterion


class TestTimeChanges:
    def test_gel_tail(self):
        rep = gel_tail_experiment(1.0, 10**4, replicas=60, seed=15)
        assert rep.verdict
        first = rep.replicas[0]
        assert first["t"] == 0.0 and first["mean"] <= 0.5 + 1e-12

    def test_discrete_matches_poissonized(self):
        rep = discrete_vs_poisson_experiment(0.7, 10**4, 1.6, replicas=300, seed=16)
        assert rep.verdict, rep.criterion


class TestSmallExact:
    def test_kernel_equivalence(self):
        rep = kernel_equivalence_experiment(5, draws=20000, seed=17)
        assert rep.verdict and rep.stats["n_states"] == sum(v for n in range(2, 6) for v in range(1, n + 1))

    def test_free_forest(self):
        rep = free_forest_experiment(n=7, m=5, replicas=100000, seed=18)
        assert rep.verdict and rep.stats["n_cells_tested"] >= 3

    def test_sampler_uniformity(self):
        rep = sampler_uniformity_experiment(4, 2, samples=20000, seed=19)
        assert rep.verdict


class TestReports:
    def test_reproducible(self):
        a = gelation_experiment(1.0, 3000, 20, seed=21)
        b = gelation_experiment(1.0, 3000, 20, seed=21)
        assert a.to_json()["stats"] == b.to_json()["stats"] and a.replicas == b.replicas

    def test_thread_count_does_not_matter(self):
        code = ("import json; from frozen_er.stats_harness import gelation_experiment as g;"
                "print(json.dumps(g(1.0, 2000, 12, seed=3).to_json()['stats']))")
        outs = []
        for threads in ("1", "4"):
            env = dict(os.environ, FROZEN_ER_THREADS=threads)
            res = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
            outs.append(res.stdout)
        assert outs[0] == outs[1]

    def test_write_report(self, tmp_path):
        rep = gelation_experiment(1.0, 2000, 10, seed=1)
        base = write_report(rep, str(tmp_path))
        doc = json.loads(open(base + ".json").read())
        assert doc["name"] == "gelation" and doc["seed"] == 1 and doc["n_replicas"] == 10
        rows = open(base + ".csv").read().splitlines()
        assert len(rows) == 11 and rows[0].startswith("absorption")
        assert rep.summary_line().startswith("[PASS]") == rep.verdict

    def test_registry(self):
        assert {"trajectory", "gelation", "poisson", "largest_tree", "typical_tree", "pnk", "factorial_moment",
                "expectation_bound", "gel_tail"} <= set(EXPERIMENTS)

    def test_curve_is_shared(self):
        assert gel_curve(0.5) is gel_curve(0.5)
