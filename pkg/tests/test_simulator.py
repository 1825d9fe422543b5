import json
import math
import os
import subprocess
import sys
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from frozen_er.errors import DomainError
from frozen_er.fluid_limit import gel_curve
from frozen_er.simulator import (
    GraphState,
    RunConfig,
    replica_rngs,
    run,
    step_discrete,
    step_poissonized,
)


def three_vertex_absorption_mean(p):
    """E[A] for n = 3 by first-step analysis over the four reachable shapes."""
    p = Fraction(p)
    # step 1 builds a pair tree; step 2 freezes it (1/3) or builds the path (2/3),
    # which freezes at step 3; a lone singleton is glued after a geometric wait
    glued = 1 / (Fraction(2, 3) * p)
    return Fraction(1, 3) * (2 + glued) + Fraction(2, 3) * 3


def three_vertex_absorption_law(p, top):
    """P(A = a) for a < top by pushing mass through the same chain."""
    law = np.zeros(top)
    q = 2 * p / 3
    law[3] += 2 / 3
    for j in range(1, top - 2):
        law[2 + j] += (1 / 3) * q * (1 - q) ** (j - 1)
    return law


def frequencies(make_state, stepper, trials, rng):
    out = {}
    for _ in range(trials):
        o = stepper(make_state(), rng)
        out[o.kind] = out.get(o.kind, 0) + 1
    return {k: v / trials for k, v in out.items()}


class TestSingleSteps:
    def test_two_vertices_merge_first(self, rng):
        s = GraphState(2, 0.5)
        out = step_discrete(s, rng)
        assert out.kind == "TreeMerge" and s.tree_size_hist == {2: 1}
        out = step_discrete(s, rng)
        assert out.kind == "Freeze" and out.size == 2 and s.g == 2

    def test_freeze_probability_from_injected_state(self, rng):
        make = lambda: GraphState.from_components(4, 0.5, [[0, 1], [2], [3]], [])
        trials = 60000
        f = frequencies(make, step_discrete, trials, rng)
        se = math.sqrt((1 / 6) * (5 / 6) / trials)
        assert abs(f.get("Freeze", 0) - 1 / 6) <= 4 * se

    def test_glue_and_discard_probabilities(self, rng):
        # tree {0,1}, singletons none, gel {2,3}: mixed pairs 4/6, frozen pairs 1/6, inside 1/6
        make = lambda: GraphState.from_components(4, 0.25, [[0, 1]], [2, 3])
        trials = 60000
        f = frequencies(make, step_discrete, trials, rng)
        for kind, want in (("GlueToGel", 4 / 6 * 0.25), ("Discard", 1 / 6 + 4 / 6 * 0.75), ("Freeze", 1 / 6)):
            se = math.sqrt(want * (1 - want) / trials)
            assert abs(f.get(kind, 0) - want) <= 4 * se

    def test_fully_frozen_discards(self, rng):
        s = GraphState.from_components(5, 0.5, [], range(5))
        for _ in range(10):
            assert step_discrete(s, rng).kind == "Discard"
        assert s.d == 10 and s.g == 5

    def test_poisson_wait(self, rng):
        n = 11
        waits = [step_poissonized(GraphState(n, 1.0), rng).dt for _ in range(20000)]
        assert abs(np.mean(waits) / (2 / (n - 1)) - 1) <= 0.05

    def test_strict_ignores_rings_on_present_edges(self, rng):
        # a path on 3 vertices has 2 of its 3 internal pairs present
        make = lambda: GraphState.from_components(4, 1.0, [[0, 1, 2], [3]], [])
        stepper = lambda s, r: step_poissonized(s, r, strict=True)
        trials = 60000
        f = frequencies(make, stepper, trials, rng)
        for kind, want in (("Ignored", 1 / 3), ("Freeze", 1 / 6), ("TreeMerge", 1 / 2)):
            se = math.sqrt(want * (1 - want) / trials)
            assert abs(f.get(kind, 0) - want) <= 4 * se

    def test_default_poisson_semantics_never_ignores(self, rng):
        make = lambda: GraphState.from_components(4, 1.0, [[0, 1, 2], [3]], [])
        f = frequencies(make, step_poissonized, 5000, rng)
        assert "Ignored" not in f

    def test_frozen_is_irreversible(self, rng):
        s = GraphState(30, 0.7)
        frozen_roots = set()
        while s.g < 30:
            step_discrete(s, rng)
            now = {x for x in range(30) if s.is_frozen(x)}
            assert frozen_roots <= now
            frozen_roots = now

    def test_state_domain(self):
        with pytest.raises(DomainError):
            GraphState(1, 0.5)
        with pytest.raises(DomainError):
            GraphState(5, 1.5)
        with pytest.raises(DomainError):
            GraphState.from_components(4, 0.5, [[0, 1]], [2])


class TestInvariants:
    @given(st.integers(2, 40), st.floats(0.05, 1.0), st.integers(0, 2**32), st.booleans(), st.booleans())
    @settings(max_examples=40, deadline=None)
    def test_after_every_step(self, n, p, seed, poisson, strict):
        rng = np.random.default_rng(seed)
        s = GraphState(n, p)
        g_prev = d_prev = 0
        for _ in range(40 * n):
            if poisson:
                step_poissonized(s, rng, strict=strict)
            else:
                step_discrete(s, rng)
            s.check_invariants()
            assert s.g >= g_prev and s.d >= d_prev
            g_prev, d_prev = s.g, s.d
            if not strict:
                assert s.ignored == 0
                assert s.e + s.g + s.d == s.m
            if s.g == n:
                break

    @given(st.integers(2, 300), st.floats(0.1, 1.0), st.integers(0, 2**32), st.sampled_from(["discrete", "poissonized"]))
    @settings(max_examples=30, deadline=None)
    def test_run_record(self, n, p, seed, mode):
        rec = run(RunConfig(n=n, p=p, mode=mode, seed=seed, grid=64, k_max=5))
        assert not rec.incomplete
        assert rec.absorption == rec.a_kplus[1]
        for k in range(1, 6):
            assert rec.a_kplus[k] >= rec.a_k[k]
        assert np.all(np.diff(rec.trajectory[:, 0]) > 0)
        rec.state.check_invariants()
        traj = rec.trajectory
        assert np.all(traj[:, 1] + traj[:, 3] == n)


class TestRuns:
    def test_three_vertex_chain(self):
        p = 0.5
        want = float(three_vertex_absorption_mean(p))
        assert want == pytest.approx(2 + 1 + 2 / 3)
        vals = np.array([run(RunConfig(n=3, p=p, grid=0), r).absorption for r in replica_rngs(11, 20000)])
        assert abs(vals.mean() / want - 1) <= 0.02
        law = three_vertex_absorption_law(p, 60)
        counts = np.bincount(vals.astype(int), minlength=60)[:60]
        from scipy import stats

        keep = law * len(vals) >= 5
        obs = np.append(counts[keep], len(vals) - counts[keep].sum())
        exp = np.append(law[keep], 1 - law[keep].sum()) * len(vals)
        assert stats.chisquare(obs, exp).pvalue > 0.001

    def test_two_vertices(self):
        rec = run(RunConfig(n=2, p=0.3, grid=0))
        assert rec.absorption == 2 and rec.a_k[2] == 2 and rec.a_k[1] == 1

    def test_two_vertices_poissonized_mean(self):
        # two rings of a rate 1/2 clock
        vals = [run(RunConfig(n=2, p=1.0, mode="poissonized", grid=0), r).absorption for r in replica_rngs(5, 20000)]
        assert abs(np.mean(vals) / 4 - 1) <= 0.02

    def test_deterministic_given_seed(self):
        cfg = RunConfig(n=5000, p=0.6, seed=42, grid=50)
        a, b = run(cfg), run(cfg)
        assert np.array_equal(a.trajectory, b.trajectory) and a.absorption == b.absorption

    def test_step_cap_marks_incomplete(self):
        rec = run(RunConfig(n=1000, p=0.5, max_steps=100, grid=0))
        assert rec.incomplete and math.isnan(rec.absorption)

    def test_stop_step_is_not_incomplete(self):
        rec = run(RunConfig(n=1000, p=0.5, stop_step=100, grid=0))
        assert not rec.incomplete and rec.state.m == 100

    def test_subcritical_poissonized(self):
        cfg = RunConfig(n=10**4, p=0.5, mode="poissonized", grid=0, stop_time=0.8)
        vals = [run(cfg, r).state.g / 10**4 for r in replica_rngs(3, 100)]
        assert np.mean(np.abs(np.array(vals) - gel_curve(0.5).g(0.4)) <= 0.05) >= 0.99

    def test_last_size_two_time_equals_last_two_plus(self):
        cfg = RunConfig(n=10**5, p=0.5, grid=0, k_max=2)
        recs = [run(cfg, r) for r in replica_rngs(9, 200)]
        same = np.mean([r.a_k[2] == r.a_kplus[2] for r in recs])
        assert same >= 0.9

    def test_keep_edges(self, rng):
        rec = run(RunConfig(n=300, p=0.5, keep_edges=True, stop_step=200, grid=0), rng)
        s = rec.state
        edges = s.forest_edges()
        assert len(edges) == s.e
        for a, b in edges:
            assert s.root(a) == s.root(b) and not s.is_frozen(a)

    def test_strict_counts_ignored_rings(self):
        cfg = RunConfig(n=2000, p=0.5, mode="poissonized", strict_ppp=True, grid=0)
        total = sum(run(cfg, r).final["ignored"] for r in replica_rngs(4, 40))
        assert total > 0

    def test_strict_two_vertices_never_freeze(self):
        rec = run(RunConfig(n=2, p=1.0, mode="poissonized", strict_ppp=True, grid=0, max_steps=50))
        assert rec.incomplete and rec.final["ignored"] == 49

    def test_json_and_csv(self):
        rec = run(RunConfig(n=500, p=0.5, seed=3, grid=20, k_max=3))
        doc = rec.to_json()
        assert doc["seed"] == 3 and len(doc["config_hash"]) == 16
        json.dumps(doc)
        lines = rec.trajectory_csv().splitlines()
        assert lines[0] == "m,G,D,V,E,N1,N2,N3" and len(lines) == rec.trajectory.shape[0] + 1

    @pytest.mark.parametrize("kwargs", [dict(n=1, p=0.5), dict(n=10, p=0.0), dict(n=10, p=0.5, mode="x")])
    def test_config_validation(self, kwargs):
        with pytest.raises(DomainError):
            run(RunConfig(**kwargs))


FINGERPRINT = r"""
import hashlib, json, sys
import numpy as np
from frozen_er.simulator import RunConfig, run
out = []
for cfg in (
    RunConfig(n=1500, p=0.4, seed=7, grid=40, k_max=4),
    RunConfig(n=1500, p=0.8, seed=8, grid=40, mode="poissonized", log_gel=True),
    RunConfig(n=800, p=0.6, seed=9, grid=40, mode="poissonized", strict_ppp=True),
):
    rec = run(cfg)
    h = hashlib.sha256()
    h.update(rec.trajectory.tobytes())
    h.update(json.dumps([rec.a_k, rec.a_kplus, rec.final, rec.gel_area], sort_keys=True, default=str).encode())
    if rec.gel_log is not None:
        h.update(rec.gel_log.tobytes())
    out.append(h.hexdigest())
print(json.dumps(out))
"""


def fingerprint(jit_flag):
    env = dict(os.environ, FROZEN_ER_JIT=jit_flag)
    res = subprocess.run([sys.executable, "-c", FINGERPRINT], env=env, capture_output=True, text=True, check=True)
    return json.loads(res.stdout.strip().splitlines()[-1])


def test_compiled_and_python_paths_agree_bit_for_bit():
    assert fingerprint("1") == fingerprint("0")
