"""Time the compiled kernels against the pure-Python fallback.

Usage: python benchmarks/bench_sim.py [--n 20000] [--repeats 3]
"""
import argparse
import json
import os
import subprocess
import sys

WORKLOAD = r"""
import json, sys, time
import numpy as np
from frozen_er.simulator import RunConfig, run, one_step_gel_jumps
n, repeats = int(sys.argv[1]), int(sys.argv[2])
run(RunConfig(n=200, p=0.5, seed=0, grid=10))
one_step_gel_jumps(20, 10, 5, 0.5, 10, np.random.default_rng(0))
out = {}
t0 = time.perf_counter()
for r in range(repeats):
    run(RunConfig(n=n, p=0.5, seed=r, grid=100))
out["discrete_run"] = (time.perf_counter() - t0) / repeats
t0 = time.perf_counter()
for r in range(repeats):
    run(RunConfig(n=n, p=0.5, seed=r, grid=100, mode="poissonized"))
out["poissonized_run"] = (time.perf_counter() - t0) / repeats
t0 = time.perf_counter()
one_step_gel_jumps(200, 100, 50, 0.5, 20000, np.random.default_rng(1))
out["one_step_kernel"] = time.perf_counter() - t0
print(json.dumps(out))
"""


def timings(flag, n, repeats):
    env = dict(os.environ, FROZEN_ER_JIT=flag)
    res = subprocess.run([sys.executable, "-c", WORKLOAD, str(n), str(repeats)],
                         env=env, capture_output=True, text=True, check=True)
    return json.loads(res.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=20000)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()
    fast = timings("1", args.n, args.repeats)
    slow = timings("0", args.n, args.repeats)
    print(f"{'workload':<18}{'numba s':>10}{'python s':>11}{'speedup':>9}")
    for key in fast:
        print(f"{key:<18}{fast[key]:>10.4f}{slow[key]:>11.4f}{slow[key] / fast[key]:>8.1f}x")


if __name__ == "__main__":
    main()
