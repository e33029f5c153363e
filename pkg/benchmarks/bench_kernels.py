"""Compare the compiled factor kernel with the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 20]

Prints one row per workload: the median time per call for each backend and
the speed-up.  Also times a full 5-company pipeline run under each backend,
in a child process so the import-time backend switch takes effect.
"""

from __future__ import annotations

import argparse
import os
import statistics
import subprocess
import sys
import time

import numpy as np

from mebn._ext import _fallback

try:
    from mebn._ext import _kernels
except ImportError:  # extension not built
    _kernels = None


def workload(rng: np.random.Generator, n_factors: int, n_vars: int, card: int, scope: int):
    cards = np.full(n_vars, card, dtype=np.int64)
    arrays, strides = [], []
    for _ in range(n_factors):
        vars_ = np.sort(rng.choice(n_vars, size=scope, replace=False))
        st = np.zeros(n_vars, dtype=np.int64)
        step = 1
        for v in vars_[::-1]:
            st[v] = step
            step *= card
        arrays.append(rng.random(card**scope))
        strides.append(st)
    return arrays, np.ascontiguousarray(np.array(strides)), cards, 0


def median_time(fn, repeat: int) -> float:
    out = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        out.append(time.perf_counter() - t)
    return statistics.median(out)


PIPELINE = """
import time
from mebn.battlefield import ScenarioConfig, build_domain_kb, generate_scenario, run_pipeline
kb = build_domain_kb()
sc = generate_scenario(ScenarioConfig(seed=3))
t = time.perf_counter()
run_pipeline(kb, sc.reports)
print(time.perf_counter() - t)
"""


def pipeline_time(pure: bool) -> float:
    env = dict(os.environ)
    env.pop("MEBN_PURE_PYTHON", None)
    if pure:
        env["MEBN_PURE_PYTHON"] = "1"
    res = subprocess.run([sys.executable, "-c", PIPELINE], env=env, capture_output=True, text=True, check=True)
    return float(res.stdout.strip())


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--skip-pipeline", action="store_true")
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    cases = [(2, 4, 2, 2), (4, 6, 3, 3), (6, 8, 3, 4), (3, 10, 2, 6), (8, 12, 2, 5)]
    print(f"{'workload':<28}{'python us':>12}{'cython us':>12}{'speedup':>9}")
    for n_factors, n_vars, card, scope in cases:
        arrays, strides, cards, elim = workload(rng, n_factors, n_vars, card, scope)
        tp = median_time(lambda: _fallback.product_sum(arrays, strides, cards, elim), args.repeat)
        name = f"f={n_factors} v={n_vars} k={card} s={scope}"
        if _kernels is None:
            print(f"{name:<28}{tp * 1e6:>12.1f}{'n/a':>12}{'':>9}")
            continue
        a = _kernels.product_sum(arrays, strides, cards, elim)
        b = _fallback.product_sum(arrays, strides, cards, elim)
        if not np.allclose(a, b, rtol=1e-12, atol=0):
            print(f"{name}: backends disagree", file=sys.stderr)
            return 1
        tc = median_time(lambda: _kernels.product_sum(arrays, strides, cards, elim), args.repeat)
        print(f"{name:<28}{tp * 1e6:>12.1f}{tc * 1e6:>12.1f}{tp / tc:>8.2f}x")
    if not args.skip_pipeline:
        tp, tc = pipeline_time(True), pipeline_time(False)
        print(f"{'pipeline (5 companies)':<28}{tp * 1e3:>10.1f}ms{tc * 1e3:>10.1f}ms{tp / tc:>8.2f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
