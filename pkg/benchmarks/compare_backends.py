"""Compare the numba-compiled kernels against the pure-NumPy fallback.

Backend selection happens at import time via the FLEXCLF_PURE_NUMPY flag, so
each backend is timed in its own subprocess running the identical seeded
workload.  Usage:

    python benchmarks/compare_backends.py [--solves 2000] [--json out.json]
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys

_WORKER = r"""
import json
import sys
import time

import numpy as np

from flexclf import _kernels

def workload(n_solves):
    rng = np.random.default_rng(42)
    problems = []
    for _ in range(n_solves):
        m = int(rng.integers(1, 3))
        L = rng.normal(size=(m, m))
        H = L @ L.T
        q = rng.normal(scale=2.0, size=m)
        r0 = float(rng.uniform(-1.0, 3.0))
        bound = float(rng.uniform(-0.5, 2.0))
        R_u = np.diag(rng.uniform(0.2, 2.0, size=m))
        alpha = float(rng.choice([0.0, 1.0, 100.0]))
        lam_max = float(rng.choice([0.0, 0.5, 10.0]))
        lo = rng.uniform(-2.0, -0.1, size=m)
        hi = rng.uniform(0.1, 2.0, size=m)
        problems.append((H, q, r0, bound, R_u, alpha, lam_max, lo, hi))
    return problems

def run(n_solves):
    problems = workload(n_solves)
    # Warm the JIT (no-op on the numpy path).
    for p in problems[: min(20, len(problems))]:
        _kernels.solve_one_step_kernel(*p, 1e-9)
    times = np.empty(len(problems))
    checksum = 0.0
    for i, p in enumerate(problems):
        t0 = time.perf_counter_ns()
        u, lam, obj, status, kkt, iters = _kernels.solve_one_step_kernel(*p, 1e-9)
        times[i] = (time.perf_counter_ns() - t0) / 1000.0
        if status == _kernels.OPTIMAL:
            checksum += obj
    return {
        "backend": _kernels.BACKEND,
        "solves": len(problems),
        "median_us": float(np.median(times)),
        "p99_us": float(np.percentile(times, 99)),
        "total_s": float(times.sum() / 1e6),
        "objective_checksum": checksum,
    }

if __name__ == "__main__":
    print(json.dumps(run(int(sys.argv[1]))))
"""


def _run_backend(pure_numpy: bool, solves: int) -> dict:
    env = dict(os.environ)
    env["FLEXCLF_PURE_NUMPY"] = "1" if pure_numpy else "0"
    out = subprocess.run(
        [sys.executable, "-c", _WORKER, str(solves)],
        env=env,
        capture_output=True,
        text=True,
        check=True,
    )
    return json.loads(out.stdout.strip().splitlines()[-1])


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--solves", type=int, default=2000)
    parser.add_argument("--json", default=None, help="write results here")
    args = parser.parse_args()

    results = [_run_backend(False, args.solves), _run_backend(True, args.solves)]
    by_name = {r["backend"]: r for r in results}

    print(f"{'backend':>8} {'median_us':>12} {'p99_us':>12} {'total_s':>10}")
    for r in results:
        print(
            f"{r['backend']:>8} {r['median_us']:>12.2f} "
            f"{r['p99_us']:>12.2f} {r['total_s']:>10.3f}"
        )
    if "numba" in by_name and "numpy" in by_name:
        ratio = by_name["numpy"]["median_us"] / by_name["numba"]["median_us"]
        drift = abs(
            by_name["numpy"]["objective_checksum"]
            - by_name["numba"]["objective_checksum"]
        )
        print(f"numba speedup (median): {ratio:.1f}x")
        print(f"objective checksum drift: {drift:.3e}")
    if args.json:
        with open(args.json, "w", encoding="utf-8") as handle:
            json.dump(results, handle, indent=2)
    if "numba" in by_name and by_name["numba"]["median_us"] > 100.0:
        print("FAIL: compiled median exceeds the 100 us target", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
