"""Shared generators and small utilities for the test suite."""

from pathlib import Path

import numpy as np

from flexclf import OneStepProblem

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def random_problem(rng) -> OneStepProblem:
    """Seeded random one-step program with m in {1, 2} and mixed regimes."""
    m = int(rng.integers(1, 3))
    L = rng.normal(size=(m, m))
    if rng.uniform() < 0.25:
        L[:, 0] = 0.0  # rank-deficient constraint curvature
    H = L @ L.T
    q = rng.normal(scale=2.0, size=m)
    r0 = float(rng.uniform(-1.0, 3.0))
    bound = float(rng.uniform(-0.5, 2.0))
    D = rng.uniform(0.2, 2.0, size=m)
    W = rng.normal(scale=0.1, size=(m, m))
    R_u = np.diag(D) + W @ W.T
    alpha = float(rng.choice([0.0, 0.1, 10.0, 1000.0]))
    lam_max = float(rng.choice([0.0, 0.5, 10.0]))
    lo = rng.uniform(-2.0, -0.1, size=m)
    hi = rng.uniform(0.1, 2.0, size=m)
    return OneStepProblem(
        H=H, q=q, r0=r0, bound=bound, R_u=R_u, alpha=alpha, lam_max=lam_max,
        u_lo=lo, u_hi=hi,
    )


def oracle_resolution(problem: OneStepProblem) -> float:
    return 1e-3 if problem.m == 1 else 5e-3


def sample_in_sublevel(rng, clf, radius: float) -> np.ndarray:
    """Uniform draw from {V(x) <= radius} by rejection in its bounding box."""
    half = np.sqrt(radius * np.diag(np.linalg.inv(clf.P)))
    while True:
        x = rng.uniform(-half, half)
        if clf.evaluate(x) <= radius:
            return x


def stabilizable_pair(rng) -> tuple[np.ndarray, np.ndarray]:
    """Random (A, B) with every near-unstable mode strongly reachable (PBH)."""
    while True:
        n = int(rng.integers(1, 5))
        m = int(rng.integers(1, 3))
        A = rng.normal(size=(n, n))
        sr = max(abs(np.linalg.eigvals(A)))
        A = A / sr * rng.uniform(0.3, 1.05)
        B = rng.normal(size=(n, m))
        ok = True
        for lam in np.linalg.eigvals(A):
            if abs(lam) >= 0.9:
                M = np.hstack([A - lam * np.eye(n), B])
                if np.linalg.svd(M, compute_uv=False)[-1] < 0.2:
                    ok = False
                    break
        if ok:
            return A, B


def strip_solve_time(csv_text: str) -> str:
    """Drop the trailing solve_time_us column from every CSV line."""
    return "\n".join(
        ",".join(line.split(",")[:-1]) for line in csv_text.splitlines()
    )


def unstable_scalar_plant(a: float = 1.6, u_max: float = 1.0):
    """x+ = a x + u; with a > 1 doing nothing grows V, so cheap slack makes
    the flexible value sequence rise before the envelope forces convergence."""
    from flexclf import PlantModel

    return PlantModel(
        n=1,
        m=1,
        drift=lambda x: a * x,
        input_gain=lambda x: np.array([[1.0]]),
        u_lo=[-u_max],
        u_hi=[u_max],
        name="unstable_scalar",
    )
