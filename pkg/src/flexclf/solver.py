"""One-step convex program: min u'R_u u + alpha*lam subject to one convex
quadratic constraint u'Hu + q'u + r0 <= bound + lam, a box on u and
lam in [0, lam_max].

The production path is a dual bisection on the constraint multiplier with
projected-Newton inner solves (see _kernels); grid_oracle is a deliberately
independent vectorized brute-force used by the test suite.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass

import numpy as np

from . import _kernels
from ._kernels import BACKEND, HAVE_NUMBA  # noqa: F401  (re-exported)
from .errors import InvalidParameter, NumericalBreakdown, ProblemTooLarge


class Status(enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"


def _square(Mat, m: int, what: str) -> np.ndarray:
    Mat = np.ascontiguousarray(np.atleast_2d(np.asarray(Mat, dtype=float)))
    if Mat.shape != (m, m):
        raise NumericalBreakdown(f"{what} must be {m}x{m}, got {Mat.shape}")
    return Mat


def _psd_ok(S: np.ndarray, *, strict: bool) -> bool:
    shift = 0.0 if strict else 1e-10 * (1.0 + float(np.max(np.abs(S))))
    try:
        np.linalg.cholesky(S + shift * np.eye(S.shape[0]))
        return True
    except np.linalg.LinAlgError:
        return False


@dataclass(frozen=True, eq=False)
class OneStepProblem:
    """Data of one per-step program; all arrays are frozen float64 copies."""

    H: np.ndarray
    q: np.ndarray
    r0: float
    bound: float
    R_u: np.ndarray
    alpha: float = 0.0
    lam_max: float = 0.0
    u_lo: np.ndarray = None
    u_hi: np.ndarray = None

    def __post_init__(self):
        q = np.ascontiguousarray(np.asarray(self.q, dtype=float).reshape(-1))
        m = q.shape[0]
        H = _square(self.H, m, "H")
        R_u = _square(self.R_u, m, "R_u")
        if not _psd_ok(H, strict=False):
            raise NumericalBreakdown("H is not positive semidefinite")
        if not _psd_ok(R_u, strict=True):
            raise NumericalBreakdown("R_u is not positive definite")
        if self.alpha < 0.0:
            raise InvalidParameter("alpha must be nonnegative")
        if self.lam_max < 0.0:
            raise InvalidParameter("lam_max must be nonnegative")
        lo = np.ascontiguousarray(np.asarray(self.u_lo, dtype=float).reshape(-1))
        hi = np.ascontiguousarray(np.asarray(self.u_hi, dtype=float).reshape(-1))
        if lo.shape[0] != m or hi.shape[0] != m:
            raise NumericalBreakdown("input box does not match q")
        if np.any(lo > hi):
            raise InvalidParameter("input box has lower > upper")
        for arr in (H, q, R_u, lo, hi):
            arr.flags.writeable = False
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "r0", float(self.r0))
        object.__setattr__(self, "bound", float(self.bound))
        object.__setattr__(self, "R_u", R_u)
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "lam_max", float(self.lam_max))
        object.__setattr__(self, "u_lo", lo)
        object.__setattr__(self, "u_hi", hi)

    @property
    def m(self) -> int:
        return self.q.shape[0]

    def constraint_value(self, u) -> float:
        u = np.asarray(u, dtype=float).reshape(-1)
        return float(u @ self.H @ u + self.q @ u + self.r0)

    def objective_value(self, u, lam: float) -> float:
        u = np.asarray(u, dtype=float).reshape(-1)
        return float(u @ self.R_u @ u + self.alpha * lam)


@dataclass(frozen=True, eq=False)
class SolveResult:
    u: np.ndarray
    lam: float
    objective: float
    status: Status
    kkt_residual: float
    iterations: int
    solve_time_us: float


def solve_one_step(problem: OneStepProblem, tol: float = 1e-9) -> SolveResult:
    """Solve the one-step program to KKT tolerance tol."""
    if tol <= 0.0:
        raise InvalidParameter("tol must be positive")
    t0 = time.perf_counter_ns()
    u, lam, obj, status, kkt, iters = _kernels.solve_one_step_kernel(
        problem.H,
        problem.q,
        problem.r0,
        problem.bound,
        problem.R_u,
        problem.alpha,
        problem.lam_max,
        problem.u_lo,
        problem.u_hi,
        tol,
    )
    dt_us = (time.perf_counter_ns() - t0) / 1000.0
    return SolveResult(
        u=u,
        lam=float(lam),
        objective=float(obj),
        status=Status.OPTIMAL if status == _kernels.OPTIMAL else Status.INFEASIBLE,
        kkt_residual=float(kkt),
        iterations=int(iters),
        solve_time_us=dt_us,
    )


def min_constraint_over_box(
    problem: OneStepProblem, tol: float = 1e-9
) -> tuple[np.ndarray, float]:
    """Global box-constrained minimum of the constraint quadratic."""
    if tol <= 0.0:
        raise InvalidParameter("tol must be positive")
    u, value = _kernels.min_quad_over_box(
        problem.H, problem.q, problem.r0, problem.u_lo, problem.u_hi, tol
    )
    return u, float(value)


def _axis_grid(a: float, b: float, resolution: float) -> np.ndarray:
    count = int(np.floor((b - a) / resolution + 1e-9))
    pts = a + resolution * np.arange(count + 1)
    if pts[-1] < b - 1e-12 * (1.0 + abs(b)):
        pts = np.append(pts, b)
    return pts


def grid_oracle(problem: OneStepProblem, resolution: float) -> SolveResult:
    """Brute-force validator: exhaustive scan of u (and lam) grids.

    Kept as plain vectorized NumPy on purpose so it never shares code with
    the dual-bisection path it validates.  Guarded to m <= 2.
    """
    if resolution <= 0.0:
        raise InvalidParameter("resolution must be positive")
    if problem.m > 2:
        raise ProblemTooLarge(f"grid oracle limited to m <= 2, got {problem.m}")
    t0 = time.perf_counter_ns()

    if problem.m == 1:
        u0 = _axis_grid(problem.u_lo[0], problem.u_hi[0], resolution)
        cv = problem.H[0, 0] * u0**2 + problem.q[0] * u0 + problem.r0
        eff = problem.R_u[0, 0] * u0**2
        U = u0[:, None]
    else:
        g0 = _axis_grid(problem.u_lo[0], problem.u_hi[0], resolution)
        g1 = _axis_grid(problem.u_lo[1], problem.u_hi[1], resolution)
        U0, U1 = np.meshgrid(g0, g1, indexing="ij")
        U0 = U0.ravel()
        U1 = U1.ravel()
        H, q, R_u = problem.H, problem.q, problem.R_u
        cv = (
            H[0, 0] * U0**2
            + 2.0 * H[0, 1] * U0 * U1
            + H[1, 1] * U1**2
            + q[0] * U0
            + q[1] * U1
            + problem.r0
        )
        eff = (
            R_u[0, 0] * U0**2
            + 2.0 * R_u[0, 1] * U0 * U1
            + R_u[1, 1] * U1**2
        )
        U = np.stack([U0, U1], axis=1)

    if problem.lam_max > 0.0:
        lam_grid = _axis_grid(0.0, problem.lam_max, resolution)
    else:
        lam_grid = np.zeros(1)

    feas_eps = 1e-8 * (1.0 + abs(problem.bound))
    need = cv - problem.bound
    # Smallest grid slack covering the constraint at each u (ascending scan).
    idx = np.searchsorted(lam_grid, need - feas_eps, side="left")
    feasible = idx < lam_grid.shape[0]
    lam_sel = lam_grid[np.minimum(idx, lam_grid.shape[0] - 1)]
    objective = eff + problem.alpha * lam_sel
    objective = np.where(feasible, objective, np.inf)

    dt_us = (time.perf_counter_ns() - t0) / 1000.0
    if not feasible.any():
        u_best, _ = min_constraint_over_box(problem)
        return SolveResult(
            u=u_best,
            lam=0.0,
            objective=float("nan"),
            status=Status.INFEASIBLE,
            kkt_residual=float("nan"),
            iterations=int(cv.shape[0]),
            solve_time_us=dt_us,
        )
    best = int(np.argmin(objective))
    return SolveResult(
        u=U[best].copy(),
        lam=float(lam_sel[best]),
        objective=float(objective[best]),
        status=Status.OPTIMAL,
        kkt_residual=float("nan"),
        iterations=int(cv.shape[0]),
        solve_time_us=dt_us,
    )
