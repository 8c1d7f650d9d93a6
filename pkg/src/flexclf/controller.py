"""Classical and flexible CLF step laws.

The classical law enforces V(f(x,u)) <= rho V(x) outright.  The flexible law
relaxes the right-hand side by an online-optimized slack bounded by a
geometrically decaying budget delta*gamma^k, so V may rise transiently while
the running certificate rho^k V0 + sum rho^(k-1-j) lam_j still tends to zero.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .clf import ConeParams, QuadraticCLF
from .errors import InvalidParameter
from .model import PlantModel
from .solver import (
    OneStepProblem,
    Status,
    min_constraint_over_box,
    solve_one_step,
)


@dataclass(frozen=True, eq=False)
class ControlDecision:
    u: np.ndarray
    lam: float
    v_next_bound: float
    status: Status
    kkt_residual: float
    solve_time_us: float


@dataclass(frozen=True)
class EnvelopeSchedule:
    """Per-step slack budget delta * gamma^k."""

    delta: float
    gamma: float

    def __post_init__(self):
        if self.delta < 0.0:
            raise InvalidParameter("delta must be nonnegative")
        if not 0.0 <= self.gamma < 1.0:
            raise InvalidParameter("gamma must lie in [0,1)")

    def bound_at(self, k: int) -> float:
        if k < 0:
            raise InvalidParameter("step index must be nonnegative")
        return self.delta * self.gamma**k


def _effort_matrix(R_u, m: int) -> np.ndarray:
    R_u = np.atleast_2d(np.asarray(R_u, dtype=float))
    if R_u.shape != (m, m):
        raise InvalidParameter(f"R_u must be {m}x{m}")
    return R_u


def default_alpha(R_u) -> float:
    """Slack penalty default: 1e3 * trace(R_u)/m, making relaxation a last resort."""
    R_u = np.atleast_2d(np.asarray(R_u, dtype=float))
    return 1e3 * float(np.trace(R_u)) / R_u.shape[0]


def build_one_step_problem(
    clf: QuadraticCLF,
    model: PlantModel,
    x: np.ndarray,
    rho: float,
    R_u: np.ndarray,
    alpha: float,
    lam_max: float,
) -> OneStepProblem:
    g = model.drift(np.asarray(x, dtype=float).reshape(-1))
    h = model.input_gain(np.asarray(x, dtype=float).reshape(-1))
    H, q, r0 = clf.one_step_quadratic(g, h)
    return OneStepProblem(
        H=H,
        q=q,
        r0=r0,
        bound=rho * clf.evaluate(x),
        R_u=R_u,
        alpha=alpha,
        lam_max=lam_max,
        u_lo=model.u_lo,
        u_hi=model.u_hi,
    )


@dataclass(frozen=True, eq=False)
class ClassicalController:
    """Minimum-effort input subject to the fixed-rate decrease condition."""

    clf: QuadraticCLF
    cone: ConeParams
    R_u: np.ndarray

    def step(self, model: PlantModel, x, tol: float = 1e-9) -> ControlDecision:
        R_u = _effort_matrix(self.R_u, model.m)
        problem = build_one_step_problem(
            self.clf, model, x, self.cone.rho, R_u, 0.0, 0.0
        )
        res = solve_one_step(problem, tol)
        return ControlDecision(
            u=res.u,
            lam=0.0,
            v_next_bound=problem.bound,
            status=res.status,
            kkt_residual=res.kkt_residual,
            solve_time_us=res.solve_time_us,
        )


@dataclass(frozen=True, eq=False)
class FlexibleController:
    """Decrease condition relaxed by an optimized, envelope-capped slack."""

    clf: QuadraticCLF
    cone: ConeParams
    R_u: np.ndarray
    alpha: float
    envelope: EnvelopeSchedule

    def __post_init__(self):
        if self.alpha <= 0.0:
            raise InvalidParameter("alpha must be positive")

    def step(
        self, model: PlantModel, x, k: int, tol: float = 1e-9
    ) -> ControlDecision:
        R_u = _effort_matrix(self.R_u, model.m)
        lam_max = self.envelope.bound_at(k)
        problem = build_one_step_problem(
            self.clf, model, x, self.cone.rho, R_u, self.alpha, lam_max
        )
        res = solve_one_step(problem, tol)
        if res.status is Status.OPTIMAL:
            v_next = problem.bound + res.lam
        else:
            v_next = math.nan
        return ControlDecision(
            u=res.u,
            lam=res.lam if res.status is Status.OPTIMAL else 0.0,
            v_next_bound=v_next,
            status=res.status,
            kkt_residual=res.kkt_residual,
            solve_time_us=res.solve_time_us,
        )

    def classical_twin(self) -> ClassicalController:
        """Same CLF, cone and effort cost with the slack disabled."""
        return ClassicalController(clf=self.clf, cone=self.cone, R_u=self.R_u)


def best_effort_step(
    clf: QuadraticCLF, model: PlantModel, x, tol: float = 1e-9
) -> ControlDecision:
    """Fallback when even the relaxed condition is unreachable: apply the
    input minimizing V(f(x,u)) over the box and keep the Infeasible flag."""
    t0 = time.perf_counter_ns()
    problem = build_one_step_problem(
        clf, model, x, 0.0, np.eye(model.m), 0.0, 0.0
    )
    u, value = min_constraint_over_box(problem, tol)
    dt_us = (time.perf_counter_ns() - t0) / 1000.0
    return ControlDecision(
        u=u,
        lam=0.0,
        v_next_bound=value,
        status=Status.INFEASIBLE,
        kkt_residual=float("nan"),
        solve_time_us=dt_us,
    )


def certified_bound(v0: float, rho: float, lams, k: int) -> float:
    """Running certificate rho^k V0 + sum_{j<k} rho^(k-1-j) lam_j >= V(x_k)."""
    if k > len(lams):
        raise InvalidParameter("k exceeds the recorded slack sequence")
    total = (rho**k) * v0
    for j in range(k):
        total += (rho ** (k - 1 - j)) * lams[j]
    return total
