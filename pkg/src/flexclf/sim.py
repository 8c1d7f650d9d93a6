"""Closed-loop simulation, feasibility maps and latency summaries."""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .controller import (
    ClassicalController,
    FlexibleController,
    best_effort_step,
    certified_bound,
)
from .errors import EmptyLog, GridTooLarge, InvalidParameter
from .model import PlantModel
from .solver import Status

Controller = Union[ClassicalController, FlexibleController]


@dataclass(frozen=True, eq=False)
class Scenario:
    model: PlantModel
    controller: Controller
    x0: np.ndarray
    steps: int
    ts: float
    convergence_tol: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.steps < 1:
            raise InvalidParameter("steps must be >= 1")
        if self.convergence_tol <= 0.0:
            raise InvalidParameter("convergence_tol must be positive")
        if self.ts <= 0.0:
            raise InvalidParameter("ts must be positive")
        x0 = np.asarray(self.x0, dtype=float).reshape(-1)
        object.__setattr__(self, "x0", x0)


@dataclass(frozen=True, eq=False)
class LogRecord:
    k: int
    t: float
    x: np.ndarray
    u: np.ndarray
    lam: float
    v: float
    lam_bar: float
    cert_bound: float
    status: Status
    solve_time_us: float


@dataclass(frozen=True, eq=False)
class TrajectoryLog:
    records: list[LogRecord]
    ts: float
    x_final: np.ndarray

    def __len__(self) -> int:
        return len(self.records)


@dataclass(frozen=True, eq=False)
class RunSummary:
    converged: bool
    steps_to_tol: int | None
    peak_state: np.ndarray
    total_slack: float
    infeasible_steps: int
    first_infeasible_step: int | None
    certificate_valid: bool
    aborted: bool
    solve_time_median_us: float
    solve_time_p95_us: float
    solve_time_p99_us: float
    solve_time_max_us: float


@dataclass(frozen=True)
class LatencySummary:
    median_us: float
    p95_us: float
    p99_us: float
    max_us: float
    budget_us: float
    budget_ok: bool


def nearest_rank(values, p: float) -> float:
    """Nearest-rank percentile: the ceil(p/100 * n)-th smallest value."""
    ordered = sorted(values)
    rank = max(1, math.ceil(p / 100.0 * len(ordered)))
    return ordered[rank - 1]


def run_closed_loop(s: Scenario) -> tuple[TrajectoryLog, RunSummary]:
    """Iterate x+ = f(x, u_k) under the configured controller.

    A classical Infeasible aborts the run after recording the step; a
    flexible Infeasible falls back to the best-effort input, flags the step
    and voids the certificate from there on.
    """
    flexible = isinstance(s.controller, FlexibleController)
    clf = s.controller.clf
    rho = s.controller.cone.rho
    scale = s.controller.cone.scale
    if scale is None:
        scale = clf.evaluate(s.x0)

    records: list[LogRecord] = []
    lams: list[float] = []
    x = s.x0.copy()
    peak = np.abs(x)
    total_slack = 0.0
    infeasible_steps = 0
    first_infeasible: int | None = None
    certificate_valid = True
    aborted = False
    norms = [float(np.linalg.norm(x))]

    for k in range(s.steps):
        t0 = time.perf_counter_ns()
        if flexible:
            decision = s.controller.step(s.model, x, k)
            if decision.status is Status.INFEASIBLE:
                decision = best_effort_step(clf, s.model, x)
        else:
            decision = s.controller.step(s.model, x)
        wall_us = (time.perf_counter_ns() - t0) / 1000.0

        if decision.status is Status.INFEASIBLE:
            infeasible_steps += 1
            if first_infeasible is None:
                first_infeasible = k
            certificate_valid = False

        cert = certified_bound(scale, rho, lams, k)
        lams.append(decision.lam)
        lam_bar = (
            s.controller.envelope.bound_at(k) if flexible else 0.0
        )
        records.append(
            LogRecord(
                k=k,
                t=k * s.ts,
                x=x.copy(),
                u=decision.u.copy(),
                lam=decision.lam,
                v=clf.evaluate(x),
                lam_bar=lam_bar,
                cert_bound=cert,
                status=decision.status,
                solve_time_us=wall_us,
            )
        )
        total_slack += decision.lam

        if not flexible and decision.status is Status.INFEASIBLE:
            aborted = True
            break

        x = s.model.step(x, decision.u)
        peak = np.maximum(peak, np.abs(x))
        norms.append(float(np.linalg.norm(x)))

    steps_to_tol = None
    for k, nk in enumerate(norms):
        if nk <= s.convergence_tol:
            steps_to_tol = k
            break

    times = [r.solve_time_us for r in records]
    log = TrajectoryLog(records=records, ts=s.ts, x_final=x.copy())
    summary = RunSummary(
        converged=steps_to_tol is not None,
        steps_to_tol=steps_to_tol,
        peak_state=peak,
        total_slack=total_slack,
        infeasible_steps=infeasible_steps,
        first_infeasible_step=first_infeasible,
        certificate_valid=certificate_valid,
        aborted=aborted,
        solve_time_median_us=nearest_rank(times, 50),
        solve_time_p95_us=nearest_rank(times, 95),
        solve_time_p99_us=nearest_rank(times, 99),
        solve_time_max_us=max(times),
    )
    return log, summary


CLASSIFICATIONS = ("classical", "flexible_only", "neither")


@dataclass(frozen=True, eq=False)
class GridSpec:
    lo: np.ndarray
    hi: np.ndarray
    counts: np.ndarray
    cell_cap: int = 1_000_000

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float).reshape(-1)
        hi = np.asarray(self.hi, dtype=float).reshape(-1)
        counts = np.asarray(self.counts, dtype=int).reshape(-1)
        if not (lo.shape == hi.shape == counts.shape):
            raise InvalidParameter("grid lo/hi/counts must have equal length")
        if np.any(counts < 1):
            raise InvalidParameter("grid counts must be >= 1")
        if np.any(lo > hi):
            raise InvalidParameter("grid lo > hi")
        total = int(np.prod(counts))
        if total > self.cell_cap:
            raise GridTooLarge(f"{total} cells exceed cap {self.cell_cap}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "counts", counts)

    def axes(self) -> list[np.ndarray]:
        return [
            np.linspace(self.lo[i], self.hi[i], self.counts[i])
            for i in range(self.lo.shape[0])
        ]

    def points(self) -> np.ndarray:
        """Row-major cartesian product of the axes."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def indices(self) -> np.ndarray:
        mesh = np.meshgrid(
            *[np.arange(c) for c in self.counts], indexing="ij"
        )
        return np.stack([m.ravel() for m in mesh], axis=1)


@dataclass(frozen=True, eq=False)
class FeasibilityMap:
    grid: GridSpec
    x0s: np.ndarray
    classes: list[str] = field(default_factory=list)

    def count(self, label: str) -> int:
        return self.classes.count(label)


def _classify_cell(base: Scenario, flexible: FlexibleController, x0) -> str:
    classical = flexible.classical_twin()
    c_scn = Scenario(
        model=base.model,
        controller=classical,
        x0=x0,
        steps=base.steps,
        ts=base.ts,
        convergence_tol=base.convergence_tol,
        seed=base.seed,
    )
    _, c_sum = run_closed_loop(c_scn)
    if c_sum.infeasible_steps == 0 and c_sum.converged:
        return "classical"
    f_scn = Scenario(
        model=base.model,
        controller=flexible,
        x0=x0,
        steps=base.steps,
        ts=base.ts,
        convergence_tol=base.convergence_tol,
        seed=base.seed,
    )
    _, f_sum = run_closed_loop(f_scn)
    if f_sum.infeasible_steps == 0 and f_sum.converged:
        return "flexible_only"
    return "neither"


def feasibility_map(
    base: Scenario, grid: GridSpec, jobs: int = 1
) -> FeasibilityMap:
    """Classify each grid point, used as x0, by which controller stabilizes it.

    Cells are independent; with jobs > 1 they are evaluated on a thread pool
    (the solver kernels release the GIL) and merged row-major by grid index.
    """
    if grid.lo.shape[0] != base.model.n:
        raise InvalidParameter("grid dimension does not match plant state")
    if isinstance(base.controller, FlexibleController):
        flexible = base.controller
    else:
        # Classical base degenerates to a zero-budget flexible twin.
        from .controller import EnvelopeSchedule

        flexible = FlexibleController(
            clf=base.controller.clf,
            cone=base.controller.cone,
            R_u=base.controller.R_u,
            alpha=1.0,
            envelope=EnvelopeSchedule(delta=0.0, gamma=0.5),
        )
    points = grid.points()
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            classes = list(
                pool.map(lambda p: _classify_cell(base, flexible, p), points)
            )
    else:
        classes = [_classify_cell(base, flexible, p) for p in points]
    return FeasibilityMap(grid=grid, x0s=points, classes=classes)


def timing_stats(log: TrajectoryLog) -> LatencySummary:
    """Nearest-rank latency percentiles; the budget is the sampling period."""
    if len(log.records) == 0:
        raise EmptyLog("trajectory log has no records")
    times = [r.solve_time_us for r in log.records]
    budget_us = log.ts * 1e6
    p99 = nearest_rank(times, 99)
    return LatencySummary(
        median_us=nearest_rank(times, 50),
        p95_us=nearest_rank(times, 95),
        p99_us=p99,
        max_us=max(times),
        budget_us=budget_us,
        budget_ok=p99 < budget_us,
    )
