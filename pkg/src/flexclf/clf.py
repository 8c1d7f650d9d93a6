"""Quadratic candidate control Lyapunov functions and their synthesis.

The local CLF is the value function of the discrete-time LQR built on the
plant linearization: P solves P = A'PA - A'PB (R + B'PB)^-1 B'PA + Q.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    InvalidParameter,
    NoConvergence,
    NumericalBreakdown,
)


def _is_pd(S: np.ndarray) -> bool:
    try:
        np.linalg.cholesky(S)
        return True
    except np.linalg.LinAlgError:
        return False


@dataclass(frozen=True, eq=False)
class QuadraticCLF:
    """V(x) = x'Px with P symmetric positive definite."""

    P: np.ndarray

    def __post_init__(self):
        P = np.asarray(self.P, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise DimensionMismatch("P must be square")
        if np.max(np.abs(P - P.T)) > 1e-12 * (1.0 + np.max(np.abs(P))):
            raise InvalidParameter("P must be symmetric")
        if not _is_pd(P):
            raise NumericalBreakdown("P is not positive definite")
        P = np.ascontiguousarray(P)
        P.flags.writeable = False
        object.__setattr__(self, "P", P)

    @property
    def n(self) -> int:
        return self.P.shape[0]

    def evaluate(self, x) -> float:
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.shape[0] != self.n:
            raise DimensionMismatch(
                f"state has length {x.shape[0]}, expected {self.n}"
            )
        return float(x @ self.P @ x)

    def one_step_quadratic(self, g: np.ndarray, h: np.ndarray):
        """Coefficients (H, q, r0) of V(g + h u) as a quadratic in u."""
        Ph = self.P @ h
        H = h.T @ Ph
        q = 2.0 * (g @ Ph)
        r0 = float(g @ self.P @ g)
        return H, q, r0


@dataclass(frozen=True)
class ConeParams:
    """Per-step contraction rate and the scale anchoring the decay envelope.

    scale=None defers to V(x0) at run start.
    """

    rho: float
    scale: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.rho < 1.0:
            raise InvalidParameter("rho must lie in [0,1)")
        if self.scale is not None and self.scale <= 0.0:
            raise InvalidParameter("scale must be positive")


def synthesize_dare(
    A, B, Q, R, *, tol: float = 1e-12, max_iter: int = 10_000
) -> QuadraticCLF:
    """Solve the discrete algebraic Riccati equation by fixed-point iteration.

    Starts from P = Q and iterates until the successive max-abs difference
    drops below tol (or max_iter); a residual above 1e-8 raises NoConvergence,
    which is also how a non-stabilizable pair shows up.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.asarray(B, dtype=float)
    if B.ndim == 1:
        B = B[:, None]
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    if not _is_pd(R):
        raise NumericalBreakdown("R must be positive definite")

    P = Q.copy()
    for _ in range(max_iter):
        BtP = B.T @ P
        G = np.linalg.solve(R + BtP @ B, BtP @ A)
        P_next = A.T @ P @ A - (A.T @ BtP.T) @ G + Q
        diff = np.max(np.abs(P_next - P))
        P = P_next
        if not np.isfinite(diff) or np.max(np.abs(P)) > 1e14:
            raise NoConvergence("Riccati iteration diverged")
        if diff <= tol:
            break
    residual = dare_residual(A, B, Q, R, P)
    if residual > 1e-8:
        raise NoConvergence(f"Riccati residual {residual:.3e} > 1e-8")
    P = 0.5 * (P + P.T)
    return QuadraticCLF(P=P)


def dare_residual(A, B, Q, R, P) -> float:
    """Max-abs residual of P against the Riccati fixed-point map."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.asarray(B, dtype=float)
    if B.ndim == 1:
        B = B[:, None]
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    P = np.atleast_2d(np.asarray(P, dtype=float))
    BtP = B.T @ P
    rhs = A.T @ P @ A - (A.T @ BtP.T) @ np.linalg.solve(R + BtP @ B, BtP @ A) + Q
    return float(np.max(np.abs(P - rhs)))


def lyapunov_solve(A_cl, Q, *, max_doublings: int = 200) -> QuadraticCLF:
    """Sum the series P = sum_k (A_cl')^k Q A_cl^k by doubling.

    Requires spectral radius of A_cl below one, detected by divergence.
    """
    A_cl = np.atleast_2d(np.asarray(A_cl, dtype=float))
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    P = Q.copy()
    M = A_cl.copy()
    for _ in range(max_doublings):
        T = M.T @ P @ M
        P = P + T
        if not np.isfinite(P).all() or np.max(np.abs(P)) > 1e14:
            raise NoConvergence("Lyapunov doubling diverged")
        if np.max(np.abs(T)) <= 1e-16 * (1.0 + np.max(np.abs(P))):
            break
        M = M @ M
    residual = float(np.max(np.abs(A_cl.T @ P @ A_cl - P + Q)))
    if residual > 1e-10 * (1.0 + np.max(np.abs(P))):
        raise NoConvergence(f"Lyapunov residual {residual:.3e}")
    P = 0.5 * (P + P.T)
    return QuadraticCLF(P=P)


def lqr_gain(A, B, clf: QuadraticCLF, R) -> np.ndarray:
    """Feedback gain K = (R + B'PB)^-1 B'PA for the synthesized P."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.asarray(B, dtype=float)
    if B.ndim == 1:
        B = B[:, None]
    R = np.atleast_2d(np.asarray(R, dtype=float))
    BtP = B.T @ clf.P
    return np.linalg.solve(R + BtP @ B, BtP @ A)


def default_rho(A, B, clf: QuadraticCLF, R, *, samples: int = 256,
                seed: int = 0) -> float:
    """Contraction-rate default: worst sampled LQR decrease ratio, rounded up.

    rho = min(0.999, ceil_2dp(max_x V(A_cl x)/V(x))) over seeded random
    directions; user-overridable everywhere it is consumed.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.asarray(B, dtype=float)
    if B.ndim == 1:
        B = B[:, None]
    K = lqr_gain(A, B, clf, R)
    A_cl = A - B @ K
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        x = rng.standard_normal(A.shape[0])
        vx = clf.evaluate(x)
        if vx <= 0.0:
            continue
        ratio = clf.evaluate(A_cl @ x) / vx
        if ratio > worst:
            worst = ratio
    return min(0.999, math.ceil(worst * 100.0) / 100.0)


@dataclass(frozen=True)
class ContractionReport:
    feasible_fraction: float
    samples: int
    radius: float


def verify_local_contraction(
    clf: QuadraticCLF,
    model,
    cone: ConeParams,
    radius: float,
    samples: int,
    seed: int = 0,
) -> ContractionReport:
    """Sampled check that V contracts at rate rho inside {V(x) <= radius}.

    States are drawn uniformly in the sublevel set by rejection sampling in
    its bounding box (deterministic given seed); each is feasible when some
    boxed input achieves V(x+) <= rho V(x).
    """
    from .solver import OneStepProblem, min_constraint_over_box

    if radius <= 0.0 or samples < 1:
        raise InvalidParameter("need radius > 0 and samples >= 1")
    rng = np.random.default_rng(seed)
    half = np.sqrt(radius * np.diag(np.linalg.inv(clf.P)))
    feasible = 0
    for _ in range(samples):
        while True:
            x = rng.uniform(-half, half)
            if clf.evaluate(x) <= radius:
                break
        g = model.drift(x)
        h = model.input_gain(x)
        H, q, r0 = clf.one_step_quadratic(g, h)
        problem = OneStepProblem(
            H=H,
            q=q,
            r0=r0,
            bound=cone.rho * clf.evaluate(x),
            R_u=np.eye(model.m),
            alpha=0.0,
            lam_max=0.0,
            u_lo=model.u_lo,
            u_hi=model.u_hi,
        )
        _, value = min_constraint_over_box(problem)
        if value <= problem.bound + 1e-9 * (1.0 + abs(problem.bound)):
            feasible += 1
    return ContractionReport(
        feasible_fraction=feasible / samples, samples=samples, radius=radius
    )
