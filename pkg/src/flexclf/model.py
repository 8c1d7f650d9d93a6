"""Discrete-time input-affine plants: x+ = g(x) + h(x) u with a box on u.

Ships the three benchmark plants: integrator chains (exact discretization),
a forward-Euler averaged Buck-Boost converter regulated in deviation
coordinates around its duty-cycle equilibrium, and a forward-Euler
electromagnetic actuator (mass-spring-damper with current-proportional force).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DimensionMismatch, InputOutOfBounds, InvalidParameter


def _vec(x, n: int, what: str) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != n:
        raise DimensionMismatch(f"{what} has length {x.shape[0]}, expected {n}")
    return x


@dataclass(frozen=True, eq=False)
class PlantModel:
    """Immutable discrete-time plant x+ = drift(x) + input_gain(x) @ u."""

    n: int
    m: int
    drift: Callable[[np.ndarray], np.ndarray]
    input_gain: Callable[[np.ndarray], np.ndarray]
    u_lo: np.ndarray
    u_hi: np.ndarray
    name: str = "plant"

    def __post_init__(self):
        lo = _vec(self.u_lo, self.m, "u_lo")
        hi = _vec(self.u_hi, self.m, "u_hi")
        if np.any(lo > hi):
            raise InvalidParameter("input box has lower > upper")
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "u_lo", lo)
        object.__setattr__(self, "u_hi", hi)

    def f(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        """Raw dynamics map, no input-box validation."""
        x = _vec(x, self.n, "x")
        u = _vec(u, self.m, "u")
        return self.drift(x) + self.input_gain(x) @ u

    def step(self, x, u) -> np.ndarray:
        """One simulation step; rejects inputs outside the box."""
        x = _vec(x, self.n, "x")
        u = _vec(u, self.m, "u")
        if np.any(u < self.u_lo) or np.any(u > self.u_hi):
            raise InputOutOfBounds(
                f"u={u} outside [{self.u_lo}, {self.u_hi}] for {self.name}"
            )
        return self.drift(x) + self.input_gain(x) @ u

    def linearize(self, x_bar, u_bar) -> tuple[np.ndarray, np.ndarray]:
        """Central finite-difference Jacobians (A, B) at (x_bar, u_bar).

        Step per component: 1e-6 * (1 + |component|).  For input-affine
        plants B coincides with input_gain(x_bar) up to roundoff.
        """
        x_bar = _vec(x_bar, self.n, "x_bar")
        u_bar = _vec(u_bar, self.m, "u_bar")
        A = np.empty((self.n, self.n))
        for j in range(self.n):
            d = 1e-6 * (1.0 + abs(x_bar[j]))
            xp = x_bar.copy()
            xm = x_bar.copy()
            xp[j] += d
            xm[j] -= d
            A[:, j] = (self.f(xp, u_bar) - self.f(xm, u_bar)) / (2.0 * d)
        B = np.empty((self.n, self.m))
        for j in range(self.m):
            d = 1e-6 * (1.0 + abs(u_bar[j]))
            up = u_bar.copy()
            um = u_bar.copy()
            up[j] += d
            um[j] -= d
            B[:, j] = (self.f(x_bar, up) - self.f(x_bar, um)) / (2.0 * d)
        return A, B


@dataclass(frozen=True, eq=False)
class Equilibrium:
    """Fixed point of the absolute-coordinate dynamics."""

    x_bar: np.ndarray
    u_bar: np.ndarray


@dataclass(frozen=True)
class BuckBoostParams:
    """Averaged Buck-Boost converter parameters (SI units)."""

    v_in: float = 15.0
    inductance: float = 1e-4
    capacitance: float = 1e-4
    r_load: float = 10.0
    ts: float = 1e-4
    duty_ref: float = 0.5

    def __post_init__(self):
        for name in ("v_in", "inductance", "capacitance", "r_load", "ts"):
            if getattr(self, name) <= 0.0:
                raise InvalidParameter(f"{name} must be positive")
        if not 0.0 < self.duty_ref < 1.0:
            raise InvalidParameter("duty_ref must lie in (0, 1)")


@dataclass(frozen=True)
class ActuatorParams:
    """Electromagnetic actuator parameters (SI units)."""

    mass: float = 0.1
    damping: float = 1.0
    spring: float = 100.0
    force_gain: float = 10.0
    ts: float = 1e-4
    u_max: float = 5.0

    def __post_init__(self):
        if self.mass <= 0.0 or self.ts <= 0.0 or self.u_max <= 0.0:
            raise InvalidParameter("mass, ts and u_max must be positive")
        if self.damping < 0.0 or self.spring < 0.0:
            raise InvalidParameter("damping and spring must be nonnegative")


def integrator_chain(n: int, ts: float, u_max: float) -> PlantModel:
    """Exact discretization of a chain of n integrators with a bounded input.

    A[i][j] = ts^(j-i)/(j-i)! for j >= i and B[i] = ts^(n-i)/(n-i)!.
    """
    if n < 1 or ts <= 0.0 or u_max <= 0.0:
        raise InvalidParameter("need n >= 1, ts > 0, u_max > 0")
    A = np.zeros((n, n))
    for i in range(n):
        for j in range(i, n):
            A[i, j] = ts ** (j - i) / math.factorial(j - i)
    B = np.array([[ts ** (n - i) / math.factorial(n - i)] for i in range(n)])

    def drift(x: np.ndarray) -> np.ndarray:
        return A @ x

    def gain(x: np.ndarray) -> np.ndarray:
        return B

    return PlantModel(
        n=n,
        m=1,
        drift=drift,
        input_gain=gain,
        u_lo=np.array([-u_max]),
        u_hi=np.array([u_max]),
        name=f"integrator_chain_{n}",
    )


def _buck_boost_absolute(p: BuckBoostParams):
    """Forward-Euler averaged model in absolute coordinates (i, v), duty d."""
    k_l = p.ts / p.inductance
    k_c = p.ts / p.capacitance

    def g_abs(x: np.ndarray) -> np.ndarray:
        i, v = x
        return np.array([i - k_l * v, v + k_c * (i - v / p.r_load)])

    def h_abs(x: np.ndarray) -> np.ndarray:
        i, v = x
        return np.array([[k_l * (p.v_in + v)], [-k_c * i]])

    return g_abs, h_abs


def compute_equilibrium(p: BuckBoostParams) -> Equilibrium:
    """Steady state of the averaged converter at duty_ref.

    Solving i+ = i and v+ = v gives v = v_in d/(1-d) and i = v/(R(1-d)).
    """
    d = p.duty_ref
    v_bar = p.v_in * d / (1.0 - d)
    i_bar = v_bar / (p.r_load * (1.0 - d))
    return Equilibrium(
        x_bar=np.array([i_bar, v_bar]), u_bar=np.array([d])
    )


def buck_boost(p: BuckBoostParams) -> PlantModel:
    """Averaged Buck-Boost converter in deviation coordinates.

    State is z = (i, v) - (i_bar, v_bar); input is the duty deviation,
    boxed so the total duty stays in [0, 1].  The model is affine in the
    duty for fixed state, so it splits cleanly into drift and gain.
    """
    eq = compute_equilibrium(p)
    x_bar = eq.x_bar
    d_ref = float(eq.u_bar[0])
    g_abs, h_abs = _buck_boost_absolute(p)

    def drift(z: np.ndarray) -> np.ndarray:
        x = x_bar + z
        return g_abs(x) + (h_abs(x) @ eq.u_bar) - x_bar

    def gain(z: np.ndarray) -> np.ndarray:
        return h_abs(x_bar + z)

    return PlantModel(
        n=2,
        m=1,
        drift=drift,
        input_gain=gain,
        u_lo=np.array([-d_ref]),
        u_hi=np.array([1.0 - d_ref]),
        name="buck_boost",
    )


def actuator(p: ActuatorParams) -> PlantModel:
    """Forward-Euler mass-spring-damper with current-proportional force.

    State is (position deviation, speed); the magnetic force is
    force_gain * u with the coil current u boxed at +-u_max.
    """
    k = p.ts / p.mass

    def drift(x: np.ndarray) -> np.ndarray:
        pos, spd = x
        return np.array(
            [pos + p.ts * spd, spd + k * (-p.damping * spd - p.spring * pos)]
        )

    B = np.array([[0.0], [k * p.force_gain]])

    def gain(x: np.ndarray) -> np.ndarray:
        return B

    return PlantModel(
        n=2,
        m=1,
        drift=drift,
        input_gain=gain,
        u_lo=np.array([-p.u_max]),
        u_hi=np.array([p.u_max]),
        name="actuator",
    )
