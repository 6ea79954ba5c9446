"""Continuous-time altitude model and exact zero-order-hold primitives.

The altitude channel of a multirotor (gravity compensated) is modelled as a
triple chain ``z -> z_dot -> z_ddot`` where the acceleration follows the
command through an actuator lag ``T_p`` and a drag lag ``T_q``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np
from scipy.linalg import expm

# Parameters identified for a real multirotor altitude loop.
NOMINAL_T_P = 0.049
NOMINAL_T_Q = 0.563
NOMINAL_K_Z = 0.84
NOMINAL_TAU = 0.05
NOMINAL_U_MAX = 6.57

# Tolerance used to snap a delay onto an exact multiple of the sampling period.
_MULTIPLE_TOL = 1e-9


@dataclass(frozen=True)
class PlantParams:
    """Physical constants, loop delays and actuator limit of the altitude plant."""

    t_p: float = NOMINAL_T_P
    t_q: float = NOMINAL_T_Q
    k_z: float = NOMINAL_K_Z
    tau_i: float = 0.0
    tau_o: float = 0.0
    u_max: float = NOMINAL_U_MAX

    def __post_init__(self):
        for name in ("t_p", "t_q", "k_z", "u_max"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive and finite, got {value!r}")
        for name in ("tau_i", "tau_o"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise ValueError(f"{name} must be non-negative, got {value!r}")

    @property
    def total_delay(self) -> float:
        return self.tau_i + self.tau_o

    def with_delays(self, tau_i: float = 0.0, tau_o: float = 0.0) -> "PlantParams":
        return replace(self, tau_i=tau_i, tau_o=tau_o)


@dataclass(frozen=True)
class ContinuousSystem:
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: float = 0.0


@dataclass(frozen=True)
class DelayDecomposition:
    """``tau = (d - 1) * h + tau_frac`` with ``0 < tau_frac <= h``.

    A zero delay is represented as ``d=1, tau_frac=0`` and flagged ``degenerate``.
    """

    d: int
    tau_frac: float
    h: float

    @property
    def degenerate(self) -> bool:
        return self.tau_frac == 0.0

    @property
    def tau(self) -> float:
        return (self.d - 1) * self.h + self.tau_frac


def build_continuous(params: PlantParams) -> ContinuousSystem:
    tp, tq, kz = params.t_p, params.t_q, params.k_z
    a = np.array(
        [
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.0, -1.0 / (tp * tq), -(tp + tq) / (tp * tq)],
        ]
    )
    b = np.array([[0.0], [0.0], [kz / (tp * tq)]])
    return ContinuousSystem(a=a, b=b, c=np.eye(3), d=0.0)


def _check_time(t: float) -> None:
    if not (math.isfinite(t) and t >= 0):
        raise ValueError(f"time must be non-negative and finite, got {t!r}")


def phi(sys: ContinuousSystem, t: float) -> np.ndarray:
    """State transition matrix ``exp(A t)``."""
    _check_time(t)
    if t == 0:
        return np.eye(sys.a.shape[0])
    return expm(sys.a * t)


def gamma(sys: ContinuousSystem, t: float) -> np.ndarray:
    """ZOH input matrix ``int_0^t exp(A s) B ds`` (n x 1).

    Taken from the upper-right block of ``exp([[A, B], [0, 0]] t)``.
    """
    _check_time(t)
    n, m = sys.b.shape
    if t == 0:
        return np.zeros((n, m))
    block = np.zeros((n + m, n + m))
    block[:n, :n] = sys.a
    block[:n, n:] = sys.b
    return expm(block * t)[:n, n:]


def phi_gamma(sys: ContinuousSystem, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Both ``Phi(t)`` and ``Gamma(t)`` from a single exponential."""
    _check_time(t)
    n, m = sys.b.shape
    if t == 0:
        return np.eye(n), np.zeros((n, m))
    block = np.zeros((n + m, n + m))
    block[:n, :n] = sys.a
    block[:n, n:] = sys.b
    e = expm(block * t)
    return e[:n, :n], e[:n, n:]


def decompose_delay(tau: float, h: float) -> DelayDecomposition:
    """Split ``tau`` into whole sampling periods plus a fractional remainder.

    A delay that is an exact multiple of ``h`` keeps a full period as the
    fractional part (``tau_frac == h``) so that the remainder stays positive.
    """
    if not (math.isfinite(h) and h > 0):
        raise ValueError(f"sampling period must be positive, got {h!r}")
    if not (math.isfinite(tau) and tau >= 0):
        raise ValueError(f"delay must be non-negative, got {tau!r}")
    if tau == 0:
        return DelayDecomposition(d=1, tau_frac=0.0, h=h)
    ratio = tau / h
    nearest = round(ratio)
    if nearest >= 1 and abs(ratio - nearest) <= _MULTIPLE_TOL * max(1.0, ratio):
        return DelayDecomposition(d=int(nearest), tau_frac=h, h=h)
    d = int(math.floor(ratio)) + 1
    frac = tau - (d - 1) * h
    # floor can land one period off when ratio sits just below an integer
    if frac > h:
        d += 1
        frac = tau - (d - 1) * h
    elif frac <= 0:
        d -= 1
        frac = tau - (d - 1) * h
    return DelayDecomposition(d=d, tau_frac=frac, h=h)


def propagate_piecewise(
    sys: ContinuousSystem,
    x0: Sequence[float] | np.ndarray,
    segments: Iterable[tuple[float, float]],
) -> np.ndarray:
    """Advance ``x0`` through consecutive constant-input segments ``(duration, u)``."""
    x = np.asarray(x0, dtype=float).reshape(-1).copy()
    for duration, u in segments:
        if duration < 0:
            raise ValueError(f"segment duration must be non-negative, got {duration!r}")
        if duration == 0:
            continue
        ph, gm = phi_gamma(sys, duration)
        x = ph @ x + gm[:, 0] * u
    return x
