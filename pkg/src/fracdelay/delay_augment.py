"""Exact discrete-time models of the altitude plant with fractional delays.

The augmented state stacks, in order::

    x(k)                       plant state at the sample instant
    y_s(k), ..., y_s(k-d_o+1)  output snapshots, y_s(k) = x(k h - tau_o')
    u(k-d_i), ..., u(k-1)      stored commands, oldest first

The measurement ``y(k) = x(k h - tau_o)`` is the oldest snapshot. Every
coefficient block comes from integrating the plant piecewise over the
intervals on which the delayed command is constant, so one construction
covers every ordering of the input and output fractional delays.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .lti_core import (
    ContinuousSystem,
    DelayDecomposition,
    PlantParams,
    build_continuous,
    decompose_delay,
    phi,
    phi_gamma,
)

PLANT_STATE = "plant_state"
SNAPSHOT = "delayed_output_snapshot"
OUTPUT_HISTORY = "output_history"
INPUT_HISTORY = "input_history"

STATE_DIM = 3


@dataclass(frozen=True)
class BlockLayout:
    blocks: tuple[tuple[str, int], ...]

    @property
    def width(self) -> int:
        return sum(w for _, w in self.blocks)

    def __len__(self) -> int:
        return len(self.blocks)

    def offsets(self) -> list[int]:
        out, pos = [], 0
        for _, w in self.blocks:
            out.append(pos)
            pos += w
        return out

    def slice(self, index: int) -> slice:
        start = self.offsets()[index]
        return slice(start, start + self.blocks[index][1])

    def indices_of(self, label: str) -> list[int]:
        return [i for i, (lab, _) in enumerate(self.blocks) if lab == label]

    def describe(self) -> list[str]:
        lines = []
        for (label, w), start in zip(self.blocks, self.offsets()):
            lines.append(f"{label}[{start}:{start + w}]")
        return lines


@dataclass(frozen=True)
class DiscreteAugmentedSystem:
    a_e: np.ndarray
    b_e: np.ndarray
    c_e: np.ndarray
    h: float
    layout: BlockLayout
    delays: tuple[float, float]
    input_split: DelayDecomposition | None = field(default=None, compare=False)
    output_split: DelayDecomposition | None = field(default=None, compare=False)

    @property
    def n(self) -> int:
        return self.a_e.shape[0]

    @property
    def has_delay(self) -> bool:
        return self.delays != (0.0, 0.0)

    def output_rows(self) -> np.ndarray:
        """Rows of ``c_e`` that produce the measured plant output."""
        return self.c_e[:STATE_DIM]

    def step(self, x: np.ndarray, u: float) -> np.ndarray:
        return self.a_e @ x + self.b_e[:, 0] * u

    def measure(self, x: np.ndarray) -> np.ndarray:
        return self.output_rows() @ x

    def simulate(self, inputs, x0: np.ndarray | None = None) -> np.ndarray:
        """Measured outputs ``y(0), ..., y(N)`` for the command sequence ``inputs``."""
        x = np.zeros(self.n) if x0 is None else np.asarray(x0, dtype=float).copy()
        ys = [self.measure(x)]
        for u in inputs:
            x = self.step(x, float(u))
            ys.append(self.measure(x))
        return np.array(ys)


def _check_period(h: float) -> None:
    if not (np.isfinite(h) and h > 0):
        raise ValueError(f"sampling period must be positive, got {h!r}")


def build_delay_free(params: PlantParams, h: float) -> DiscreteAugmentedSystem:
    _check_period(h)
    sys = build_continuous(params)
    ph, gm = phi_gamma(sys, h)
    return DiscreteAugmentedSystem(
        a_e=ph,
        b_e=gm,
        c_e=np.eye(STATE_DIM),
        h=h,
        layout=BlockLayout(((PLANT_STATE, STATE_DIM),)),
        delays=(0.0, 0.0),
    )


def _input_coefficients(
    sys: ContinuousSystem, horizon: float, switch: float
) -> tuple[np.ndarray, np.ndarray]:
    """Response at ``horizon`` to the old command (held until ``switch``) and the new one."""
    if switch >= horizon:
        _, g = phi_gamma(sys, horizon)
        return g[:, 0], np.zeros(STATE_DIM)
    _, g_old = phi_gamma(sys, switch)
    _, g_new = phi_gamma(sys, horizon - switch)
    return phi(sys, horizon - switch) @ g_old[:, 0], g_new[:, 0]


def build_augmented(params: PlantParams, h: float) -> DiscreteAugmentedSystem:
    """Augmented one-step recursion for the plant with delays ``params.tau_i/tau_o``.

    Over ``[k h, k h + h)`` the plant sees ``u(k - d_i)`` until ``tau_i'`` has
    elapsed and ``u(k - d_i + 1)`` afterwards. The newest snapshot is the plant
    state ``h - tau_o'`` into the interval.
    """
    _check_period(h)
    if params.tau_i == 0 and params.tau_o == 0:
        raise ValueError("no delay to augment; use build_delay_free")
    sys = build_continuous(params)
    split_i = decompose_delay(params.tau_i, h)
    split_o = decompose_delay(params.tau_o, h)
    d_i, d_o = split_i.d, split_o.d

    blocks = [(PLANT_STATE, STATE_DIM), (SNAPSHOT, STATE_DIM)]
    blocks += [(OUTPUT_HISTORY, STATE_DIM)] * (d_o - 1)
    blocks += [(INPUT_HISTORY, 1)] * d_i
    layout = BlockLayout(tuple(blocks))
    n = layout.width
    a = np.zeros((n, n))
    b = np.zeros((n, 1))

    xs = layout.slice(0)
    snap_starts = [layout.slice(i).start for i in range(1, 1 + d_o)]
    u_start = 3 + 3 * d_o  # column of u(k - d_i); u(k - j) sits at u_start + d_i - j

    def add_input(rows: slice, lag: int, coef: np.ndarray) -> None:
        # lag j means u(k - j); j == 0 is the command being applied now
        if lag == 0:
            b[rows, 0] += coef
        else:
            a[rows, u_start + d_i - lag] += coef

    # plant state over the full period
    old, new = _input_coefficients(sys, h, split_i.tau_frac)
    a[xs, xs] = phi(sys, h)
    add_input(xs, d_i, old)
    add_input(xs, d_i - 1, new)

    # newest snapshot: the state after h - tau_o' of the same interval
    horizon = h - split_o.tau_frac
    s0 = slice(snap_starts[0], snap_starts[0] + STATE_DIM)
    old, new = _input_coefficients(sys, horizon, split_i.tau_frac)
    a[s0, xs] = phi(sys, horizon)
    add_input(s0, d_i, old)
    add_input(s0, d_i - 1, new)

    # shift registers
    for j in range(1, d_o):
        dst, src = snap_starts[j], snap_starts[j - 1]
        a[dst : dst + STATE_DIM, src : src + STATE_DIM] = np.eye(STATE_DIM)
    for j in range(d_i - 1):
        a[u_start + j, u_start + j + 1] = 1.0
    b[u_start + d_i - 1, 0] = 1.0

    c = np.zeros((STATE_DIM + d_i, n))
    last = snap_starts[-1]
    c[:STATE_DIM, last : last + STATE_DIM] = np.eye(STATE_DIM)
    for j in range(d_i):
        c[STATE_DIM + j, u_start + j] = 1.0

    return DiscreteAugmentedSystem(
        a_e=a,
        b_e=b,
        c_e=c,
        h=h,
        layout=layout,
        delays=(params.tau_i, params.tau_o),
        input_split=split_i,
        output_split=split_o,
    )


def build_system(params: PlantParams, h: float) -> DiscreteAugmentedSystem:
    """Delay-free model when both delays vanish, augmented model otherwise."""
    if params.tau_i == 0 and params.tau_o == 0:
        return build_delay_free(params, h)
    return build_augmented(params, h)


def observation_selector(
    sys: DiscreteAugmentedSystem, mode: Literal["full_y", "reduced"]
) -> np.ndarray:
    """Indices of augmented-state entries forming an agent observation.

    ``full_y`` is the measured output only; ``reduced`` appends the most
    recent stored command.
    """
    if mode not in ("full_y", "reduced"):
        raise ValueError(f"unknown observation mode {mode!r}")
    if not sys.has_delay:
        if mode == "reduced":
            raise ValueError("delay-free system stores no past input")
        return np.arange(STATE_DIM)
    out_block = sys.layout.indices_of(SNAPSHOT) + sys.layout.indices_of(OUTPUT_HISTORY)
    rows = list(range(sys.n))[sys.layout.slice(out_block[-1])]
    if mode == "reduced":
        newest_input = sys.layout.indices_of(INPUT_HISTORY)[-1]
        rows.append(sys.layout.slice(newest_input).start)
    return np.array(rows)
