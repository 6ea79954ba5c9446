"""Fixed-step simulator of the delayed, saturated altitude plant.

The plant is advanced by its exact zero-order-hold discretization at a
0.5 ms base step. Input and output delays are ring buffers of whole base
steps, so for piecewise-constant commands aligned to the base grid the
simulation is exact up to rounding. This is the reference every discrete
model is checked against.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .lti_core import PlantParams, build_continuous, phi_gamma

BASE_STEP = 0.0005
DEFAULT_EPISODE = 12.6
_ALIGN_TOL = 1e-9


def steps_of(duration: float, base_step: float, what: str = "duration") -> int:
    """Number of base steps in ``duration``; raises if it is not a whole multiple."""
    ratio = duration / base_step
    n = round(ratio)
    if abs(ratio - n) > _ALIGN_TOL * max(1.0, abs(ratio)):
        raise ValueError(f"{what} {duration!r} is not a multiple of the base step {base_step!r}")
    return int(n)


@dataclass(frozen=True)
class SimulatorConfig:
    params: PlantParams = field(default_factory=PlantParams)
    base_step: float = BASE_STEP
    episode_length: float = DEFAULT_EPISODE
    initial_state: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if not self.base_step > 0:
            raise ValueError("base_step must be positive")
        if not self.episode_length > 0:
            raise ValueError("episode_length must be positive")
        steps_of(self.params.tau_i, self.base_step, "tau_i")
        steps_of(self.params.tau_o, self.base_step, "tau_o")


class SimulatorState:
    """Mutable plant state plus the two delay lines."""

    def __init__(self, config: SimulatorConfig):
        self.config = config
        sys = build_continuous(config.params)
        ph, gm = phi_gamma(sys, config.base_step)
        self._phi = ph
        self._gamma = gm[:, 0]
        self.u_max = config.params.u_max
        self.n_in = steps_of(config.params.tau_i, config.base_step, "tau_i")
        self.n_out = steps_of(config.params.tau_o, config.base_step, "tau_o")
        self.x = np.array(config.initial_state, dtype=float)
        # pre-episode quiescence: no command history, plant resting at x0
        self.input_buffer: deque[float] = deque([0.0] * self.n_in, maxlen=self.n_in + 1)
        self.output_buffer: deque[np.ndarray] = deque(
            [self.x.copy() for _ in range(self.n_out)], maxlen=self.n_out + 1
        )
        self.ticks = 0
        self.last_applied = 0.0

    @property
    def clock(self) -> float:
        return self.ticks * self.config.base_step

    def measured_output(self) -> np.ndarray:
        if self.n_out == 0:
            return self.x.copy()
        return self.output_buffer[0].copy()

    def saturate(self, u: float) -> float:
        return min(max(float(u), -self.u_max), self.u_max)

    def sub_step(self, commanded: float) -> float:
        """Advance one base step; returns the input the plant actually received."""
        u = self.saturate(commanded)
        if self.n_in:
            self.input_buffer.append(u)
            applied = self.input_buffer.popleft()
        else:
            applied = u
        if self.n_out:
            self.output_buffer.append(self.x)
            self.output_buffer.popleft()
        self.x = self._phi @ self.x + self._gamma * applied
        self.ticks += 1
        self.last_applied = applied
        return applied

    def step(self, commanded_input: float, hold_duration: float) -> np.ndarray:
        """Hold ``commanded_input`` for ``hold_duration`` and return the delayed measurement."""
        n = steps_of(hold_duration, self.config.base_step, "hold_duration")
        if n <= 0:
            raise ValueError("hold_duration must be positive")
        for _ in range(n):
            self.sub_step(commanded_input)
        return self.measured_output()


def reset(config: SimulatorConfig) -> SimulatorState:
    return SimulatorState(config)


def step(state: SimulatorState, commanded_input: float, hold_duration: float):
    y = state.step(commanded_input, hold_duration)
    return state, y


@dataclass
class Trajectory:
    """Base-step trajectory: time, measured output, true state and plant input."""

    time: np.ndarray
    measured: np.ndarray
    state: np.ndarray
    applied: np.ndarray


def run_open_loop(config: SimulatorConfig, schedule) -> Trajectory:
    """Drive the plant through ``schedule`` of ``(value, duration)`` pairs.

    Row 0 is the initial sample (applied input 0); one row per base step follows.
    """
    sim = reset(config)
    times = [0.0]
    measured = [sim.measured_output()]
    states = [sim.x.copy()]
    applied = [0.0]
    for value, duration in schedule:
        n = steps_of(duration, config.base_step, "schedule duration")
        if n < 0:
            raise ValueError("schedule durations must be non-negative")
        for _ in range(n):
            applied.append(sim.sub_step(value))
            times.append(sim.clock)
            measured.append(sim.measured_output())
            states.append(sim.x.copy())
    return Trajectory(
        time=np.array(times),
        measured=np.array(measured),
        state=np.array(states),
        applied=np.array(applied),
    )


def sample_outputs(config: SimulatorConfig, inputs, h: float) -> np.ndarray:
    """Measured outputs at agent instants ``0, h, 2h, ...`` under ZOH commands."""
    sim = reset(config)
    ys = [sim.measured_output()]
    for u in inputs:
        ys.append(sim.step(float(u), h))
    return np.array(ys)
