"""Step-following environments for the four observation regimes.

case_i    delay-free plant, 5 ms period, observes [z, z_dot, z_ddot]
case_ii   tau_o = 50 ms, 60 ms period, observes the delayed output only
case_iii  tau_o = 50 ms, 60 ms period, observes [delayed output, previous command]
case_iv   tau_i = 50 ms, 60 ms period, observes [output, previous command]
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .lti_core import NOMINAL_TAU, PlantParams
from .plant_sim import DEFAULT_EPISODE, SimulatorConfig, reset, steps_of

REWARD_SCALE = 100.0
VELOCITY_WEIGHT = 0.1


class CaseId(str, Enum):
    CASE_I = "case_i"
    CASE_II = "case_ii"
    CASE_III = "case_iii"
    CASE_IV = "case_iv"

    @classmethod
    def parse(cls, value: "str | CaseId") -> "CaseId":
        if isinstance(value, CaseId):
            return value
        text = str(value).lower().strip()
        aliases = {"i": "case_i", "ii": "case_ii", "iii": "case_iii", "iv": "case_iv"}
        text = aliases.get(text, text)
        return cls(text)

    @property
    def period(self) -> float:
        return 0.005 if self is CaseId.CASE_I else 0.06

    @property
    def uses_prev_input(self) -> bool:
        return self in (CaseId.CASE_III, CaseId.CASE_IV)

    @property
    def obs_width(self) -> int:
        return 4 if self.uses_prev_input else 3

    def training_delays(self, tau: float = NOMINAL_TAU) -> tuple[float, float]:
        """``(tau_i, tau_o)`` of the plant this case is trained on."""
        if self is CaseId.CASE_I:
            return 0.0, 0.0
        if self is CaseId.CASE_IV:
            return tau, 0.0
        return 0.0, tau


def plant_for(case: "CaseId | str", plant: str = "training", tau: float = NOMINAL_TAU,
              base: PlantParams | None = None) -> PlantParams:
    """Plant parameters for ``case`` on the ``training``, ``delayed`` or ``delay_free`` plant.

    The ``delayed`` plant is the case's own delayed plant, or the output-delay
    plant for case_i.
    """
    case = CaseId.parse(case)
    base = base or PlantParams()
    plant = plant.replace("-", "_")
    if plant == "training":
        tau_i, tau_o = case.training_delays(tau)
    elif plant == "delay_free":
        tau_i, tau_o = 0.0, 0.0
    elif plant == "delayed":
        tau_i, tau_o = case.training_delays(tau) if case is not CaseId.CASE_I else (0.0, tau)
    else:
        raise ValueError(f"unknown plant {plant!r}")
    return base.with_delays(tau_i, tau_o)


@dataclass(frozen=True)
class EnvConfig:
    case: CaseId = CaseId.CASE_III
    params: PlantParams | None = None
    z_ref: float = 1.0
    episode_length: float = DEFAULT_EPISODE
    seed: int = 0
    error_coordinates: bool = False
    base_step: float = 0.0005

    def __post_init__(self):
        object.__setattr__(self, "case", CaseId.parse(self.case))
        if self.params is None:
            object.__setattr__(self, "params", plant_for(self.case))

    @property
    def period(self) -> float:
        return self.case.period


@dataclass
class StepResult:
    observation: np.ndarray
    reward: float
    done: bool
    info: dict = field(default_factory=dict)


def reward_from_state(z: float, z_dot: float, z_ref: float = 1.0) -> float:
    return -REWARD_SCALE * math.hypot(z - z_ref, VELOCITY_WEIGHT * z_dot)


class Environment:
    def __init__(self, config: EnvConfig):
        self.config = config
        self.case = config.case
        self.period = config.period
        self.params = config.params
        self.sim_config = SimulatorConfig(
            params=config.params,
            base_step=config.base_step,
            episode_length=config.episode_length,
        )
        self.hold_ticks = steps_of(self.period, config.base_step, "agent period")
        self.n_steps = steps_of(config.episode_length, self.period, "episode length")
        self.rng = np.random.default_rng(config.seed)
        self.sim = None
        self.u_prev = 0.0
        self.k = 0

    @property
    def obs_width(self) -> int:
        return self.case.obs_width

    @property
    def u_max(self) -> float:
        return self.params.u_max

    def _observation(self) -> np.ndarray:
        y = self.sim.measured_output()
        if self.config.error_coordinates:
            y[0] -= self.config.z_ref
        if self.case.uses_prev_input:
            return np.append(y, self.u_prev)
        return y

    def reset(self) -> np.ndarray:
        self.sim = reset(self.sim_config)
        self.u_prev = 0.0
        self.k = 0
        return self._observation()

    def step(self, action: float) -> StepResult:
        if self.sim is None:
            raise RuntimeError("call reset() before step()")
        self.sim.step(float(action), self.period)
        self.u_prev = self.sim.saturate(action)
        self.k += 1
        z, z_dot, _ = self.sim.x
        reward = reward_from_state(z, z_dot, self.config.z_ref)
        done = self.k >= self.n_steps
        return StepResult(
            observation=self._observation(),
            reward=reward,
            done=done,
            info={"state": self.sim.x.copy(), "applied": self.u_prev, "time": self.k * self.period},
        )


def make_env(config: EnvConfig) -> Environment:
    case = config.case
    if case is not CaseId.CASE_I and config.params.total_delay > 0:
        if config.period <= config.params.total_delay:
            raise ValueError(
                f"{case.value}: sampling period {config.period} must exceed the total delay "
                f"{config.params.total_delay}"
            )
    return Environment(config)


def env_reset(env: Environment) -> np.ndarray:
    return env.reset()


def env_step(env: Environment, action: float) -> StepResult:
    return env.step(action)


def make_case_env(case: "CaseId | str", plant: str = "training", seed: int = 0, **kw) -> Environment:
    case = CaseId.parse(case)
    return make_env(EnvConfig(case=case, params=plant_for(case, plant), seed=seed, **kw))


def with_params(config: EnvConfig, **changes) -> EnvConfig:
    return replace(config, params=replace(config.params, **changes))
