"""Deep deterministic policy gradient agent and training loop."""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from ._alloc import tune_allocator
from .networks import Actor, Critic
from .noise import OUNoise
from .optim import Adam
from .replay import ReplayBuffer

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class HyperParams:
    polyak: float = 0.005
    discount: float = 0.99
    lr_actor: float = 0.001
    lr_critic: float = 0.002
    buffer_capacity: int = 50000
    batch_size: int = 1024
    ou_theta: float = 0.15
    ou_sigma: float = 0.2  # fraction of u_max
    ou_dt: float = 1.0
    episodes: int = 200
    actor_hidden: tuple[int, ...] = (256, 256)
    critic_state_hidden: tuple[int, ...] = (16, 32)
    critic_action_hidden: tuple[int, ...] = (32,)
    critic_joint_hidden: tuple[int, ...] = (256, 256)
    dtype: str = "float32"

    def __post_init__(self):
        if not 0 < self.polyak <= 1:
            raise ValueError("polyak must lie in (0, 1]")
        if not 0 < self.discount <= 1:
            raise ValueError("discount must lie in (0, 1]")
        if self.buffer_capacity <= 0 or self.batch_size <= 0:
            raise ValueError("buffer capacity and batch size must be positive")
        if self.batch_size > self.buffer_capacity:
            raise ValueError("batch size exceeds buffer capacity")
        for name in ("actor_hidden", "critic_state_hidden", "critic_action_hidden",
                     "critic_joint_hidden"):
            object.__setattr__(self, name, tuple(int(w) for w in getattr(self, name)))
        np.dtype(self.dtype)

    def to_dict(self) -> dict:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "HyperParams":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown hyperparameters: {sorted(unknown)}")
        return cls(**d)


# Reduced networks for single-core reproduction runs.
DESK_HYPER = HyperParams(
    actor_hidden=(64, 64),
    critic_joint_hidden=(64, 64),
)


@dataclass
class AgentBundle:
    actor: Actor
    critic: Critic
    actor_target: Actor
    critic_target: Critic
    actor_opt: Adam
    critic_opt: Adam
    noise: OUNoise
    rng: np.random.Generator
    seed: int
    obs_width: int
    u_max: float
    hyper: HyperParams = field(default_factory=HyperParams)

    @property
    def dtype(self):
        return np.dtype(self.hyper.dtype)


def init_agent(obs_width: int, hyper: HyperParams | None = None, seed: int = 0,
               u_max: float = 6.57) -> AgentBundle:
    hyper = hyper or HyperParams()
    if obs_width <= 0:
        raise ValueError("observation width must be positive")
    rng = np.random.default_rng(seed)
    dtype = np.dtype(hyper.dtype)
    actor = Actor.init(obs_width, hyper.actor_hidden, rng, dtype)
    critic = Critic.init(obs_width, hyper.critic_state_hidden, hyper.critic_action_hidden,
                         hyper.critic_joint_hidden, rng, dtype)
    actor_target, critic_target = actor.copy(), critic.copy()
    return AgentBundle(
        actor=actor,
        critic=critic,
        actor_target=actor_target,
        critic_target=critic_target,
        actor_opt=Adam(actor.params(), hyper.lr_actor),
        critic_opt=Adam(critic.params(), hyper.lr_critic),
        noise=OUNoise(hyper.ou_theta, hyper.ou_sigma * u_max, hyper.ou_dt),
        rng=rng,
        seed=seed,
        obs_width=obs_width,
        u_max=float(u_max),
        hyper=hyper,
    )


def _as_batch(agent: AgentBundle, obs) -> np.ndarray:
    x = np.asarray(obs, dtype=agent.dtype)
    if x.shape[-1] != agent.obs_width:
        raise ValueError(f"observation width {x.shape[-1]} != agent width {agent.obs_width}")
    return x.reshape(-1, agent.obs_width)


def policy(agent: AgentBundle, obs) -> np.ndarray:
    """Noiseless actions in plant units for a batch of observations."""
    return agent.u_max * agent.actor(_as_batch(agent, obs))


def select_action(agent: AgentBundle, obs, explore: bool = False) -> float:
    a = float(policy(agent, obs)[0, 0])
    if explore:
        a += float(agent.noise.sample(agent.rng)[0])
    return a


def polyak_update(target_params, online_params, rho: float) -> None:
    """``target <- rho * online + (1 - rho) * target`` in place."""
    for t, p in zip(target_params, online_params):
        t *= 1 - rho
        t += rho * p


def critic_loss_and_grads(critic: Critic, obs, action, target):
    q, cache = critic.forward(obs, action, keep=True)
    err = q - target
    loss = float(np.mean(err * err))
    grads, _ = critic.backward(cache, (2.0 / len(err)) * err)
    return loss, grads


def actor_objective_and_grads(actor: Actor, critic: Critic, obs, u_max: float):
    """Mean Q(s, u_max * mu(s)) and its gradient with respect to the actor parameters."""
    mu, cache_a = actor.net.forward(obs, keep=True)
    q, cache_c = critic.forward(obs, u_max * mu, keep=True)
    objective = float(np.mean(q))
    dq = np.full_like(q, 1.0 / len(q))
    _, dq_da = critic.backward(cache_c, dq, need_action=True, need_params=False)
    grads, _ = actor.net.backward(cache_a, u_max * dq_da)
    return objective, grads


def update(agent: AgentBundle, buffer: ReplayBuffer) -> tuple[float, float]:
    """One critic step, one actor step and a soft target update."""
    hp = agent.hyper
    if len(buffer) < hp.batch_size:
        raise ValueError(f"replay buffer holds {len(buffer)} < batch size {hp.batch_size}")
    obs, action, reward, next_obs, done = buffer.sample(hp.batch_size, agent.rng)

    next_action = agent.u_max * agent.actor_target(next_obs)
    y = reward + hp.discount * (1 - done) * agent.critic_target(next_obs, next_action)

    critic_loss, grads = critic_loss_and_grads(agent.critic, obs, action, y)
    agent.critic_opt.step(grads)

    objective, grads = actor_objective_and_grads(agent.actor, agent.critic, obs, agent.u_max)
    agent.actor_opt.step([-g for g in grads])

    polyak_update(agent.actor_target.params(), agent.actor.params(), hp.polyak)
    polyak_update(agent.critic_target.params(), agent.critic.params(), hp.polyak)
    return critic_loss, objective


@dataclass
class EpisodeLog:
    episode: int
    episode_return: float
    critic_loss_mean: float
    actor_objective_mean: float
    wall_time: float

    def deterministic_part(self):
        return (self.episode, self.episode_return, self.critic_loss_mean,
                self.actor_objective_mean)


def train(agent: AgentBundle, env, episodes: int | None = None,
          buffer: ReplayBuffer | None = None, callback=None) -> list[EpisodeLog]:
    """Run exploratory episodes, updating once per environment step once the buffer is warm."""
    if env.obs_width != agent.obs_width:
        raise ValueError(f"environment width {env.obs_width} != agent width {agent.obs_width}")
    tune_allocator()
    hp = agent.hyper
    episodes = hp.episodes if episodes is None else episodes
    if buffer is None:
        buffer = ReplayBuffer(hp.buffer_capacity, agent.obs_width, agent.dtype)
    history = []
    start = time.perf_counter()
    for ep in range(episodes):
        obs = env.reset()
        agent.noise.reset()
        ep_return, losses, objectives = 0.0, [], []
        done = False
        while not done:
            action = select_action(agent, obs, explore=True)
            result = env.step(action)
            applied = result.info.get("applied", action)
            buffer.add(obs, applied, result.reward, result.observation, result.done)
            ep_return += result.reward
            if len(buffer) >= hp.batch_size:
                c_loss, objective = update(agent, buffer)
                losses.append(c_loss)
                objectives.append(objective)
            obs = result.observation
            done = result.done
        entry = EpisodeLog(
            episode=ep,
            episode_return=ep_return,
            critic_loss_mean=float(np.mean(losses)) if losses else float("nan"),
            actor_objective_mean=float(np.mean(objectives)) if objectives else float("nan"),
            wall_time=time.perf_counter() - start,
        )
        history.append(entry)
        log.info("episode %d return %.1f critic %.3g", ep, ep_return, entry.critic_loss_mean)
        if callback is not None:
            callback(entry)
    return history
