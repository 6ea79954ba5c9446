"""Agent persistence as a self-describing JSON text container.

Arrays are stored by name with their shape and dtype; values are written as
shortest round-trip decimals so a save/load cycle is bit-exact. Optimizer
moments, the exploration-noise state and the generator state are included so
training can resume exactly.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .agent import AgentBundle, HyperParams, init_agent

FORMAT = "fracdelay-ddpg-agent"
VERSION = 1


class AgentFileError(ValueError):
    """Raised for missing, corrupt or incompatible agent files."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field


def _encode(arr: np.ndarray) -> dict:
    return {"shape": list(arr.shape), "dtype": arr.dtype.name, "data": arr.ravel().tolist()}


def _decode(name: str, blob) -> np.ndarray:
    try:
        shape = tuple(int(s) for s in blob["shape"])
        dtype = np.dtype(blob["dtype"])
        data = np.asarray(blob["data"], dtype=dtype)
    except (KeyError, TypeError, ValueError) as exc:
        raise AgentFileError(f"malformed array ({exc})", name) from None
    if data.size != int(np.prod(shape)):
        raise AgentFileError(f"expected {int(np.prod(shape))} values, found {data.size}", name)
    return data.reshape(shape)


def _param_sets(agent: AgentBundle) -> dict[str, list[tuple[str, np.ndarray]]]:
    ao, co = agent.actor_opt, agent.critic_opt
    actor_names = [n for n, _ in agent.actor.named_params()]
    critic_names = [n for n, _ in agent.critic.named_params()]
    return {
        "online": agent.actor.named_params() + agent.critic.named_params(),
        "target": agent.actor_target.named_params() + agent.critic_target.named_params(),
        "adam_m": list(zip(actor_names, ao.m)) + list(zip(critic_names, co.m)),
        "adam_v": list(zip(actor_names, ao.v)) + list(zip(critic_names, co.v)),
    }


def agent_to_dict(agent: AgentBundle) -> dict:
    return {
        "format": FORMAT,
        "version": VERSION,
        "seed": agent.seed,
        "obs_width": agent.obs_width,
        "u_max": agent.u_max,
        "hyper": agent.hyper.to_dict(),
        "adam_steps": {"actor": agent.actor_opt.t, "critic": agent.critic_opt.t},
        "noise_state": agent.noise.state.tolist(),
        "rng_state": agent.rng.bit_generator.state,
        "arrays": {
            group: {name: _encode(arr) for name, arr in items}
            for group, items in _param_sets(agent).items()
        },
    }


def dumps_agent(agent: AgentBundle) -> str:
    return json.dumps(agent_to_dict(agent), indent=1) + "\n"


def save_agent(agent: AgentBundle, path) -> None:
    """Write atomically: a temp file in the same directory is renamed into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(dumps_agent(agent))
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _require(doc: dict, key: str):
    if key not in doc:
        raise AgentFileError("missing field", key)
    return doc[key]


def agent_from_dict(doc: dict, expected_obs_width: int | None = None) -> AgentBundle:
    if doc.get("format") != FORMAT:
        raise AgentFileError(f"not an agent file (format={doc.get('format')!r})", "format")
    if doc.get("version") != VERSION:
        raise AgentFileError(f"unsupported version {doc.get('version')!r}", "version")
    obs_width = int(_require(doc, "obs_width"))
    if expected_obs_width is not None and obs_width != expected_obs_width:
        raise AgentFileError(
            f"agent observes {obs_width} values but the environment provides {expected_obs_width}",
            "obs_width",
        )
    try:
        hyper = HyperParams.from_dict(_require(doc, "hyper"))
    except (TypeError, ValueError) as exc:
        raise AgentFileError(str(exc), "hyper") from None
    agent = init_agent(obs_width, hyper, seed=int(_require(doc, "seed")),
                       u_max=float(_require(doc, "u_max")))

    arrays = _require(doc, "arrays")
    for group, items in _param_sets(agent).items():
        stored = arrays.get(group)
        if stored is None:
            raise AgentFileError("missing array group", f"arrays.{group}")
        for name, dest in items:
            field = f"arrays.{group}.{name}"
            if name not in stored:
                raise AgentFileError("missing array", field)
            value = _decode(field, stored[name])
            if value.shape != dest.shape:
                raise AgentFileError(f"shape {value.shape} != expected {dest.shape}", field)
            dest[...] = value

    steps = _require(doc, "adam_steps")
    agent.actor_opt.t = int(steps["actor"])
    agent.critic_opt.t = int(steps["critic"])
    agent.noise.state = np.asarray(_require(doc, "noise_state"), dtype=float)
    try:
        agent.rng.bit_generator.state = _require(doc, "rng_state")
    except (TypeError, ValueError, KeyError) as exc:
        raise AgentFileError(str(exc), "rng_state") from None
    return agent


def load_agent(path, expected_obs_width: int | None = None) -> AgentBundle:
    path = Path(path)
    if not path.exists():
        raise AgentFileError(f"no such file {str(path)!r}", "path")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise AgentFileError(f"invalid JSON ({exc})", "file") from None
    return agent_from_dict(doc, expected_obs_width)
