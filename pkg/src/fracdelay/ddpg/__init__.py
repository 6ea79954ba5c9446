from .agent import (
    DESK_HYPER,
    AgentBundle,
    EpisodeLog,
    HyperParams,
    init_agent,
    policy,
    polyak_update,
    select_action,
    train,
    update,
)
from .replay import ReplayBuffer

__all__ = [
    "DESK_HYPER",
    "AgentBundle",
    "EpisodeLog",
    "HyperParams",
    "ReplayBuffer",
    "init_agent",
    "policy",
    "polyak_update",
    "select_action",
    "train",
    "update",
]
