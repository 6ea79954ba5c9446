"""Fixed-capacity circular experience replay."""

from __future__ import annotations

import numpy as np


class ReplayBuffer:
    def __init__(self, capacity: int, obs_width: int, dtype=np.float32):
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.obs = np.zeros((capacity, obs_width), dtype=dtype)
        self.action = np.zeros((capacity, 1), dtype=dtype)
        self.reward = np.zeros((capacity, 1), dtype=dtype)
        self.next_obs = np.zeros((capacity, obs_width), dtype=dtype)
        self.done = np.zeros((capacity, 1), dtype=dtype)
        self.inserted = 0

    def __len__(self) -> int:
        return min(self.inserted, self.capacity)

    def add(self, obs, action, reward, next_obs, done) -> None:
        i = self.inserted % self.capacity
        if np.shape(obs)[-1] != self.obs.shape[1] or np.shape(next_obs)[-1] != self.obs.shape[1]:
            raise ValueError("observation width does not match the buffer")
        self.obs[i] = obs
        self.action[i] = action
        self.reward[i] = reward
        self.next_obs[i] = next_obs
        self.done[i] = float(done)
        self.inserted += 1

    def sample_indices(self, batch_size: int, rng: np.random.Generator) -> np.ndarray:
        n = len(self)
        if batch_size > n:
            raise ValueError(f"buffer holds {n} transitions, batch needs {batch_size}")
        return rng.choice(n, size=batch_size, replace=False)

    def sample(self, batch_size: int, rng: np.random.Generator):
        idx = self.sample_indices(batch_size, rng)
        return (self.obs[idx], self.action[idx], self.reward[idx],
                self.next_obs[idx], self.done[idx])
