"""Ornstein-Uhlenbeck exploration noise."""

from __future__ import annotations

import math

import numpy as np


class OUNoise:
    """Mean-reverting noise ``n += theta * (mu - n) * dt + sigma * sqrt(dt) * N(0, 1)``."""

    def __init__(self, theta: float, sigma: float, dt: float = 1.0, mu: float = 0.0,
                 size: int = 1):
        self.theta = theta
        self.sigma = sigma
        self.dt = dt
        self.mu = mu
        self.state = np.full(size, mu, dtype=float)

    def reset(self) -> None:
        self.state[:] = self.mu

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        shock = rng.standard_normal(self.state.shape) if self.sigma else 0.0
        self.state = (self.state + self.theta * (self.mu - self.state) * self.dt
                      + self.sigma * math.sqrt(self.dt) * shock)
        return self.state.copy()
