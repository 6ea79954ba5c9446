"""Fractional-delay discretization, altitude simulation and DDPG agents."""

__version__ = "0.1.0"
