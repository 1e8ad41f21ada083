"""Uncertain mass-spring-damper benchmark system."""

from __future__ import annotations

from typing import Callable

import numpy as np

from ..benchmark import CostWeights
from ..lifted import ScenarioSample, UncertainSystem

Sampler = Callable[[np.random.Generator], ScenarioSample]


def mass_spring_damper(T: int = 20, mass: float = 1.0, k: float = 1.0, c: float = 1.0,
                       Ts: float = 1.0) -> UncertainSystem:
    """Forward-Euler mass-spring-damper with ``theta_t = (delta_k, delta_c)``.

    The disturbance enters every state directly (``E = I``).
    """

    def dynamics(t, theta):
        dk, dc = float(theta[0]), float(theta[1])
        A = np.array([[1.0, Ts], [-(k + dk) * Ts / mass, 1.0 - (c + dc) * Ts / mass]])
        B = np.array([[0.0], [Ts / mass]])
        return A, B, np.eye(2)

    return UncertainSystem(n=2, m=1, p=2, d=2, T=T, dynamics=dynamics, name="mass_spring_damper")


def msd_weights(T: int = 20) -> CostWeights:
    return CostWeights(np.kron(np.eye(T), np.eye(2)), np.eye(T))


def uniform_constant_sampler(low, high, T: int) -> Sampler:
    """Parameters drawn once per sample and held over the horizon."""
    low = np.asarray(low, dtype=float)
    high = np.asarray(high, dtype=float)

    def draw(rng: np.random.Generator) -> ScenarioSample:
        return ScenarioSample.constant(rng.uniform(low, high), T)

    return draw


def msd_sampler(T: int = 20, bound: float = 0.2) -> Sampler:
    return uniform_constant_sampler([-bound, -bound], [bound, bound], T)
