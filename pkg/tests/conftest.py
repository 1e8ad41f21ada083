import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from scenario_regret.benchmark import CostWeights, clairvoyant_policy
from scenario_regret.lifted import ScenarioSample, affine_system, lift
from scenario_regret.structure import causal_mask

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_system(rng, n, m, p, T, d=2, scale=0.5):
    """Affine-in-theta system with moderately stable random data and well-conditioned E."""
    A0 = scale * rng.standard_normal((n, n)) / np.sqrt(n)
    B0 = rng.standard_normal((n, m))
    E0 = np.eye(n, p) + 0.1 * rng.standard_normal((n, p))
    A = [0.1 * rng.standard_normal((n, n)) for _ in range(d)]
    B = [0.1 * rng.standard_normal((n, m)) for _ in range(d)]
    return affine_system(A0, B0, E0, A, B, T=T)


def random_instance(rng, n=None, m=None, p=None, T=None):
    n = n or int(rng.integers(1, 4))
    m = m or int(rng.integers(1, 4))
    p = p or int(rng.integers(1, n + 1))  # p <= n keeps E full column rank
    T = T or int(rng.integers(1, 9))
    system = random_system(rng, n, m, p, T)
    sample = ScenarioSample(rng.uniform(-1, 1, (T, system.d)))
    return system, sample


def random_weights(rng, n, m, T):
    X = rng.standard_normal((n * T, n * T))
    Y = rng.standard_normal((m * T, m * T))
    return CostWeights(X @ X.T / (n * T) + 0.1 * np.eye(n * T), Y @ Y.T / (m * T) + 0.5 * np.eye(m * T))


def random_causal(rng, n, m, p, T, scale=1.0):
    return scale * rng.standard_normal((m * T, n + p * (T - 1))) * causal_mask(n, m, p, T)


def scalar_system(T=2, a=1.0, b=1.0, e=1.0):
    return affine_system([[a]], [[b]], [[e]], T=T, name="scalar")


def scalar_sample(T=2):
    return ScenarioSample(np.zeros((T, 1)))


@pytest.fixture
def scalar():
    system = scalar_system()
    sample = scalar_sample()
    resp = lift(system, sample)
    weights = CostWeights.identity(1, 1, 2)
    return system, sample, resp, weights, clairvoyant_policy(resp, weights)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
