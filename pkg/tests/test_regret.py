import numpy as np
import pytest
from hypothesis import given, strategies as st

from scenario_regret.benchmark import CostWeights, benchmark_cost, clairvoyant_policy
from scenario_regret.errors import SampleMismatch
from scenario_regret.lifted import ScenarioSample, lift, simulate
from scenario_regret.regret import (CausalPolicy, RegretGram, cost_gram, per_instance_regret, realized_cost,
                                    regret_gram, regret_gram_factored, worst_case_cost, worst_case_regret)

from conftest import random_causal, random_instance, random_weights, scalar_system


def test_scalar_examples(scalar):
    _, _, resp, weights, bench = scalar
    zero = np.zeros((2, 2))
    assert realized_cost(zero, resp, weights, [0, 0]) == 0
    assert realized_cost(zero, resp, weights, [1, 0]) == pytest.approx(2.0)
    assert per_instance_regret(zero, bench, resp, weights, [1, 0]) == pytest.approx(0.5)
    assert per_instance_regret(zero, bench, resp, weights, [0, 0]) == 0
    assert per_instance_regret(bench.Psi_u, bench, resp, weights, [0.3, -2]) == pytest.approx(0, abs=1e-14)
    D = regret_gram(zero, bench, resp, weights).Delta
    assert np.allclose(D, [[0.5, 0.5], [0.5, 0.5]], atol=1e-14)
    lam, v = worst_case_regret(RegretGram(D))
    assert lam == pytest.approx(1.0)
    assert np.allclose(v, np.array([1, 1]) / np.sqrt(2))
    lam_c, _ = worst_case_cost(zero, resp, weights)
    assert lam_c == pytest.approx((3 + np.sqrt(5)) / 2)


def test_zero_gram():
    lam, v = worst_case_regret(RegretGram(np.zeros((3, 3))))
    assert lam == 0 and np.linalg.norm(v) == pytest.approx(1)


def test_sample_mismatch(scalar):
    system, _, resp, weights, _ = scalar
    other = lift(system, ScenarioSample([[0.5], [0.5]]))
    bench_other = clairvoyant_policy(other, weights)
    with pytest.raises(SampleMismatch):
        per_instance_regret(np.zeros((2, 2)), bench_other, resp, weights, [1, 0])


def test_causal_policy_rejects_noncausal():
    with pytest.raises(ValueError):
        CausalPolicy(np.ones((2, 2)), 1, 1, 1, 2)
    pol = CausalPolicy(np.array([[1.0, 0], [2, 3]]), 1, 1, 1, 2)
    assert not pol.Phi_u.flags.writeable


def _random_case(rng):
    system, sample = random_instance(rng)
    resp = lift(system, sample)
    weights = random_weights(rng, system.n, system.m, system.T)
    bench = clairvoyant_policy(resp, weights)
    Phi = random_causal(rng, system.n, system.m, system.p, system.T)
    return system, resp, weights, bench, Phi


def test_quadratic_form_equivalence():
    rng = np.random.default_rng(7)
    for _ in range(50):
        system, resp, weights, bench, Phi = _random_case(rng)
        D = regret_gram(Phi, bench, resp, weights).Delta
        D2 = regret_gram_factored(Phi, bench).Delta
        assert np.allclose(D, D.T, atol=1e-12)
        scale = max(1.0, np.abs(D).max())
        assert np.abs(D - D2).max() <= 1e-9 * scale
        for _ in range(10):
            w = rng.standard_normal(resp.nw)
            r = per_instance_regret(Phi, bench, resp, weights, w)
            assert w @ D @ w == pytest.approx(r, rel=1e-9, abs=1e-9 * scale)
            # regret >= -benchmark cost (and >= 0 here since the benchmark is optimal)
            assert r >= -1e-9 * scale


def test_realized_cost_matches_simulation():
    rng = np.random.default_rng(8)
    for _ in range(30):
        system, resp, weights, _, Phi = _random_case(rng)
        w = rng.standard_normal(resp.nw)
        u = Phi @ w
        x = simulate(resp.stacked, u, w)
        direct = x @ weights.Q @ x + u @ weights.R @ u
        assert realized_cost(Phi, resp, weights, w) == pytest.approx(direct, rel=1e-10, abs=1e-10)


def test_rayleigh_bound():
    rng = np.random.default_rng(9)
    system, resp, weights, bench, Phi = _random_case(rng)
    gram = regret_gram(Phi, bench, resp, weights)
    lam, v = worst_case_regret(gram)
    assert v @ gram.Delta @ v == pytest.approx(lam, abs=1e-9 * max(1, lam))
    W = rng.standard_normal((resp.nw, 1000))
    W /= np.linalg.norm(W, axis=0)
    assert np.all(np.einsum("ij,ik,kj->j", W, gram.Delta, W) <= lam + 1e-9)


def test_worst_case_cost_sampling():
    rng = np.random.default_rng(10)
    system, resp, weights, bench, Phi = _random_case(rng)
    lam, v = worst_case_cost(Phi, resp, weights)
    W = rng.standard_normal((resp.nw, 10_000))
    W /= np.linalg.norm(W, axis=0)
    M = cost_gram(Phi, resp, weights)
    sampled = np.einsum("ij,ik,kj->j", W, M, W).max()
    assert sampled <= lam + 1e-9
    if resp.nw <= 3:
        assert sampled >= 0.99 * lam
    assert realized_cost(Phi, resp, weights, v) == pytest.approx(lam, rel=1e-9)


@given(st.floats(0.1, 10.0), st.integers(0, 10_000))
def test_scale_covariance(alpha, seed):
    rng = np.random.default_rng(seed)
    system, resp, weights, bench, Phi = _random_case(rng)
    w2 = weights.scaled(alpha)
    bench2 = clairvoyant_policy(resp, w2)
    D1 = regret_gram(Phi, bench, resp, weights).Delta
    D2 = regret_gram(Phi, bench2, resp, w2).Delta
    assert np.allclose(D2, alpha * D1, rtol=1e-7, atol=1e-8 * max(1, np.abs(D1).max()) * alpha)
    l1, v1 = worst_case_regret(RegretGram(D1))
    l2, v2 = worst_case_regret(RegretGram(D2))
    assert l2 == pytest.approx(alpha * l1, rel=1e-7, abs=1e-9)
    vals = np.linalg.eigvalsh(D1)
    if vals.size > 1 and vals[-1] - vals[-2] > 1e-3 * max(1, abs(vals[-1])):
        assert min(np.abs(v1 - v2).max(), np.abs(v1 + v2).max()) <= 1e-5
