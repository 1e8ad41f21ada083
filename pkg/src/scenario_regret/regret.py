"""Realized cost, regret quadratic forms and worst-case disturbances."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .benchmark import ClairvoyantBenchmark, CostWeights
from .errors import DimensionMismatch, EigenFailure, SampleMismatch
from .lifted import ResponseOperators
from .structure import FULL, NONCAUSAL, apply_structure, causal_mask, normalize_structure


@dataclass(frozen=True)
class CausalPolicy:
    """Disturbance-feedback gain ``u = Phi_u w``.

    Construction rejects gains that violate the declared structure, so a
    ``CausalPolicy`` always has exact zeros above the block diagonal.  The
    ``noncausal`` tag exists only to evaluate benchmark maps with the same
    code paths.
    """

    Phi_u: np.ndarray
    n: int
    m: int
    p: int
    T: int
    structure: str = FULL

    def __post_init__(self):
        Phi = np.array(self.Phi_u, dtype=float)
        shape = (self.m * self.T, self.n + self.p * (self.T - 1))
        if Phi.shape != shape:
            raise DimensionMismatch(f"Phi_u has shape {Phi.shape}, expected {shape}")
        if self.structure != NONCAUSAL:
            structure = normalize_structure(self.structure)
            object.__setattr__(self, "structure", structure)
            if np.any(Phi[~causal_mask(self.n, self.m, self.p, self.T)] != 0):
                raise ValueError("Phi_u has nonzero entries outside the causal pattern")
            if structure != FULL:
                param = apply_structure(self.n, self.m, self.p, self.T, structure)
                if not param.is_member(Phi, atol=1e-12 * max(1.0, np.abs(Phi).max())):
                    raise ValueError(f"Phi_u does not have {structure} structure")
        Phi.setflags(write=False)
        object.__setattr__(self, "Phi_u", Phi)

    @classmethod
    def for_response(cls, Phi_u, resp: ResponseOperators, structure: str = FULL) -> "CausalPolicy":
        n, m, p, T = resp.dims
        return cls(Phi_u, n, m, p, T, structure)

    @classmethod
    def zeros(cls, n: int, m: int, p: int, T: int) -> "CausalPolicy":
        return cls(np.zeros((m * T, n + p * (T - 1))), n, m, p, T)


@dataclass(frozen=True)
class RegretGram:
    Delta: np.ndarray


def _gain(policy) -> np.ndarray:
    return policy.Phi_u if isinstance(policy, CausalPolicy) else np.asarray(policy, dtype=float)


def _check_sample(bench: ClairvoyantBenchmark, resp: ResponseOperators) -> None:
    if bench.sample is None and resp.sample is None:
        return
    if bench.sample is None or not bench.sample.same_as(resp.sample):
        raise SampleMismatch("benchmark and response operators come from different samples")


def _stacked_maps(Phi_u: np.ndarray, resp: ResponseOperators, weights: CostWeights) -> np.ndarray:
    if Phi_u.shape != (resp.F.shape[1], resp.G.shape[1]):
        raise DimensionMismatch(f"Phi_u has shape {Phi_u.shape}")
    weights.check(resp)
    return np.vstack([weights.sqrtQ @ (resp.F @ Phi_u + resp.G), weights.sqrtR @ Phi_u])


def _check_w(w, nw: int) -> np.ndarray:
    w = np.asarray(w, dtype=float).reshape(-1)
    if w.size != nw:
        raise DimensionMismatch(f"w has length {w.size}, expected {nw}")
    return w


def realized_cost(policy, resp: ResponseOperators, weights: CostWeights, w) -> float:
    Phi_u = _gain(policy)
    w = _check_w(w, resp.nw)
    u = Phi_u @ w
    x = resp.F @ u + resp.G @ w
    if u.size != weights.R.shape[0] or x.size != weights.Q.shape[0]:
        raise DimensionMismatch("weights do not match trajectory lengths")
    qx = weights.sqrtQ @ x
    ru = weights.sqrtR @ u
    return float(qx @ qx + ru @ ru)


def per_instance_regret(policy, bench: ClairvoyantBenchmark, resp: ResponseOperators,
                        weights: CostWeights, w) -> float:
    _check_sample(bench, resp)
    w = _check_w(w, resp.nw)
    qx = weights.sqrtQ @ (bench.Psi_x @ w)
    ru = weights.sqrtR @ (bench.Psi_u @ w)
    return realized_cost(policy, resp, weights, w) - float(qx @ qx + ru @ ru)


def benchmark_maps(bench: ClairvoyantBenchmark, weights: CostWeights) -> np.ndarray:
    """``N = [sqrtQ Psi_x; sqrtR Psi_u]``."""
    return np.vstack([weights.sqrtQ @ bench.Psi_x, weights.sqrtR @ bench.Psi_u])


def regret_gram(policy, bench: ClairvoyantBenchmark, resp: ResponseOperators,
                weights: CostWeights) -> RegretGram:
    """``Delta = M'M - N'N`` so that the regret at ``w`` equals ``w' Delta w``."""
    _check_sample(bench, resp)
    M = _stacked_maps(_gain(policy), resp, weights)
    N = benchmark_maps(bench, weights)
    Delta = M.T @ M - N.T @ N
    return RegretGram((Delta + Delta.T) / 2)


def regret_gram_factored(policy, bench: ClairvoyantBenchmark) -> RegretGram:
    """Same matrix via ``(Phi_u - Psi_u)' (R + F'QF) (Phi_u - Psi_u)``.

    Exact because the benchmark minimizes a strictly convex quadratic; this
    form is PSD by construction and cheaper to evaluate in bulk.
    """
    X = bench.hessian_factor @ (_gain(policy) - bench.Psi_u)
    return RegretGram(X.T @ X)


def _canonical_sign(v: np.ndarray) -> np.ndarray:
    nz = np.flatnonzero(np.abs(v) > 1e-12 * max(np.abs(v).max(initial=0.0), 1e-300))
    if nz.size and v[nz[0]] < 0:
        return -v
    return v


def top_eigenpair(S: np.ndarray) -> tuple[float, np.ndarray]:
    S = (S + S.T) / 2
    try:
        vals, vecs = np.linalg.eigh(S)
    except np.linalg.LinAlgError as exc:
        raise EigenFailure(str(exc)) from exc
    if not np.all(np.isfinite(vals)):
        raise EigenFailure("eigensolver returned non-finite values")
    return float(vals[-1]), _canonical_sign(vecs[:, -1])


def worst_case_regret(gram: RegretGram) -> tuple[float, np.ndarray]:
    """Largest eigenvalue of ``Delta`` and its unit eigenvector."""
    return top_eigenpair(gram.Delta)


def cost_gram(policy, resp: ResponseOperators, weights: CostWeights) -> np.ndarray:
    M = _stacked_maps(_gain(policy), resp, weights)
    return M.T @ M


def worst_case_cost(policy, resp: ResponseOperators, weights: CostWeights) -> tuple[float, np.ndarray]:
    return top_eigenpair(cost_gram(policy, resp, weights))
