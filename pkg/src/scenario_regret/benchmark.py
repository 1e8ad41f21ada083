"""Clairvoyant (noncausal) optimal policy for a known parameter realization."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .errors import DimensionMismatch, DomainError, NumericalFailure
from .lifted import ResponseOperators, ScenarioSample

PSD_TOL = 1e-9
RESIDUAL_TOL = 1e-8


def _sym_sqrt(M: np.ndarray, clip: bool) -> np.ndarray:
    vals, vecs = np.linalg.eigh(M)
    if clip:
        vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


@dataclass(frozen=True)
class CostWeights:
    """Quadratic stage weights over the stacked trajectories.

    ``Q`` must be symmetric positive semidefinite (eigenvalues down to -1e-9
    are clipped to zero) and ``R`` symmetric positive definite.
    """

    Q: np.ndarray
    R: np.ndarray
    sqrtQ: np.ndarray = field(init=False, repr=False)
    sqrtR: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        R = np.atleast_2d(np.asarray(self.R, dtype=float))
        for name, M in (("Q", Q), ("R", R)):
            if M.shape[0] != M.shape[1]:
                raise DimensionMismatch(f"{name} must be square")
            if not np.allclose(M, M.T, rtol=0, atol=PSD_TOL * max(1.0, np.abs(M).max())):
                raise DomainError(f"{name} must be symmetric")
        Q = (Q + Q.T) / 2
        R = (R + R.T) / 2
        q_vals, q_vecs = np.linalg.eigh(Q)
        if q_vals.size and q_vals[0] < -PSD_TOL:
            raise DomainError("Q must be positive semidefinite")
        if q_vals.size and q_vals[0] < 0:
            Q = (q_vecs * np.clip(q_vals, 0, None)) @ q_vecs.T
        if np.linalg.eigvalsh(R)[0] < PSD_TOL:
            raise DomainError("R must be positive definite")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "sqrtQ", _sym_sqrt(Q, clip=True))
        object.__setattr__(self, "sqrtR", _sym_sqrt(R, clip=False))

    @classmethod
    def identity(cls, n: int, m: int, T: int) -> "CostWeights":
        return cls(np.eye(n * T), np.eye(m * T))

    def scaled(self, alpha: float) -> "CostWeights":
        return CostWeights(alpha * self.Q, alpha * self.R)

    def check(self, resp: ResponseOperators) -> None:
        if self.Q.shape[0] != resp.F.shape[0] or self.R.shape[0] != resp.F.shape[1]:
            raise DimensionMismatch(
                f"weights sized {self.Q.shape[0]}/{self.R.shape[0]} do not match "
                f"state/input lengths {resp.F.shape}"
            )


@dataclass(frozen=True)
class ClairvoyantBenchmark:
    Psi_u: np.ndarray
    Psi_x: np.ndarray
    sample: ScenarioSample | None
    # upper Cholesky factor U with U.T @ U = R + F'QF
    hessian_factor: np.ndarray | None = field(repr=False, default=None)


def clairvoyant_policy(resp: ResponseOperators, weights: CostWeights) -> ClairvoyantBenchmark:
    """Optimal input map in hindsight, ``Psi_u = -(R + F'QF)^{-1} F'QG``."""
    weights.check(resp)
    F, G = resp.F, resp.G
    QF = weights.Q @ F
    H = weights.R + F.T @ QF
    H = (H + H.T) / 2
    rhs = -(QF.T @ G)
    try:
        factor = cho_factor(H, lower=False)
    except LinAlgError as exc:
        raise NumericalFailure(f"Cholesky factorization failed: {exc}") from exc
    Psi_u = cho_solve(factor, rhs)
    residual = np.abs(H @ Psi_u - rhs).max() if rhs.size else 0.0
    scale = max(1.0, np.abs(rhs).max() if rhs.size else 0.0)
    if not np.isfinite(residual) or residual > RESIDUAL_TOL * scale:
        raise NumericalFailure(f"normal-equation residual {residual:.3e} exceeds tolerance")
    U = np.triu(factor[0])
    return ClairvoyantBenchmark(Psi_u=Psi_u, Psi_x=F @ Psi_u + G, sample=resp.sample, hessian_factor=U)


def benchmark_cost(bench: ClairvoyantBenchmark, weights: CostWeights, w: np.ndarray) -> float:
    w = np.asarray(w, dtype=float).reshape(-1)
    if w.size != bench.Psi_u.shape[1]:
        raise DimensionMismatch(f"w has length {w.size}, expected {bench.Psi_u.shape[1]}")
    x = weights.sqrtQ @ (bench.Psi_x @ w)
    u = weights.sqrtR @ (bench.Psi_u @ w)
    return float(x @ x + u @ u)
