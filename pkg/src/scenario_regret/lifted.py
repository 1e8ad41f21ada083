"""Finite-horizon lifted operators for uncertain linear time-varying systems.

The stacked disturbance is ``w = (x_0, w_0, ..., w_{T-2})`` so its length is
``n + p (T - 1)``.  States and inputs are stacked as ``x = (x_0, ..., x_{T-1})``
and ``u = (u_0, ..., u_{T-1})``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import block_diag

from .errors import DimensionMismatch, RankDeficientE

Dynamics = Callable[[int, np.ndarray], tuple[np.ndarray, np.ndarray, np.ndarray]]

RANK_TOL = 1e-10


@dataclass(frozen=True)
class UncertainSystem:
    """Parameter-to-matrix description ``(t, theta_t) -> (A_t, B_t, E_t)``."""

    n: int
    m: int
    p: int
    d: int
    T: int
    dynamics: Dynamics = field(repr=False)
    name: str = "custom"

    def __post_init__(self):
        for attr in ("n", "m", "p", "d", "T"):
            if int(getattr(self, attr)) < 1:
                raise DimensionMismatch(f"{attr} must be >= 1")

    @property
    def nw(self) -> int:
        """Length of the stacked disturbance vector."""
        return self.n + self.p * (self.T - 1)

    def matrices(self, t: int, theta_t: np.ndarray):
        A, B, E = (np.atleast_2d(np.asarray(M, dtype=float)) for M in self.dynamics(t, theta_t))
        if A.shape != (self.n, self.n) or B.shape != (self.n, self.m) or E.shape != (self.n, self.p):
            raise DimensionMismatch(
                f"dynamics at t={t} returned shapes {A.shape}, {B.shape}, {E.shape}; "
                f"expected {(self.n, self.n)}, {(self.n, self.m)}, {(self.n, self.p)}"
            )
        return A, B, E


def affine_system(A0, B0, E0, A=(), B=(), E=(), T: int = 1, name: str = "affine") -> UncertainSystem:
    """System whose matrices are affine in ``theta_t``.

    ``A0`` may be ``(n, n)`` (shared by every step) or ``(T, n, n)``; the
    sequences ``A``, ``B``, ``E`` hold one coefficient matrix per parameter
    entry with the same convention.  Missing coefficient lists mean the
    matrix does not depend on that parameter.
    """
    A0, B0, E0 = (np.asarray(M, dtype=float) for M in (A0, B0, E0))
    A = [np.asarray(M, dtype=float) for M in A]
    B = [np.asarray(M, dtype=float) for M in B]
    E = [np.asarray(M, dtype=float) for M in E]
    d = max(len(A), len(B), len(E), 1)
    for coeffs in (A, B, E):
        if coeffs and len(coeffs) != d:
            raise DimensionMismatch("coefficient lists must have one entry per parameter")

    def at(M, t):
        return M[t] if M.ndim == 3 else M

    n = at(A0, 0).shape[0]
    m = at(B0, 0).shape[1]
    p = at(E0, 0).shape[1]

    def dynamics(t, theta):
        theta = np.asarray(theta, dtype=float).reshape(-1)
        out = []
        for M0, coeffs in ((A0, A), (B0, B), (E0, E)):
            M = at(M0, t).copy()
            for i, C in enumerate(coeffs):
                M = M + theta[i] * at(C, t)
            out.append(M)
        return tuple(out)

    return UncertainSystem(n=n, m=m, p=p, d=d, T=T, dynamics=dynamics, name=name)


@dataclass(frozen=True)
class ScenarioSample:
    """One realization ``(theta_0, ..., theta_{T-1})`` of the uncertain parameters."""

    theta: np.ndarray

    def __post_init__(self):
        theta = np.atleast_2d(np.asarray(self.theta, dtype=float))
        if not np.all(np.isfinite(theta)):
            raise ValueError("scenario sample contains non-finite entries")
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)

    @classmethod
    def constant(cls, theta, T: int) -> "ScenarioSample":
        theta = np.asarray(theta, dtype=float).reshape(1, -1)
        return cls(np.repeat(theta, T, axis=0))

    def same_as(self, other: "ScenarioSample | None") -> bool:
        return other is not None and (
            other is self
            or (other.theta.shape == self.theta.shape and np.array_equal(other.theta, self.theta))
        )


@dataclass(frozen=True)
class StackedOperators:
    A_blk: np.ndarray
    B_blk: np.ndarray
    E_blk: np.ndarray
    Z: np.ndarray
    n: int
    m: int
    p: int
    T: int
    A_list: tuple = field(repr=False, default=())
    B_list: tuple = field(repr=False, default=())
    E_list: tuple = field(repr=False, default=())
    sample: ScenarioSample | None = field(repr=False, default=None)

    @property
    def nw(self) -> int:
        return self.n + self.p * (self.T - 1)


@dataclass(frozen=True)
class ResponseOperators:
    """Causal maps with ``x = F u + G w``."""

    F: np.ndarray
    G: np.ndarray
    stacked: StackedOperators = field(repr=False)

    @property
    def sample(self) -> ScenarioSample | None:
        return self.stacked.sample

    @property
    def dims(self) -> tuple[int, int, int, int]:
        s = self.stacked
        return s.n, s.m, s.p, s.T

    @property
    def nw(self) -> int:
        return self.stacked.nw


def block_downshift(T: int, n: int) -> np.ndarray:
    """Block matrix with ``I_n`` on the first block sub-diagonal."""
    return np.kron(np.eye(T, k=-1), np.eye(n))


def _rank_ok(E: np.ndarray) -> bool:
    s = np.linalg.svd(E, compute_uv=False)
    return s.size > 0 and s[-1] > RANK_TOL * max(s[0], np.finfo(float).tiny)


def stack_dynamics(system: UncertainSystem, sample: ScenarioSample) -> StackedOperators:
    theta = sample.theta
    if theta.shape[0] != system.T:
        raise DimensionMismatch(f"sample has {theta.shape[0]} steps, horizon is {system.T}")
    if theta.shape[1] != system.d:
        raise DimensionMismatch(f"sample has parameter dimension {theta.shape[1]}, expected {system.d}")
    As, Bs, Es = [], [], []
    for t in range(system.T):
        A, B, E = system.matrices(t, theta[t])
        if not _rank_ok(E):
            raise RankDeficientE(f"E_{t} is not full column rank")
        As.append(A)
        Bs.append(B)
        Es.append(E)
    n = system.n
    return StackedOperators(
        A_blk=block_diag(*As),
        B_blk=block_diag(*Bs),
        E_blk=block_diag(np.eye(n), *Es[: system.T - 1]),
        Z=block_downshift(system.T, n),
        n=n,
        m=system.m,
        p=system.p,
        T=system.T,
        A_list=tuple(As),
        B_list=tuple(Bs),
        E_list=tuple(Es),
        sample=sample,
    )


def _forward_substitute(stacked: StackedOperators, Y: np.ndarray) -> np.ndarray:
    """Solve ``(I - Z A) X = Y`` block row by block row."""
    n = stacked.n
    X = np.array(Y, dtype=float, copy=True)
    for t in range(1, stacked.T):
        X[t * n:(t + 1) * n] += stacked.A_list[t - 1] @ X[(t - 1) * n:t * n]
    return X


def response_operators(stacked: StackedOperators) -> ResponseOperators:
    F = _forward_substitute(stacked, stacked.Z @ stacked.B_blk)
    G = _forward_substitute(stacked, stacked.E_blk)
    return ResponseOperators(F=F, G=G, stacked=stacked)


def lift(system: UncertainSystem, sample: ScenarioSample) -> ResponseOperators:
    """Shortcut for ``response_operators(stack_dynamics(system, sample))``."""
    return response_operators(stack_dynamics(system, sample))


def closed_loop_state_map(resp: ResponseOperators, Phi_u: np.ndarray) -> np.ndarray:
    Phi_u = np.asarray(Phi_u, dtype=float)
    if Phi_u.shape != (resp.F.shape[1], resp.G.shape[1]):
        raise DimensionMismatch(
            f"Phi_u has shape {Phi_u.shape}, expected {(resp.F.shape[1], resp.G.shape[1])}"
        )
    return resp.F @ Phi_u + resp.G


def simulate(stacked: StackedOperators, u: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Open-loop recursion of the state for given stacked ``u`` and ``w``."""
    n, m, p, T = stacked.n, stacked.m, stacked.p, stacked.T
    u = np.asarray(u, dtype=float).reshape(-1)
    w = np.asarray(w, dtype=float).reshape(-1)
    if u.size != m * T or w.size != stacked.nw:
        raise DimensionMismatch("u or w has the wrong length")
    x = np.empty(n * T)
    x[:n] = w[:n]
    for t in range(T - 1):
        wt = w[n + t * p:n + (t + 1) * p]
        x[(t + 1) * n:(t + 2) * n] = (
            stacked.A_list[t] @ x[t * n:(t + 1) * n]
            + stacked.B_list[t] @ u[t * m:(t + 1) * m]
            + stacked.E_list[t] @ wt
        )
    return x


def disturbance_blocks(n: int, p: int, T: int) -> list[slice]:
    """Index ranges of ``x_0, w_0, ..., w_{T-2}`` inside the stacked disturbance."""
    return [slice(0, n)] + [slice(n + j * p, n + (j + 1) * p) for j in range(T - 1)]


def sample_sequence(samples: Sequence[ScenarioSample]) -> list[ScenarioSample]:
    return [s if isinstance(s, ScenarioSample) else ScenarioSample(s) for s in samples]
