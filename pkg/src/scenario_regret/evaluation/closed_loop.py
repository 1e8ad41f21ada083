"""Step-by-step closed-loop simulation and the maps that go with it."""

from __future__ import annotations

import numpy as np

from ..errors import DimensionMismatch, InconsistentTrajectory, NotSquare, SingularMap
from ..lifted import ResponseOperators, ScenarioSample, UncertainSystem, disturbance_blocks, stack_dynamics
from ..regret import CausalPolicy
from ..structure import NONCAUSAL, column_offsets

RECONSTRUCT_TOL = 1e-6
COND_LIMIT = 1e12


def _gain(policy) -> tuple[np.ndarray, bool]:
    if isinstance(policy, CausalPolicy):
        return policy.Phi_u, policy.structure != NONCAUSAL
    return np.asarray(policy, dtype=float), False


def simulate_closed_loop(policy, system: UncertainSystem, sample: ScenarioSample, w):
    """Run ``x_{t+1} = A_t x_t + B_t u_t + E_t w_t`` with ``u = Phi_u w``.

    A causal policy only sees ``x_0, w_0..w_{t-1}`` when choosing ``u_t``; a
    plain array or a ``noncausal`` policy is applied to the whole sequence.
    Returns ``(x, u)`` with shapes ``(T, n)`` and ``(T, m)``.
    """
    n, m, p, T = system.n, system.m, system.p, system.T
    Phi_u, causal = _gain(policy)
    w = np.asarray(w, dtype=float).reshape(-1)
    nw = n + p * (T - 1)
    if w.size != nw:
        raise DimensionMismatch(f"w has length {w.size}, expected {nw}")
    if Phi_u.shape != (m * T, nw):
        raise DimensionMismatch(f"Phi_u has shape {Phi_u.shape}, expected {(m * T, nw)}")
    offs = column_offsets(n, p, T)
    blocks = disturbance_blocks(n, p, T)
    x = np.zeros((T, n))
    u = np.zeros((T, m))
    x[0] = w[blocks[0]]
    for t in range(T):
        rows = Phi_u[t * m:(t + 1) * m]
        # revealed information at time t: x_0 and w_0..w_{t-1}
        u[t] = rows[:, :offs[t + 1]] @ w[:offs[t + 1]] if causal else rows @ w
        if t + 1 < T:
            A, B, E = system.matrices(t, sample.theta[t])
            x[t + 1] = A @ x[t] + B @ u[t] + E @ w[blocks[t + 1]]
    return x, u


def reconstruct_disturbance(system: UncertainSystem, sample: ScenarioSample, x, u) -> np.ndarray:
    """Recover ``w_0..w_{T-2}`` (shape ``(T-1, p)``) from state and input trajectories."""
    n, m, p, T = system.n, system.m, system.p, system.T
    x = np.asarray(x, dtype=float).reshape(T, n)
    u = np.asarray(u, dtype=float).reshape(T, m)
    out = np.zeros((T - 1, p))
    for t in range(T - 1):
        A, B, E = system.matrices(t, sample.theta[t])
        rhs = x[t + 1] - A @ x[t] - B @ u[t]
        wt, *_ = np.linalg.lstsq(E, rhs, rcond=None)
        resid = np.abs(E @ wt - rhs).max(initial=0.0)
        if resid > RECONSTRUCT_TOL * max(1.0, np.abs(rhs).max(initial=0.0)):
            raise InconsistentTrajectory(f"step {t}: residual {resid:.3e} outside the range of E_t")
        out[t] = wt
    return out


def stack_disturbance(x0, tail) -> np.ndarray:
    """``(x_0, w_0, ..., w_{T-2})`` as one vector."""
    return np.concatenate([np.asarray(x0, dtype=float).reshape(-1), np.asarray(tail, dtype=float).reshape(-1)])


def realize_state_feedback(policy, resp: ResponseOperators) -> np.ndarray:
    """``K = Phi_u Phi_x^{-1}`` so that ``u = K x`` reproduces the policy."""
    n, m, p, T = resp.dims
    if p != n:
        raise NotSquare(f"state feedback needs p == n (got n={n}, p={p})")
    Phi_u, _ = _gain(policy)
    Phi_x = resp.F @ Phi_u + resp.G
    cond = np.linalg.cond(Phi_x)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularMap(f"closed-loop state map has condition number {cond:.3e}")
    K = np.linalg.solve(Phi_x.T, Phi_u.T).T
    return K


def closed_loop_maps(policy, resp: ResponseOperators) -> tuple[np.ndarray, np.ndarray]:
    Phi_u, _ = _gain(policy)
    return resp.F @ Phi_u + resp.G, Phi_u


def lifted_trajectory(policy, system: UncertainSystem, sample: ScenarioSample, w):
    """Same trajectories as :func:`simulate_closed_loop`, through the lifted maps."""
    from ..lifted import response_operators

    resp = response_operators(stack_dynamics(system, sample))
    Phi_x, Phi_u = closed_loop_maps(policy, resp)
    w = np.asarray(w, dtype=float).reshape(-1)
    return (Phi_x @ w).reshape(system.T, system.n), (Phi_u @ w).reshape(system.T, system.m)
