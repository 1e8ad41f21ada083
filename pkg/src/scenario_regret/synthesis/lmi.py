"""Per-scenario cone constraints, affine in the free policy parameters.

Decision vector layout: ``x = (gamma, phi_0, ..., phi_{k-1}[, slack])``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp

from ..benchmark import ClairvoyantBenchmark, CostWeights
from ..errors import DimensionMismatch, SampleMismatch
from ..lifted import ResponseOperators, ScenarioSample
from ..regret import benchmark_maps
from ..structure import PolicyParametrization
from .conic import ConeBlock
from .kkt import SchurPattern

STACKED = "stacked"
COMPACT = "compact"


@dataclass(frozen=True)
class VariableLayout:
    n_free: int
    slack: bool = False

    @property
    def gamma(self) -> int:
        return 0

    @property
    def phi(self) -> slice:
        return slice(1, 1 + self.n_free)

    @property
    def slack_index(self) -> int | None:
        return 1 + self.n_free if self.slack else None

    @property
    def size(self) -> int:
        return 1 + self.n_free + int(self.slack)

    def as_dict(self) -> dict:
        out = {"gamma": (0, 1), "phi": (1, 1 + self.n_free)}
        if self.slack:
            out["slack"] = (1 + self.n_free, 2 + self.n_free)
        return out


@dataclass(frozen=True)
class SafetySpec:
    """Polytopic constraints ``H_x x + H_u u <= h`` over ``w = H_w d, ||d|| <= 1``.

    ``evaluate`` maps a scenario to ``(H_x, H_u, h, H_w)``.
    """

    evaluate: Callable[[ScenarioSample], tuple] = field(repr=False)

    @classmethod
    def constant(cls, H_x, H_u, h, H_w=None) -> "SafetySpec":
        H_x = np.atleast_2d(np.asarray(H_x, dtype=float))
        H_u = np.atleast_2d(np.asarray(H_u, dtype=float))
        h = np.asarray(h, dtype=float).reshape(-1)
        H_w = None if H_w is None else np.atleast_2d(np.asarray(H_w, dtype=float))
        return cls(lambda sample: (H_x, H_u, h, H_w))

    def matrices(self, sample: ScenarioSample, resp: ResponseOperators):
        H_x, H_u, h, H_w = self.evaluate(sample)
        H_x = np.atleast_2d(np.asarray(H_x, dtype=float))
        H_u = np.atleast_2d(np.asarray(H_u, dtype=float))
        h = np.asarray(h, dtype=float).reshape(-1)
        H_w = np.eye(resp.nw) if H_w is None else np.atleast_2d(np.asarray(H_w, dtype=float))
        S = h.size
        if H_x.shape != (S, resp.F.shape[0]) or H_u.shape != (S, resp.F.shape[1]) or H_w.shape[0] != resp.nw:
            raise DimensionMismatch("safety matrices do not match the lifted dimensions")
        if not np.all(np.isfinite(h)):
            raise DimensionMismatch("safety offsets must be finite")
        return H_x, H_u, h, H_w


def _pairs(param: PolicyParametrization):
    """Flat positions of every free entry and the parameter it belongs to."""
    flat = np.concatenate(param.groups) if param.groups else np.zeros(0, dtype=np.int64)
    which = np.concatenate([np.full(g.size, k) for k, g in enumerate(param.groups)]) if param.groups else flat
    nw = param.shape[1]
    return flat // nw, flat % nw, which


def schur_block(W: np.ndarray, C: np.ndarray, D: np.ndarray, param: PolicyParametrization,
                layout: VariableLayout, tag: tuple = ()) -> ConeBlock:
    """PSD block ``[[I, W Phi + C], [*, gamma I + D]]`` as an affine cone."""
    r, nw = C.shape
    s = r + nw
    offset = np.zeros((s, s))
    offset[:r, :r] = np.eye(r)
    offset[:r, r:] = C
    offset[r:, :r] = C.T
    offset[r:, r:] = (D + D.T) / 2

    rows_f, cols_f, which = _pairs(param)
    i_idx, pair_idx = np.nonzero(W[:, rows_f])
    vals = W[i_idx, rows_f[pair_idx]]
    a = i_idx
    b = r + cols_f[pair_idx]
    var = layout.phi.start + which[pair_idx]
    diag = r + np.arange(nw)
    vec_rows = np.concatenate([a + b * s, b + a * s, diag + diag * s])
    vec_cols = np.concatenate([var, var, np.full(nw, layout.gamma)])
    data = np.concatenate([vals, vals, np.ones(nw)])
    coeffs = sp.csr_matrix((data, (vec_rows, vec_cols)), shape=(s * s, layout.size))
    pattern = SchurPattern(np.asarray(W, dtype=float), param.basis, layout.phi.start, layout.gamma, r, nw)
    return ConeBlock("psd", s, offset.reshape(-1, order="F"), coeffs, tag, schur=pattern)


def _check(bench: ClairvoyantBenchmark, resp: ResponseOperators) -> None:
    if (bench.sample is not None or resp.sample is not None) and (
        bench.sample is None or not bench.sample.same_as(resp.sample)
    ):
        raise SampleMismatch("benchmark and response operators come from different samples")


def _stacked_factors(resp: ResponseOperators, weights: CostWeights):
    W = np.vstack([weights.sqrtQ @ resp.F, weights.sqrtR])
    C = np.vstack([weights.sqrtQ @ resp.G, np.zeros((resp.F.shape[1], resp.nw))])
    return W, C


def assemble_regret_lmi(param: PolicyParametrization, bench: ClairvoyantBenchmark,
                        resp: ResponseOperators, weights: CostWeights,
                        layout: VariableLayout | None = None, form: str = STACKED,
                        tag: tuple = ()) -> ConeBlock:
    """PSD block encoding ``gamma I - Delta(Phi_u) >= 0`` for one scenario.

    ``form="stacked"`` emits ``[[I, M], [M', gamma I + N'N]]`` with
    ``M = [sqrtQ (F Phi_u + G); sqrtR Phi_u]``.  ``form="compact"`` uses the
    identity ``Delta = (Phi_u - Psi_u)' H (Phi_u - Psi_u)`` with
    ``H = R + F'QF = U'U`` and emits ``[[I, U (Phi_u - Psi_u)], [*, gamma I]]``,
    which has ``nT`` fewer rows.
    """
    _check(bench, resp)
    layout = layout or VariableLayout(param.n_free)
    if form == STACKED:
        W, C = _stacked_factors(resp, weights)
        Nm = benchmark_maps(bench, weights)
        return schur_block(W, C, Nm.T @ Nm, param, layout, tag)
    if form == COMPACT:
        U = bench.hessian_factor
        return schur_block(U, -U @ bench.Psi_u, np.zeros((resp.nw, resp.nw)), param, layout, tag)
    raise ValueError(f"unknown LMI form {form!r}")


def assemble_hinf_lmi(param: PolicyParametrization, bench: ClairvoyantBenchmark | None,
                      resp: ResponseOperators, weights: CostWeights,
                      layout: VariableLayout | None = None, form: str = STACKED,
                      tag: tuple = ()) -> ConeBlock:
    """PSD block encoding ``gamma I - M'M >= 0`` (worst-case cost).

    The compact form needs the benchmark since ``M'M = N'N + Delta``.
    """
    layout = layout or VariableLayout(param.n_free)
    if form == STACKED:
        W, C = _stacked_factors(resp, weights)
        return schur_block(W, C, np.zeros((resp.nw, resp.nw)), param, layout, tag)
    if form == COMPACT:
        if bench is None:
            raise ValueError("compact H-infinity block needs the clairvoyant benchmark")
        _check(bench, resp)
        U = bench.hessian_factor
        Nm = benchmark_maps(bench, weights)
        return schur_block(U, -U @ bench.Psi_u, -(Nm.T @ Nm), param, layout, tag)
    raise ValueError(f"unknown LMI form {form!r}")


def safety_row_maps(safety: SafetySpec, resp: ResponseOperators, sample: ScenarioSample):
    """``(V, V0, h, H_w)`` with ``H_x Phi_x + H_u Phi_u = V Phi_u + V0``."""
    H_x, H_u, h, H_w = safety.matrices(sample, resp)
    return H_x @ resp.F + H_u, H_x @ resp.G, h, H_w


def assemble_safety_soc(param: PolicyParametrization, safety: SafetySpec, resp: ResponseOperators,
                        sample: ScenarioSample, layout: VariableLayout | None = None,
                        tag: tuple = ()) -> list[ConeBlock]:
    """One cone ``||H_w' (V Phi_u + V0)_i'|| <= h_i (+ slack)`` per safety row."""
    layout = layout or VariableLayout(param.n_free)
    V, V0, h, H_w = safety_row_maps(safety, resp, sample)
    rows_f, cols_f, which = _pairs(param)
    q = H_w.shape[1]
    incidence = sp.csr_matrix(
        (np.ones(which.size), (np.arange(which.size), layout.phi.start + which)),
        shape=(which.size, layout.size),
    )
    cones = []
    for i in range(h.size):
        # coefficient of phi-entry at (row, col) on output l: V[i, row] * H_w[col, l]
        per_pair = H_w[cols_f].T * V[i, rows_f]
        lin = sp.csr_matrix(per_pair) @ incidence
        head = sp.csr_matrix(([1.0], ([0], [layout.slack_index])), shape=(1, layout.size)) \
            if layout.slack else sp.csr_matrix((1, layout.size))
        coeffs = sp.vstack([head, lin], format="csr")
        offset = np.concatenate([[h[i]], H_w.T @ V0[i]])
        cones.append(ConeBlock("soc", 1 + q, offset, coeffs, tag + (i,)))
    return cones


def safety_row_values(Phi_u: np.ndarray, safety: SafetySpec, resp: ResponseOperators,
                      sample: ScenarioSample) -> tuple[np.ndarray, np.ndarray]:
    """Worst-case left-hand sides ``||H_w' row_i'||`` and the offsets ``h``."""
    V, V0, h, H_w = safety_row_maps(safety, resp, sample)
    rows = V @ Phi_u + V0
    return np.linalg.norm(rows @ H_w, axis=1), h
