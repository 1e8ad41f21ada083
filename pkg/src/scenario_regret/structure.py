"""Sparsity and parameter-tying patterns for disturbance-feedback gains.

``Phi_u`` has block rows ``t = 0..T-1`` (height ``m``) and block columns
``j = 0..T-1`` where column 0 multiplies ``x_0`` (width ``n``) and column
``j >= 1`` multiplies ``w_{j-1}`` (width ``p``).  Causality keeps block
``(t, j)`` iff ``j <= t``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import DimensionMismatch, DomainError

FULL = "full-causal"
TOEPLITZ = "block-toeplitz-causal"
NONCAUSAL = "noncausal"

_ALIASES = {
    "full": FULL,
    "full-causal": FULL,
    "toeplitz": TOEPLITZ,
    "block-toeplitz": TOEPLITZ,
    "block-toeplitz-causal": TOEPLITZ,
}


def normalize_structure(structure: str) -> str:
    try:
        return _ALIASES[structure.lower()]
    except (KeyError, AttributeError):
        raise DomainError(f"unknown policy structure {structure!r}") from None


def short_name(structure: str) -> str:
    return {FULL: "full", TOEPLITZ: "toeplitz"}.get(structure, structure)


def column_offsets(n: int, p: int, T: int) -> np.ndarray:
    """Start index of every block column plus the total width."""
    return np.concatenate([[0], n + p * np.arange(T)])


def causal_mask(n: int, m: int, p: int, T: int) -> np.ndarray:
    """Boolean ``(mT, n + p(T-1))`` mask of entries a causal gain may use."""
    offs = column_offsets(n, p, T)
    mask = np.zeros((m * T, offs[-1]), dtype=bool)
    for t in range(T):
        mask[t * m:(t + 1) * m, : offs[t + 1]] = True
    return mask


@dataclass(frozen=True)
class PolicyParametrization:
    """Linear map from free parameters ``phi`` to ``Phi_u``.

    ``groups[k]`` lists the row-major flat indices of ``Phi_u`` that share
    parameter ``k``.  Entries outside every group are structurally zero.
    """

    n: int
    m: int
    p: int
    T: int
    structure: str
    groups: tuple = field(repr=False)
    basis: sp.csr_matrix = field(repr=False)

    @property
    def shape(self) -> tuple[int, int]:
        return self.m * self.T, self.n + self.p * (self.T - 1)

    @property
    def n_free(self) -> int:
        return len(self.groups)

    def to_matrix(self, phi: np.ndarray) -> np.ndarray:
        phi = np.asarray(phi, dtype=float).reshape(-1)
        if phi.size != self.n_free:
            raise DimensionMismatch(f"expected {self.n_free} parameters, got {phi.size}")
        return (self.basis @ phi).reshape(self.shape)

    def from_matrix(self, Phi_u: np.ndarray) -> np.ndarray:
        """Least-squares parameters for ``Phi_u`` (group averages)."""
        flat = np.asarray(Phi_u, dtype=float).reshape(-1)
        return np.array([flat[g].mean() for g in self.groups])

    def is_member(self, Phi_u: np.ndarray, atol: float = 0.0) -> bool:
        Phi_u = np.asarray(Phi_u, dtype=float)
        if Phi_u.shape != self.shape:
            return False
        return bool(np.abs(self.to_matrix(self.from_matrix(Phi_u)) - Phi_u).max(initial=0.0) <= atol)


def apply_structure(n: int, m: int, p: int, T: int, structure: str = FULL) -> PolicyParametrization:
    """Build the free-parameter map for a causal or block-Toeplitz gain.

    In the Toeplitz case blocks ``(t, j)`` with equal lag ``t - j`` share
    one gain.  The ``x_0`` column joins its diagonal only when ``n == p``;
    otherwise each ``x_0`` block keeps its own gain.
    """
    structure = normalize_structure(structure)
    offs = column_offsets(n, p, T)
    ncols = offs[-1]
    keys: dict[tuple, list[int]] = {}
    for t in range(T):
        for j in range(t + 1):
            width = offs[j + 1] - offs[j]
            for a in range(m):
                row = t * m + a
                for b in range(width):
                    flat = row * ncols + offs[j] + b
                    if structure == FULL:
                        key = (row, offs[j] + b)
                    elif j == 0 and n != p:
                        key = ("x0", t, a, b)
                    else:
                        key = ("lag", t - j, a, b)
                    keys.setdefault(key, []).append(flat)
    groups = tuple(np.array(v, dtype=np.int64) for v in keys.values())
    rows = np.concatenate(groups) if groups else np.zeros(0, dtype=np.int64)
    cols = np.concatenate([np.full(g.size, k) for k, g in enumerate(groups)]) if groups else rows
    basis = sp.csr_matrix(
        (np.ones(rows.size), (rows, cols)), shape=(m * T * ncols, len(groups))
    )
    return PolicyParametrization(n=n, m=m, p=p, T=T, structure=structure, groups=groups, basis=basis)


@dataclass(frozen=True)
class VariableCount:
    structural: int
    closed_form: int
    structure: str

    def as_dict(self) -> dict:
        return {
            "structural": self.structural,
            "closed_form": self.closed_form,
            "structure": self.structure,
            "source": "structural count of free policy entries plus the level variable",
        }


def closed_form_count(n: int, m: int, p: int, T: int, structure: str) -> int:
    """Published closed-form variable counts, kept for cross-reference only."""
    structure = normalize_structure(structure)
    if structure == FULL:
        return 1 + m * (T - 1) * (2 * n + p * (T - 2)) // 2
    return 1 + m * (n + p * (T - 2))


def count_decision_variables(n: int, m: int, p: int, T: int, structure: str = FULL) -> VariableCount:
    param = apply_structure(n, m, p, T, structure)
    return VariableCount(
        structural=1 + param.n_free,
        closed_form=closed_form_count(n, m, p, T, structure),
        structure=param.structure,
    )
