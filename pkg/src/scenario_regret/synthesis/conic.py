"""Backend-agnostic description of a linear conic program.

Every cone constraint is stored as ``offset + coeffs @ x in K``.  PSD blocks
use the full column-major vectorization of an ``s x s`` symmetric matrix;
second-order cones are ``(t, a)`` with ``||a||_2 <= t``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

SCHEMA_VERSION = 1


@dataclass
class ConeBlock:
    kind: str  # "psd" | "soc" | "nonneg"
    dim: int  # matrix order for psd, vector length otherwise
    offset: np.ndarray
    coeffs: sp.csr_matrix
    tag: tuple = ()
    schur: object = field(default=None, repr=False, compare=False)  # optional solver hint

    @property
    def rows(self) -> int:
        return self.dim * self.dim if self.kind == "psd" else self.dim

    def value(self, x: np.ndarray) -> np.ndarray:
        v = self.offset + self.coeffs @ x
        if self.kind == "psd":
            return v.reshape(self.dim, self.dim, order="F")
        return v

    def margin(self, x: np.ndarray) -> float:
        """Signed distance-like feasibility measure; negative means violated."""
        v = self.value(x)
        if self.kind == "psd":
            return float(np.linalg.eigvalsh((v + v.T) / 2)[0])
        if self.kind == "soc":
            return float(v[0] - np.linalg.norm(v[1:]))
        return float(v.min(initial=np.inf))


@dataclass
class ConicProgramDescription:
    """``minimize c @ x`` subject to a list of cone memberships."""

    n_vars: int
    objective: np.ndarray
    cones: list = field(default_factory=list)
    variables: dict = field(default_factory=dict)  # name -> (start, stop)

    def add(self, cone: ConeBlock) -> None:
        if cone.coeffs.shape != (cone.rows, self.n_vars):
            raise ValueError(f"cone coefficients have shape {cone.coeffs.shape}")
        self.cones.append(cone)

    def cones_of(self, kind: str) -> list:
        return [c for c in self.cones if c.kind == kind]

    def ordered(self) -> list:
        """Cones grouped nonneg, soc, psd (the order every backend expects)."""
        return self.cones_of("nonneg") + self.cones_of("soc") + self.cones_of("psd")

    @property
    def psd_block_sizes(self) -> list[int]:
        return [c.dim for c in self.cones_of("psd")]

    def min_margin(self, x: np.ndarray) -> dict:
        out = {}
        for kind in ("psd", "soc", "nonneg"):
            cs = self.cones_of(kind)
            if cs:
                out[kind] = min(c.margin(x) for c in cs)
        return out

    def to_dict(self) -> dict:
        """JSON-ready form; every affine map is written as a dense nested list."""
        return {
            "schema_version": SCHEMA_VERSION,
            "n_vars": self.n_vars,
            "objective": self.objective.tolist(),
            "variables": {k: list(v) for k, v in self.variables.items()},
            "cones": [
                {
                    "kind": c.kind,
                    "dim": c.dim,
                    "tag": list(c.tag),
                    "offset": np.asarray(c.offset).tolist(),
                    "coeffs": c.coeffs.toarray().tolist(),
                }
                for c in self.cones
            ],
        }

    def to_json(self, path=None, **kwargs) -> str:
        text = json.dumps(self.to_dict(), **kwargs)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_dict(cls, data: dict) -> "ConicProgramDescription":
        if data.get("schema_version") != SCHEMA_VERSION:
            raise ValueError("unsupported conic program schema version")
        prog = cls(
            n_vars=int(data["n_vars"]),
            objective=np.asarray(data["objective"], dtype=float),
            variables={k: tuple(v) for k, v in data.get("variables", {}).items()},
        )
        for c in data["cones"]:
            prog.add(ConeBlock(
                kind=c["kind"],
                dim=int(c["dim"]),
                offset=np.asarray(c["offset"], dtype=float),
                coeffs=sp.csr_matrix(np.asarray(c["coeffs"], dtype=float).reshape(-1, int(data["n_vars"]))),
                tag=tuple(c.get("tag", ())),
            ))
        return prog

    @classmethod
    def from_json(cls, text: str) -> "ConicProgramDescription":
        return cls.from_dict(json.loads(text))
