"""Disturbance profiles used to compare policies.

Deterministic signal profiles act on the process disturbance ``w_0..w_{T-2}``
(every channel gets the same signal) and leave ``x_0`` at zero.  The two
worst-case profiles are top eigenvectors over the whole stacked vector.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..benchmark import ClairvoyantBenchmark, CostWeights
from ..errors import DomainError
from ..lifted import ResponseOperators
from ..regret import cost_gram, regret_gram_factored, top_eigenpair

ZERO = "zero"
CONSTANT = "constant"
STEP = "step"
RAMP = "ramp"
SINUSOID = "sinusoid"
WHITE_GAUSSIAN = "white-gaussian"
UNIFORM = "uniform"
WORST_REGRET = "worst-case-regret"
WORST_COST = "worst-case-cost"

DETERMINISTIC = (ZERO, CONSTANT, STEP, RAMP, SINUSOID)
STOCHASTIC = (WHITE_GAUSSIAN, UNIFORM)
WORST_CASE = (WORST_REGRET, WORST_COST)
KINDS = DETERMINISTIC + STOCHASTIC + WORST_CASE


@dataclass(frozen=True)
class DisturbanceProfile:
    """A named disturbance family.

    ``onset`` is the first step of a step profile (default ``T // 2``) and
    ``frequency`` counts sinusoid periods over the ``T - 1`` process steps.
    """

    kind: str
    amplitude: float = 1.0
    frequency: float = 1.0
    onset: int | None = None
    seed: int | None = None
    normalize: bool = True

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown profile kind {self.kind!r}; expected one of {KINDS}")

    @property
    def stochastic(self) -> bool:
        return self.kind in STOCHASTIC

    @property
    def worst_case(self) -> bool:
        return self.kind in WORST_CASE

    def as_dict(self) -> dict:
        return asdict(self)

    def signal(self, T: int) -> np.ndarray:
        """Scalar signal over the process steps ``t = 0..T-2`` (deterministic kinds only)."""
        L = T - 1
        t = np.arange(L, dtype=float)
        a = self.amplitude
        if self.kind == ZERO:
            return np.zeros(L)
        if self.kind == CONSTANT:
            return np.full(L, a)
        if self.kind == STEP:
            onset = T // 2 if self.onset is None else self.onset
            return np.where(t >= onset, a, 0.0)
        if self.kind == RAMP:
            return a * (t + 1) / L
        if self.kind == SINUSOID:
            return a * np.sin(2 * np.pi * self.frequency * t / L)
        raise DomainError(f"{self.kind} has no scalar signal")

    def generate(self, n: int, p: int, T: int, rng: np.random.Generator | None = None,
                 gram: np.ndarray | None = None) -> np.ndarray:
        """Stacked ``w`` of length ``n + p (T - 1)``.

        Stochastic kinds draw from ``rng`` (or from ``seed`` when ``rng`` is
        omitted); worst-case kinds need the quadratic form ``gram`` whose top
        eigenvector they return.
        """
        nw = n + p * (T - 1)
        if self.worst_case:
            if gram is None:
                raise DomainError(f"{self.kind} needs the quadratic form to maximize")
            gram = np.asarray(gram, dtype=float)
            if gram.shape != (nw, nw):
                raise DomainError(f"gram has shape {gram.shape}, expected {(nw, nw)}")
            _, v = top_eigenpair(gram)
            w = self.amplitude * v
        elif self.stochastic:
            if rng is None:
                rng = np.random.default_rng(self.seed)
            w = np.zeros(nw)
            if self.kind == WHITE_GAUSSIAN:
                w[n:] = self.amplitude * rng.standard_normal(nw - n)
            else:
                w[n:] = rng.uniform(-self.amplitude, self.amplitude, nw - n)
        else:
            w = np.zeros(nw)
            w[n:] = np.repeat(self.signal(T), p)
        if self.normalize and self.kind != ZERO:
            norm = np.linalg.norm(w)
            if norm == 0:
                raise DomainError(f"{self.kind} profile is identically zero for T={T}; cannot normalize")
            w = w / norm
        return w


def worst_case_gram(kind: str, Phi_u: np.ndarray, bench: ClairvoyantBenchmark, resp: ResponseOperators,
                    weights: CostWeights) -> np.ndarray:
    """Quadratic form whose top eigenvector is the worst-case profile for ``Phi_u``."""
    if kind == WORST_REGRET:
        return regret_gram_factored(Phi_u, bench).Delta
    if kind == WORST_COST:
        return cost_gram(Phi_u, resp, weights)
    raise DomainError(f"{kind} is not a worst-case profile")


def default_profiles(seed: int = 0) -> list[DisturbanceProfile]:
    """One profile of every kind."""
    return [DisturbanceProfile(k, seed=seed if k in STOCHASTIC else None) for k in KINDS]
