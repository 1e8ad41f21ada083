"""Sample-complexity bounds and out-of-sample violation estimates."""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.special import gammaln, logsumexp

from .benchmark import CostWeights, clairvoyant_policy
from .errors import DomainError, RegretError
from .lifted import ScenarioSample, UncertainSystem, lift
from .synthesis.lmi import SafetySpec, safety_row_values
from .synthesis.solve import ScenarioData, SynthesisResult, scenario_level

VIOLATION_TOL = 1e-7

Sampler = Callable[[np.random.Generator], ScenarioSample]


def _check_level(name: str, value: float) -> float:
    value = float(value)
    if not 0.0 < value < 1.0:
        raise DomainError(f"{name} must lie in (0, 1), got {value}")
    return value


def _check_delta(delta) -> int:
    if int(delta) != delta or delta < 1:
        raise DomainError(f"delta must be a positive integer, got {delta}")
    return int(delta)


def binomial_tail(N: int, delta: int, epsilon: float) -> float:
    """``sum_{j<delta} C(N, j) eps^j (1 - eps)^(N - j)``, evaluated in log space."""
    eps = _check_level("epsilon", epsilon)
    delta = _check_delta(delta)
    if int(N) != N or N < 1 or delta > N:
        raise DomainError(f"need 1 <= delta <= N, got N={N}, delta={delta}")
    N = int(N)
    j = np.arange(delta, dtype=float)
    logc = gammaln(N + 1.0) - gammaln(j + 1.0) - gammaln(N - j + 1.0)
    terms = logc + j * math.log(eps) + (N - j) * math.log1p(-eps)
    return float(min(1.0, math.exp(logsumexp(terms))))


def binomial_tail_exact(N: int, delta: int, epsilon) -> Fraction:
    """Rational evaluation of the same sum (oracle for small ``N``)."""
    eps = Fraction(epsilon)
    return sum((math.comb(N, j) * eps**j * (1 - eps) ** (N - j) for j in range(delta)), Fraction(0))


def min_scenarios_exact(epsilon: float, beta: float, delta: int) -> int:
    """Smallest ``N > delta`` with ``binomial_tail(N, delta, eps) <= beta``."""
    _check_level("epsilon", epsilon)
    beta = _check_level("beta", beta)
    delta = _check_delta(delta)
    if binomial_tail(delta + 1, delta, epsilon) <= beta:
        return delta + 1
    lo, hi = delta + 1, 2 * (delta + 1)
    while binomial_tail(hi, delta, epsilon) > beta:
        lo, hi = hi, 2 * hi
    # invariant: tail(lo) > beta >= tail(hi)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if binomial_tail(mid, delta, epsilon) <= beta:
            hi = mid
        else:
            lo = mid
    return hi


def min_scenarios_simple(epsilon: float, beta: float, delta: int) -> int:
    """``ceil(2/eps (delta + ln(1/beta)))``."""
    eps = _check_level("epsilon", epsilon)
    beta = _check_level("beta", beta)
    delta = _check_delta(delta)
    value = 2.0 / eps * (delta + math.log(1.0 / beta))
    # guard against 246.99999999 style rounding when the product is integral
    return int(math.ceil(round(value, 9)))


def epsilon_exact(N: int, beta: float, delta: int) -> float:
    """Smallest ``eps`` with ``binomial_tail(N, delta, eps) <= beta``; 1.0 when ``N <= delta``."""
    beta = _check_level("beta", beta)
    delta = _check_delta(delta)
    if int(N) != N or N < 1:
        raise DomainError(f"N must be a positive integer, got {N}")
    if N <= delta:
        return 1.0
    # the tail is strictly decreasing in eps on (0, 1)
    lo, hi = 1e-300, 1.0 - 1e-16
    f = lambda e: binomial_tail(int(N), delta, e) - beta
    if f(hi) > 0:
        return 1.0
    return float(brentq(f, lo, hi, xtol=1e-15, rtol=1e-12))


@dataclass(frozen=True)
class CertificateSpec:
    epsilon: float
    beta: float
    delta: int
    N: int | None = None

    def __post_init__(self):
        _check_level("epsilon", self.epsilon)
        _check_level("beta", self.beta)
        _check_delta(self.delta)
        if self.N is not None and self.N < 1:
            raise DomainError("N must be positive")

    @property
    def exact_N(self) -> int:
        return min_scenarios_exact(self.epsilon, self.beta, self.delta)

    @property
    def simple_N(self) -> int:
        return min_scenarios_simple(self.epsilon, self.beta, self.delta)

    def holds(self) -> bool:
        """Whether ``N`` samples certify ``(epsilon, beta)`` for ``delta`` variables."""
        if self.N is None or self.N <= self.delta:
            return False
        return binomial_tail(self.N, self.delta, self.epsilon) <= self.beta

    def as_dict(self) -> dict:
        return {"epsilon": self.epsilon, "beta": self.beta, "delta": self.delta, "N": self.N,
                "exact_N": self.exact_N, "simple_N": self.simple_N}


@dataclass
class ViolationReport:
    n_validation: int
    n_regret_violations: int
    n_safety_violations: int
    n_any: int
    empirical_rate: float
    seed: int | None
    n_failed: int = 0
    gamma: float = float("nan")
    worst_excess: float = float("-inf")
    failures: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


CSV_FIELDS = ("N", "epsilon", "beta", "delta", "rate", "seed")


def append_csv_row(path, report: ViolationReport, spec: CertificateSpec) -> None:
    new = not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, "a", newline="") as fh:
        w = csv.writer(fh)
        if new:
            w.writerow(CSV_FIELDS)
        w.writerow([spec.N, spec.epsilon, spec.beta, spec.delta, repr(report.empirical_rate), report.seed])


TRAIN_STREAM = 0
VALIDATION_STREAM = 1


def draw_samples(sampler: Sampler, n: int, seed: int, stream: int) -> list[ScenarioSample]:
    """Sample ``i`` always comes from ``default_rng([seed, stream, i])``, so sets nest in ``n``."""
    return [sampler(np.random.default_rng([seed, stream, i])) for i in range(n)]


def training_samples(sampler: Sampler, n: int, seed: int) -> list[ScenarioSample]:
    return draw_samples(sampler, n, seed, TRAIN_STREAM)


def validation_samples(sampler: Sampler, n: int, seed: int) -> list[ScenarioSample]:
    return draw_samples(sampler, n, seed, VALIDATION_STREAM)


def empirical_violation(result: SynthesisResult, system: UncertainSystem, weights: CostWeights,
                        safety: SafetySpec | None = None, sampler: Sampler | None = None,
                        n_validation: int | None = None, seed: int = 0,
                        samples: Sequence[ScenarioSample] | None = None,
                        gamma: float | None = None) -> ViolationReport:
    """Fraction of fresh scenarios on which the certified level fails.

    Either ``sampler`` with ``n_validation`` or an explicit list ``samples``
    must be given; ``gamma`` overrides ``result.gamma_star``.
    """
    if samples is None:
        if sampler is None or n_validation is None:
            raise DomainError("pass a sampler with n_validation, or explicit samples")
        if n_validation < 1:
            raise DomainError("n_validation must be at least 1")
        samples = validation_samples(sampler, n_validation, seed)
    elif len(samples) < 1:
        raise DomainError("need at least one validation sample")
    gamma = result.gamma_star if gamma is None else float(gamma)
    Phi_u = result.policy.Phi_u
    n_reg = n_saf = n_any = 0
    failures = []
    worst = -np.inf
    for i, s in enumerate(samples):
        try:
            resp = lift(system, s)
            data = ScenarioData(s, resp, clairvoyant_policy(resp, weights))
            level = scenario_level(Phi_u, data, weights, result.objective_kind)
            reg = level > gamma + VIOLATION_TOL
            worst = max(worst, level - gamma)
            saf = False
            if safety is not None:
                lhs, h = safety_row_values(Phi_u, safety, resp, s)
                saf = bool(np.any(lhs - h - result.slack > VIOLATION_TOL))
        except (RegretError, np.linalg.LinAlgError) as exc:
            failures.append({"index": i, "error": type(exc).__name__, "message": str(exc)})
            continue
        n_reg += reg
        n_saf += saf
        n_any += reg or saf
    n_eval = len(samples)
    return ViolationReport(
        n_validation=n_eval,
        n_regret_violations=int(n_reg),
        n_safety_violations=int(n_saf),
        n_any=int(n_any),
        empirical_rate=n_any / n_eval,
        seed=seed,
        n_failed=len(failures),
        gamma=gamma,
        worst_excess=float(worst),
        failures=failures,
    )
