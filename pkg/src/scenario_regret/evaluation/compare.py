"""Realized-cost comparison of the regret and worst-case-cost policies."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from ..benchmark import CostWeights, clairvoyant_policy
from ..errors import DimensionMismatch
from ..lifted import ScenarioSample, UncertainSystem, lift
from ..synthesis.solve import HINF, REGRET, ScenarioData, SynthesisResult, scenario_level
from .profiles import WORST_REGRET, DisturbanceProfile, worst_case_gram

BOUND_TOL = 1e-6
DEFAULT_REALIZATIONS = 1000


@dataclass
class ComparisonRecord:
    """Costs of both policies and the benchmark for one ``(theta, profile)`` pair.

    ``dJbar`` is ``None`` (with ``dJbar_defined`` false) when the regret
    policy's cost is zero.  ``regret_bound_ok``/``cost_bound_ok`` check the certified
    regret and cost levels; they are only meaningful when the matching
    ``*_nonviolating`` flag is set and the profile has unit norm.
    """

    theta_id: int
    profile: str
    J_r: float
    J_h: float
    J_psi: float
    dJbar: float | None
    dJbar_defined: bool
    gap_bound: bool
    regret_bound_ok: bool
    cost_bound_ok: bool
    regret_nonviolating: bool
    hinf_nonviolating: bool
    unit_norm: bool
    n_realizations: int = 1
    se_r: float = 0.0
    se_h: float = 0.0
    se_psi: float = 0.0

    def as_dict(self) -> dict:
        return asdict(self)


def relative_increase(J_r: float, J_h: float) -> float | None:
    return (J_h - J_r) / J_r if J_r > 0 else None


def gap_bound_holds(J_psi: float, h_bar: float, r_bar: float) -> bool:
    """Benchmark cost below the gap between the certified cost and regret levels."""
    return bool(J_psi <= h_bar - r_bar)


def _costs(M: np.ndarray, W: np.ndarray) -> np.ndarray:
    """``||M w||^2`` for every column ``w`` of ``W``."""
    Y = M @ W
    return np.einsum("ij,ij->j", Y, Y)


def _se(v: np.ndarray) -> float:
    return float(v.std(ddof=1) / np.sqrt(v.size)) if v.size > 1 else 0.0


def _stacked(Phi_u, resp, weights):
    return np.vstack([weights.sqrtQ @ (resp.F @ Phi_u + resp.G), weights.sqrtR @ Phi_u])


def compare_policies(res_regret: SynthesisResult, res_hinf: SynthesisResult, system: UncertainSystem,
                     weights: CostWeights, samples: Sequence[ScenarioSample],
                     profiles: Sequence[DisturbanceProfile], n_realizations: int = DEFAULT_REALIZATIONS,
                     seed: int = 0, tol: float = BOUND_TOL,
                     theta_ids: Sequence[int] | None = None) -> list[ComparisonRecord]:
    """Evaluate both policies on every ``(sample, profile)`` pair.

    Stochastic profiles are averaged over ``n_realizations`` draws from
    ``default_rng([seed, theta_id, k])`` where ``k`` indexes the profile, so
    records do not depend on which other profiles are requested.  ``theta_ids``
    defaults to ``0..len(samples)-1``.
    """
    if res_regret.objective_kind != REGRET or res_hinf.objective_kind != HINF:
        raise ValueError("expected a regret result and a worst-case-cost result")
    pr, ph = res_regret.policy, res_hinf.policy
    if (pr.n, pr.m, pr.p, pr.T) != (ph.n, ph.m, ph.p, ph.T) or (pr.n, pr.m, pr.p, pr.T) != (
            system.n, system.m, system.p, system.T):
        raise DimensionMismatch("results and system have different dimensions")
    n, p, T = system.n, system.p, system.T
    r_bar, h_bar = res_regret.gamma_star, res_hinf.gamma_star
    if theta_ids is None:
        theta_ids = range(len(samples))
    elif len(theta_ids) != len(samples):
        raise DimensionMismatch("need one theta id per sample")
    records = []
    for i, sample in zip(theta_ids, samples):
        resp = lift(system, sample)
        bench = clairvoyant_policy(resp, weights)
        data = ScenarioData(sample, resp, bench)
        r_ok = scenario_level(pr.Phi_u, data, weights, REGRET) <= r_bar + tol
        h_ok = scenario_level(ph.Phi_u, data, weights, HINF) <= h_bar + tol
        Mr = _stacked(pr.Phi_u, resp, weights)
        Mh = _stacked(ph.Phi_u, resp, weights)
        Mpsi = np.vstack([weights.sqrtQ @ bench.Psi_x, weights.sqrtR @ bench.Psi_u])
        for k, prof in enumerate(profiles):
            if prof.stochastic:
                rng = np.random.default_rng([seed, i, k])
                Wmat = np.column_stack([prof.generate(n, p, T, rng=rng) for _ in range(n_realizations)])
            elif prof.worst_case:
                Phi = pr.Phi_u if prof.kind == WORST_REGRET else ph.Phi_u
                gram = worst_case_gram(prof.kind, Phi, bench, resp, weights)
                Wmat = prof.generate(n, p, T, gram=gram)[:, None]
            else:
                Wmat = prof.generate(n, p, T)[:, None]
            jr, jh, jpsi = _costs(Mr, Wmat), _costs(Mh, Wmat), _costs(Mpsi, Wmat)
            J_r, J_h, J_psi = float(jr.mean()), float(jh.mean()), float(jpsi.mean())
            norms = np.linalg.norm(Wmat, axis=0)
            unit = bool(np.all(np.abs(norms - 1.0) <= 1e-12))
            dJ = relative_increase(J_r, J_h)
            records.append(ComparisonRecord(
                theta_id=i,
                profile=prof.kind,
                J_r=J_r,
                J_h=J_h,
                J_psi=J_psi,
                dJbar=dJ,
                dJbar_defined=dJ is not None,
                gap_bound=gap_bound_holds(J_psi, h_bar, r_bar),
                # the bounds hold per realization, so every draw is checked, not the mean
                regret_bound_ok=bool(np.all(jr - jpsi <= r_bar + tol)),
                cost_bound_ok=bool(np.all(jh <= h_bar + tol)),
                regret_nonviolating=bool(r_ok),
                hinf_nonviolating=bool(h_ok),
                unit_norm=unit,
                n_realizations=Wmat.shape[1],
                se_r=_se(jr),
                se_h=_se(jh),
                se_psi=_se(jpsi),
            ))
    return records


def bound_failures(records: Sequence[ComparisonRecord]) -> list[ComparisonRecord]:
    """Records where a certified bound that should apply fails."""
    bad = []
    for rec in records:
        if not rec.unit_norm:
            continue
        if (rec.regret_nonviolating and not rec.regret_bound_ok) or (rec.hinf_nonviolating and not rec.cost_bound_ok):
            bad.append(rec)
    return bad


def majority_nonnegative(records: Sequence[ComparisonRecord], profile: str) -> tuple[int, int]:
    """``(count with dJbar >= 0, count with dJbar defined)`` for one profile."""
    vals = [r.dJbar for r in records if r.profile == profile and r.dJbar_defined]
    return sum(v >= 0 for v in vals), len(vals)
