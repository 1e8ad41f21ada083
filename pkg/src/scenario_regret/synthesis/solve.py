"""Scenario programs for minimax regret and worst-case cost."""

from __future__ import annotations

import hashlib
import logging
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from ..benchmark import ClairvoyantBenchmark, CostWeights, clairvoyant_policy
from ..errors import Infeasible, SolverFailure
from ..lifted import ResponseOperators, ScenarioSample, UncertainSystem, lift
from ..regret import CausalPolicy, benchmark_maps
from ..structure import FULL, VariableCount, apply_structure, count_decision_variables
from . import backends
from .conic import ConeBlock, ConicProgramDescription
from .lmi import (COMPACT, SafetySpec, VariableLayout, assemble_hinf_lmi, assemble_regret_lmi,
                  assemble_safety_soc, safety_row_values)

log = logging.getLogger(__name__)

REGRET = "regret"
HINF = "hinf"

FEAS_TOL = 1e-7
ACTIVE_TOL = 1e-6


def dataset_id(dataset: Sequence[ScenarioSample]) -> str:
    h = hashlib.sha256()
    for s in dataset:
        h.update(np.ascontiguousarray(s.theta, dtype=float).tobytes())
    return h.hexdigest()[:16]


@dataclass
class ScenarioData:
    sample: ScenarioSample
    resp: ResponseOperators
    bench: ClairvoyantBenchmark


def prepare_scenarios(dataset: Sequence[ScenarioSample], system: UncertainSystem,
                      weights: CostWeights) -> list[ScenarioData]:
    out = []
    for s in dataset:
        resp = lift(system, s)
        out.append(ScenarioData(s, resp, clairvoyant_policy(resp, weights)))
    return out


def scenario_level(Phi_u: np.ndarray, data: ScenarioData, weights: CostWeights, objective: str) -> float:
    """``lambda_max`` of the regret (or cost) quadratic form for one scenario."""
    X = data.bench.hessian_factor @ (Phi_u - data.bench.Psi_u)
    if objective == REGRET:
        return float(np.linalg.norm(X, 2) ** 2) if X.size else 0.0
    Nm = benchmark_maps(data.bench, weights)
    S = X.T @ X + Nm.T @ Nm
    return float(np.linalg.eigvalsh((S + S.T) / 2)[-1])


@dataclass
class SynthesisResult:
    policy: CausalPolicy
    gamma_star: float
    objective_kind: str
    dataset_id: str
    solver_status: str
    wall_clock: float
    active_scenarios: list[int]
    gamma_solver: float = float("nan")
    scenario_levels: np.ndarray = field(default=None, repr=False)
    delta: VariableCount | None = None
    backend: str = ""
    lmi_form: str = COMPACT
    slack: float = 0.0
    n_scenarios: int = 0
    program_stats: dict = field(default_factory=dict)

    @property
    def structure(self) -> str:
        return self.policy.structure

    def to_dict(self) -> dict:
        return {
            "objective": self.objective_kind,
            "structure": self.policy.structure,
            "gamma_star": self.gamma_star,
            "gamma_solver": self.gamma_solver,
            "dims": {"n": self.policy.n, "m": self.policy.m, "p": self.policy.p, "T": self.policy.T},
            "policy": {"Phi_u": self.policy.Phi_u.tolist(), "layout": "row-major nested lists"},
            "delta": self.delta.as_dict() if self.delta else None,
            "active_scenarios": list(self.active_scenarios),
            "scenario_levels": None if self.scenario_levels is None else np.asarray(self.scenario_levels).tolist(),
            "n_scenarios": self.n_scenarios,
            "dataset_id": self.dataset_id,
            "solver": {
                "backend": self.backend,
                "status": self.solver_status,
                "lmi_form": self.lmi_form,
                "slack": self.slack,
                **self.program_stats,
            },
            "wall_clock": self.wall_clock,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SynthesisResult":
        dims = data["dims"]
        policy = CausalPolicy(np.asarray(data["policy"]["Phi_u"], dtype=float), dims["n"], dims["m"],
                              dims["p"], dims["T"], data["structure"])
        delta = data.get("delta")
        return cls(
            policy=policy,
            gamma_star=float(data["gamma_star"]),
            objective_kind=data["objective"],
            dataset_id=data["dataset_id"],
            solver_status=data["solver"]["status"],
            wall_clock=float(data.get("wall_clock", 0.0)),
            active_scenarios=list(data.get("active_scenarios", [])),
            gamma_solver=float(data.get("gamma_solver", np.nan)),
            scenario_levels=None if data.get("scenario_levels") is None else np.asarray(data["scenario_levels"]),
            delta=None if delta is None else VariableCount(delta["structural"], delta["closed_form"], delta["structure"]),
            backend=data["solver"].get("backend", ""),
            lmi_form=data["solver"].get("lmi_form", COMPACT),
            slack=float(data["solver"].get("slack", 0.0)),
            n_scenarios=int(data.get("n_scenarios", 0)),
        )


def build_program(scenarios: Sequence[ScenarioData], weights: CostWeights, objective: str,
                  structure: str = FULL, safety: SafetySpec | None = None, lmi_form: str = COMPACT,
                  safety_slack: bool = False, slack_penalty: float = 1e4):
    """Assemble the conic program; returns ``(program, parametrization, layout)``."""
    if not scenarios:
        raise ValueError("need at least one scenario")
    n, m, p, T = scenarios[0].resp.dims
    param = apply_structure(n, m, p, T, structure)
    layout = VariableLayout(param.n_free, slack=bool(safety is not None and safety_slack))
    c = np.zeros(layout.size)
    c[layout.gamma] = 1.0
    prog = ConicProgramDescription(n_vars=layout.size, objective=c, variables=layout.as_dict())
    if layout.slack:
        c[layout.slack_index] = slack_penalty
        prog.add(ConeBlock("nonneg", 1, np.zeros(1),
                           sp.csr_matrix(([1.0], ([0], [layout.slack_index])), shape=(1, layout.size)),
                           ("slack",)))
    assemble = assemble_regret_lmi if objective == REGRET else assemble_hinf_lmi
    for k, sc in enumerate(scenarios):
        prog.add(assemble(param, sc.bench, sc.resp, weights, layout, form=lmi_form, tag=(objective, k)))
        if safety is not None:
            for cone in assemble_safety_soc(param, safety, sc.resp, sc.sample, layout, tag=("safety", k)):
                prog.add(cone)
    return prog, param, layout


def solve_scenario_program(dataset: Sequence[ScenarioSample], system: UncertainSystem,
                           weights: CostWeights, objective: str = REGRET,
                           safety: SafetySpec | None = None, structure: str = FULL,
                           backend: str | None = None, lmi_form: str = COMPACT,
                           options: backends.SolverOptions | None = None,
                           safety_slack: bool = False, slack_penalty: float = 1e4,
                           scenarios: Sequence[ScenarioData] | None = None) -> SynthesisResult:
    if objective not in (REGRET, HINF):
        raise ValueError(f"unknown objective {objective!r}")
    options = options or backends.SolverOptions()
    backend_name, adapter = backends.resolve_backend(backend)
    t0 = time.perf_counter()
    if scenarios is None:
        scenarios = prepare_scenarios(dataset, system, weights)
    dataset = [sc.sample for sc in scenarios]
    prog, param, layout = build_program(scenarios, weights, objective, structure, safety, lmi_form,
                                        safety_slack, slack_penalty)
    log.debug("solving %s program: %d vars, %d cones", objective, prog.n_vars, len(prog.cones))
    out = adapter(prog, options)
    if out.status == backends.INFEASIBLE:
        raise Infeasible(f"scenario program infeasible ({backend_name}: {out.raw_status})")
    if out.status not in (backends.OPTIMAL, backends.INACCURATE) or out.x is None:
        raise SolverFailure(f"{backend_name} returned {out.raw_status}", out.raw_status)

    x = out.x
    Phi_u = param.to_matrix(x[layout.phi])
    policy = CausalPolicy(Phi_u, system.n, system.m, system.p, system.T, param.structure)
    levels = np.array([scenario_level(Phi_u, sc, weights, objective) for sc in scenarios])
    gamma_solver = float(x[layout.gamma])
    # smallest level certified by the returned gain on every training scenario
    gamma_star = float(levels.max())
    margins = prog.min_margin(x)
    scale = max(1.0, abs(gamma_solver))
    if margins.get("psd", 0.0) < -FEAS_TOL * scale:
        raise SolverFailure(
            f"{backend_name} solution violates a PSD block by {-margins['psd']:.2e}", out.raw_status
        )
    if margins.get("soc", 0.0) < -FEAS_TOL or margins.get("nonneg", 0.0) < -FEAS_TOL:
        raise SolverFailure(f"{backend_name} solution violates a cone constraint", out.raw_status)
    if objective == HINF:
        gamma_star = max(gamma_star, 0.0)
    active = np.flatnonzero(levels >= gamma_star - ACTIVE_TOL * max(1.0, gamma_star)).tolist()
    delta = count_decision_variables(system.n, system.m, system.p, system.T, param.structure)
    if layout.slack:
        delta = VariableCount(delta.structural + 1, delta.closed_form, delta.structure)
    return SynthesisResult(
        policy=policy,
        gamma_star=gamma_star,
        objective_kind=objective,
        dataset_id=dataset_id(dataset),
        solver_status=out.status,
        wall_clock=time.perf_counter() - t0,
        active_scenarios=active,
        gamma_solver=gamma_solver,
        scenario_levels=levels,
        delta=delta,
        backend=backend_name,
        lmi_form=lmi_form,
        slack=max(0.0, float(x[layout.slack_index])) if layout.slack else 0.0,
        n_scenarios=len(scenarios),
        program_stats={
            "n_vars": prog.n_vars,
            "psd_block_size": prog.psd_block_sizes[0] if prog.psd_block_sizes else 0,
            "n_soc": len(prog.cones_of("soc")),
            "solve_time": out.solve_time,
            "iterations": out.info.get("iterations"),
        },
    )


def solve_scenario_regret(dataset, system, weights, safety=None, structure=FULL, **kwargs) -> SynthesisResult:
    """Minimize the worst-case regret over the sampled scenarios."""
    return solve_scenario_program(dataset, system, weights, REGRET, safety, structure, **kwargs)


def solve_scenario_hinf(dataset, system, weights, safety=None, structure=FULL, **kwargs) -> SynthesisResult:
    """Minimize the worst-case closed-loop cost over the sampled scenarios."""
    return solve_scenario_program(dataset, system, weights, HINF, safety, structure, **kwargs)


def check_safety(result: SynthesisResult, scenarios: Sequence[ScenarioData], safety: SafetySpec) -> float:
    """Largest ``lhs - h`` over all safety rows and scenarios (<= 0 when safe)."""
    worst = -np.inf
    for sc in scenarios:
        lhs, h = safety_row_values(result.policy.Phi_u, safety, sc.resp, sc.sample)
        worst = max(worst, float((lhs - h - result.slack).max(initial=-np.inf)))
    return worst
