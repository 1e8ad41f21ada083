"""Scenario semidefinite programs for regret and worst-case cost."""

from .backends import BACKENDS, SolverOptions, resolve_backend
from .conic import ConeBlock, ConicProgramDescription
from .lmi import (COMPACT, STACKED, SafetySpec, VariableLayout, assemble_hinf_lmi, assemble_regret_lmi,
                  assemble_safety_soc, safety_row_values, schur_block)
from .solve import (HINF, REGRET, ScenarioData, SynthesisResult, build_program, check_safety, dataset_id,
                    prepare_scenarios, scenario_level, solve_scenario_hinf, solve_scenario_program,
                    solve_scenario_regret)

__all__ = [
    "BACKENDS", "COMPACT", "STACKED", "HINF", "REGRET",
    "ConeBlock", "ConicProgramDescription", "SafetySpec", "ScenarioData", "SolverOptions",
    "SynthesisResult", "VariableLayout",
    "assemble_hinf_lmi", "assemble_regret_lmi", "assemble_safety_soc", "build_program",
    "check_safety", "dataset_id", "prepare_scenarios", "resolve_backend", "safety_row_values",
    "scenario_level", "schur_block", "solve_scenario_hinf", "solve_scenario_program",
    "solve_scenario_regret",
]
