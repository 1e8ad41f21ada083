"""Closed-loop simulation, disturbance profiles, policy comparison and experiment sweeps."""

from .closed_loop import (closed_loop_maps, lifted_trajectory, realize_state_feedback, reconstruct_disturbance,
                          simulate_closed_loop, stack_disturbance)
from .compare import ComparisonRecord, bound_failures, compare_policies, gap_bound_holds, relative_increase
from .experiments import EXPERIMENTS, ExperimentConfig, ExperimentReport, preset, run_experiment
from .msd import mass_spring_damper, msd_sampler, msd_weights, uniform_constant_sampler
from .profiles import KINDS, DisturbanceProfile, default_profiles

__all__ = [
    "EXPERIMENTS", "KINDS", "ComparisonRecord", "DisturbanceProfile", "ExperimentConfig", "ExperimentReport",
    "bound_failures", "closed_loop_maps", "compare_policies", "default_profiles", "gap_bound_holds",
    "lifted_trajectory", "mass_spring_damper", "msd_sampler", "msd_weights", "preset", "realize_state_feedback",
    "reconstruct_disturbance", "relative_increase", "run_experiment", "simulate_closed_loop",
    "stack_disturbance", "uniform_constant_sampler",
]
