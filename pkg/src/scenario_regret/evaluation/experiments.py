"""Sweeps on the mass-spring-damper benchmark: violation rates, levels and runtimes, realized costs.

Each run writes one CSV (rows flushed as soon as they are computed) and one
JSON manifest holding the full configuration and seeds.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .. import __version__
from ..certificates import epsilon_exact, training_samples, validation_samples, empirical_violation
from ..errors import ConfigError, RegretError
from ..structure import FULL, TOEPLITZ, count_decision_variables
from ..synthesis.backends import SolverOptions
from ..synthesis.solve import HINF, REGRET, prepare_scenarios, solve_scenario_program
from .compare import compare_policies
from .msd import mass_spring_damper, msd_sampler, msd_weights
from .profiles import KINDS, STOCHASTIC, DisturbanceProfile

log = logging.getLogger(__name__)

VIOLATION_CURVE = "violation-curve"
REGRET_RUNTIME = "regret-runtime-curve"
COST_COMPARISON = "cost-comparison"
EXPERIMENTS = (VIOLATION_CURVE, REGRET_RUNTIME, COST_COMPARISON)
SCALES = ("small", "paper")

CSV_COLUMNS = {
    VIOLATION_CURVE: ("N", "delta_used", "eps_theory", "v_full", "v_toeplitz", "seed"),
    REGRET_RUNTIME: ("N", "r_full", "r_toeplitz", "t_full_s", "t_toeplitz_s"),
    # "eq18" is the benchmark-gap flag; the header name is part of the file format
    COST_COMPARISON: ("theta_id", "profile", "J_r", "J_h", "J_psi", "dJbar", "eq18"),
}


@dataclass
class ExperimentConfig:
    scale: str = "small"
    seed: int = 0
    T: int = 20
    bound: float = 0.2
    N_grid: tuple = (10, 20, 50)
    n_validation: int = 500
    beta: float = 0.01
    N_train: int = 50
    n_theta: int = 20
    n_realizations: int = 1000
    profiles: tuple = KINDS
    backend: str | None = None
    lmi_form: str = "compact"
    tol: float = 1e-7

    def __post_init__(self):
        if self.scale not in SCALES:
            raise ConfigError(f"scale must be one of {SCALES}, got {self.scale!r}")
        if any(int(N) < 1 for N in self.N_grid) or self.N_train < 1:
            raise ConfigError("scenario counts must be positive")
        if self.n_validation < 1 or self.n_theta < 1 or self.n_realizations < 2:
            raise ConfigError("validation, theta and realization counts must be positive")
        for kind in self.profiles:
            if kind not in KINDS:
                raise ConfigError(f"unknown profile {kind!r}")
        self.N_grid = tuple(int(N) for N in self.N_grid)
        self.profiles = tuple(self.profiles)

    def as_dict(self) -> dict:
        return asdict(self)


def preset(kind: str, scale: str = "small", **overrides) -> ExperimentConfig:
    """Default configuration for an experiment; the ``paper`` scale runs for hours."""
    if kind not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {kind!r}; expected one of {EXPERIMENTS}")
    if scale == "small":
        base = {VIOLATION_CURVE: dict(N_grid=(10, 20, 50), n_validation=500),
                REGRET_RUNTIME: dict(N_grid=(10, 25, 50)),
                COST_COMPARISON: dict(N_train=50, n_theta=20, n_realizations=1000)}[kind]
    elif scale == "paper":
        base = {VIOLATION_CURVE: dict(N_grid=(100, 500, 1000, 2000, 5000), n_validation=10_000),
                REGRET_RUNTIME: dict(N_grid=(100, 500, 1000, 2000, 5000)),
                COST_COMPARISON: dict(N_train=5000, n_theta=20, n_realizations=10_000)}[kind]
    else:
        raise ConfigError(f"scale must be one of {SCALES}, got {scale!r}")
    return ExperimentConfig(scale=scale, **{**base, **overrides})


@dataclass
class ExperimentReport:
    kind: str
    csv_path: Path
    manifest_path: Path
    rows: list = field(default_factory=list)
    failures: list = field(default_factory=list)
    levels: dict | None = None


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


class _Writer:
    """Single CSV writer; every row hits the disk before the next point starts."""

    def __init__(self, path: Path, columns):
        self.fh = open(path, "w", newline="")
        self.w = csv.writer(self.fh, lineterminator="\n")
        self.w.writerow(columns)
        self.fh.flush()

    def row(self, values):
        self.w.writerow([_fmt(v) for v in values])
        self.fh.flush()

    def close(self):
        self.fh.close()


def _failure(point, exc) -> dict:
    return {"point": point, "error": type(exc).__name__, "message": str(exc)}


def _solve(cfg: ExperimentConfig, scenarios, system, weights, objective, structure):
    opts = SolverOptions(tol=cfg.tol, feastol=cfg.tol)
    return solve_scenario_program([], system, weights, objective, structure=structure, backend=cfg.backend,
                                  lmi_form=cfg.lmi_form, options=opts, scenarios=scenarios)


def _violation_curve(cfg, system, weights, sampler, writer, report):
    delta_full = count_decision_variables(system.n, system.m, system.p, system.T, FULL).structural
    validation = validation_samples(sampler, cfg.n_validation, cfg.seed)
    train_all = prepare_scenarios(training_samples(sampler, max(cfg.N_grid), cfg.seed), system, weights)
    for N in cfg.N_grid:
        rates = {}
        for structure in (FULL, TOEPLITZ):
            try:
                res = _solve(cfg, train_all[:N], system, weights, REGRET, structure)
                rep = empirical_violation(res, system, weights, samples=validation, seed=cfg.seed)
                rates[structure] = rep.empirical_rate
            except RegretError as exc:
                report.failures.append(_failure({"N": N, "structure": structure}, exc))
                rates[structure] = math.nan
        row = (N, delta_full, epsilon_exact(N, cfg.beta, delta_full), rates[FULL], rates[TOEPLITZ], cfg.seed)
        writer.row(row)
        report.rows.append(dict(zip(CSV_COLUMNS[VIOLATION_CURVE], row)))


def _regret_runtime(cfg, system, weights, sampler, writer, report):
    train_all = prepare_scenarios(training_samples(sampler, max(cfg.N_grid), cfg.seed), system, weights)
    for N in cfg.N_grid:
        out = {}
        for structure in (FULL, TOEPLITZ):
            try:
                res = _solve(cfg, train_all[:N], system, weights, REGRET, structure)
                out[structure] = (res.gamma_star, res.wall_clock)
            except RegretError as exc:
                report.failures.append(_failure({"N": N, "structure": structure}, exc))
                out[structure] = (math.nan, math.nan)
        row = (N, out[FULL][0], out[TOEPLITZ][0], out[FULL][1], out[TOEPLITZ][1])
        writer.row(row)
        report.rows.append(dict(zip(CSV_COLUMNS[REGRET_RUNTIME], row)))


def _cost_comparison(cfg, system, weights, sampler, writer, report):
    scenarios = prepare_scenarios(training_samples(sampler, cfg.N_train, cfg.seed), system, weights)
    res_r = _solve(cfg, scenarios, system, weights, REGRET, FULL)
    res_h = _solve(cfg, scenarios, system, weights, HINF, FULL)
    report.levels = {"regret": res_r.gamma_star, "hinf": res_h.gamma_star}
    thetas = validation_samples(sampler, cfg.n_theta, cfg.seed)
    profiles = [DisturbanceProfile(k, seed=cfg.seed if k in STOCHASTIC else None) for k in cfg.profiles]
    for i, theta in enumerate(thetas):
        try:
            recs = compare_policies(res_r, res_h, system, weights, [theta], profiles,
                                    n_realizations=cfg.n_realizations, seed=cfg.seed, theta_ids=[i])
        except RegretError as exc:
            report.failures.append(_failure({"theta_id": i}, exc))
            continue
        for rec in recs:
            writer.row((i, rec.profile, rec.J_r, rec.J_h, rec.J_psi, rec.dJbar, rec.gap_bound))
            report.rows.append(rec)


_RUNNERS = {VIOLATION_CURVE: _violation_curve, REGRET_RUNTIME: _regret_runtime, COST_COMPARISON: _cost_comparison}


def run_experiment(kind: str, config: ExperimentConfig | None = None, out_dir=".") -> ExperimentReport:
    """Run one sweep and write ``<kind>.csv`` plus ``<kind>.json`` into ``out_dir``."""
    if kind not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {kind!r}; expected one of {EXPERIMENTS}")
    cfg = config if config is not None else preset(kind)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    system = mass_spring_damper(cfg.T)
    weights = msd_weights(cfg.T)
    sampler = msd_sampler(cfg.T, cfg.bound)
    report = ExperimentReport(kind, out / f"{kind}.csv", out / f"{kind}.json")
    writer = _Writer(report.csv_path, CSV_COLUMNS[kind])
    t0 = time.perf_counter()
    try:
        _RUNNERS[kind](cfg, system, weights, sampler, writer, report)
    finally:
        writer.close()
        manifest = {
            "kind": kind,
            "version": __version__,
            "config": cfg.as_dict(),
            "seeds": {"training": [cfg.seed, 0], "validation": [cfg.seed, 1],
                      "realizations": "default_rng([seed, theta_id, profile_index])"},
            "system": {"name": system.name, "T": cfg.T, "theta_bound": cfg.bound},
            "csv": report.csv_path.name,
            "n_rows": len(report.rows),
            "failures": report.failures,
            "levels": report.levels,
            "timing": {"wall_clock_s": time.perf_counter() - t0},
        }
        report.manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return report


