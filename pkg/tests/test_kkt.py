import numpy as np
import pytest

from scenario_regret.benchmark import CostWeights
from scenario_regret.errors import SolverFailure
from scenario_regret.evaluation.msd import mass_spring_damper, msd_sampler, msd_weights
from scenario_regret.certificates import training_samples
from scenario_regret.structure import FULL, TOEPLITZ
from scenario_regret.synthesis.backends import SolverOptions
from scenario_regret.synthesis.kkt import dense_psd_hessian, psd_hessian, structured_cones
from scenario_regret.synthesis.lmi import COMPACT, STACKED
from scenario_regret.synthesis.solve import (HINF, REGRET, build_program, prepare_scenarios,
                                             solve_scenario_program)


def _scenarios(T=4, N=3, seed=0):
    system = mass_spring_damper(T)
    weights = msd_weights(T)
    return system, weights, prepare_scenarios(training_samples(msd_sampler(T), N, seed), system, weights)


@pytest.mark.parametrize("structure", [FULL, TOEPLITZ])
@pytest.mark.parametrize("form", [COMPACT, STACKED])
@pytest.mark.parametrize("objective", [REGRET, HINF])
def test_structured_hessian_matches_dense(structure, form, objective):
    _, weights, scen = _scenarios()
    prog, _, _ = build_program(scen, weights, objective, structure, lmi_form=form)
    assert structured_cones(prog.cones)
    rng = np.random.default_rng(0)
    for cone in prog.cones_of("psd"):
        R = rng.standard_normal((cone.dim, cone.dim))
        S = R @ R.T + 0.1 * np.eye(cone.dim)
        H = psd_hessian(cone.schur, S, prog.n_vars)
        H_ref = dense_psd_hessian(cone.coeffs, cone.dim, S)
        assert np.abs(H - H_ref).max() <= 1e-12 * np.abs(H_ref).max()


@pytest.mark.parametrize("table", [True, False])
@pytest.mark.parametrize("reduced", [True, False])
def test_hessian_paths_agree(monkeypatch, table, reduced):
    from scenario_regret.synthesis import kkt
    if not table:
        monkeypatch.setattr(kkt, "TABLE_LIMIT", 0)
    monkeypatch.setattr(kkt, "REDUCED_RATIO", 1 if reduced else 10**9)
    _, weights, scen = _scenarios(T=5, N=4)
    prog, _, _ = build_program(scen, weights, REGRET, TOEPLITZ)
    cones = prog.cones_of("psd")
    assert (cones[0].schur.dense_basis is not None) == reduced
    rng = np.random.default_rng(1)
    pat, r = cones[0].schur, cones[0].schur.r
    Rs = [np.linalg.cholesky(S @ S.T + np.eye(c.dim)) for c in cones
          for S in [rng.standard_normal((c.dim, c.dim))]]
    U = np.stack([R[:r].T @ c.schur.W for R, c in zip(Rs, cones)])
    V = np.stack([R[r:].T for R in Rs])
    K, g, hgg = kkt.hessian_blocks(pat, U, V)
    ref = sum(dense_psd_hessian(c.coeffs, c.dim, R @ R.T) for R, c in zip(Rs, cones))
    sl = slice(pat.phi_start, pat.phi_start + pat.n_free)
    scale = np.abs(ref).max()
    assert np.abs(K - ref[sl, sl]).max() <= 1e-12 * scale
    assert np.abs(g - ref[pat.gamma_index, sl]).max() <= 1e-12 * scale
    assert hgg == pytest.approx(ref[pat.gamma_index, pat.gamma_index], rel=1e-12)


@pytest.mark.parametrize("structure", [FULL, TOEPLITZ])
def test_structured_solver_matches_generic(structure):
    system, weights, scen = _scenarios(T=5, N=4)
    res = {}
    for flag in (True, False):
        res[flag] = solve_scenario_program([], system, weights, REGRET, structure=structure, backend="cvxopt",
                                           options=SolverOptions(structured=flag), scenarios=scen)
    assert res[True].gamma_star == pytest.approx(res[False].gamma_star, rel=1e-6)


def test_forms_give_same_optimum():
    system, weights, scen = _scenarios(T=5, N=4)
    g = [solve_scenario_program([], system, weights, REGRET, lmi_form=f, scenarios=scen).gamma_star
         for f in (COMPACT, STACKED)]
    assert g[0] == pytest.approx(g[1], rel=1e-6)


def test_structured_with_safety_slack():
    from scenario_regret.synthesis.lmi import SafetySpec
    system, weights, scen = _scenarios(T=4, N=3)
    nT, mT = 8, 4
    H_u = np.vstack([np.eye(mT), -np.eye(mT)])
    safety = SafetySpec.constant(np.zeros((2 * mT, nT)), H_u, 0.5 * np.ones(2 * mT))
    out = {}
    for flag in (True, False):
        out[flag] = solve_scenario_program([], system, weights, REGRET, safety=safety, safety_slack=True,
                                           options=SolverOptions(structured=flag), scenarios=scen)
    assert out[True].gamma_star == pytest.approx(out[False].gamma_star, rel=1e-5)
    assert out[True].slack == pytest.approx(out[False].slack, abs=1e-6)
