"""Thin adapters from :class:`ConicProgramDescription` to conic solvers.

Each adapter returns a :class:`BackendResult`; none of them raise on
infeasibility, the caller decides what a status means.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ..errors import ConfigError
from .conic import ConicProgramDescription
from .kkt import make_kktsolver, structured_cones

OPTIMAL = "optimal"
INACCURATE = "optimal_inaccurate"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
FAILED = "failed"


@dataclass
class SolverOptions:
    tol: float = 1e-7  # duality gap, absolute and relative
    feastol: float = 1e-7  # matches the post-solve feasibility check
    max_iters: int = 60
    time_limit: float | None = None
    verbose: bool = False
    structured: bool = True  # cvxopt only: exploit the Schur block pattern


@dataclass
class BackendResult:
    status: str
    x: np.ndarray | None
    raw_status: str
    solve_time: float
    info: dict = field(default_factory=dict)


def _stacked(prog: ConicProgramDescription, psd_rows) -> tuple[sp.csc_matrix, np.ndarray, dict]:
    """Build ``G x + s = h`` with PSD cones re-vectorized by ``psd_rows``."""
    Gs, hs = [], []
    dims = {"l": 0, "q": [], "s": []}
    for cone in prog.ordered():
        coeffs, offset = cone.coeffs, cone.offset
        if cone.kind == "psd":
            idx, scale = psd_rows(cone.dim)
            coeffs = sp.diags(scale) @ coeffs[idx]
            offset = scale * offset[idx]
            dims["s"].append(cone.dim)
        elif cone.kind == "soc":
            dims["q"].append(cone.dim)
        else:
            dims["l"] += cone.dim
        Gs.append(-coeffs)
        hs.append(offset)
    G = sp.vstack(Gs, format="csc") if Gs else sp.csc_matrix((0, prog.n_vars))
    h = np.concatenate(hs) if hs else np.zeros(0)
    return G, h, dims


def _full_rows(s):
    return np.arange(s * s), np.ones(s * s)


def _triangle_rows(s, upper: bool):
    idx, scale = [], []
    r2 = np.sqrt(2.0)
    for j in range(s):
        rng = range(j + 1) if upper else range(j, s)
        for i in rng:
            idx.append(i + j * s)
            scale.append(1.0 if i == j else r2)
    return np.array(idx), np.array(scale)


def _to_cvxopt(G: sp.spmatrix, chunk: int = 4096):
    """cvxopt ``spmatrix`` from scipy; built in row chunks since the triplet
    constructor scales badly with the number of entries per column."""
    import cvxopt

    G = sp.csr_matrix(G)
    parts = []
    for start in range(0, max(G.shape[0], 1), chunk):
        c = G[start:start + chunk].tocoo()
        parts.append(cvxopt.spmatrix(c.data.tolist(), c.row.tolist(), c.col.tolist(), size=c.shape))
    return parts[0] if len(parts) == 1 else cvxopt.sparse(parts)


def _cvxopt_status(sol) -> str:
    raw = sol["status"]
    if raw == "optimal":
        return OPTIMAL
    if raw == "primal infeasible":
        return INFEASIBLE
    if raw == "dual infeasible":
        return UNBOUNDED
    pres, dres = sol["primal infeasibility"], sol["dual infeasibility"]
    if sol["x"] is not None and pres is not None and pres < 1e-6 and dres is not None and dres < 1e-4:
        return INACCURATE
    return FAILED


def solve_cvxopt(prog: ConicProgramDescription, opts: SolverOptions) -> BackendResult:
    import cvxopt
    from cvxopt import solvers

    G, h, dims = _stacked(prog, _full_rows)
    Gm = _to_cvxopt(G)
    c, hm = cvxopt.matrix(prog.objective), cvxopt.matrix(h)
    kkt = "chol"
    if opts.structured and structured_cones(prog.cones):
        kkt = make_kktsolver(prog.ordered(), prog.n_vars)
    t0 = time.perf_counter()
    # the interior point iterates degrade once the dual becomes very degenerate;
    # one retry with looser gap targets usually lands on a certified point
    for loosen in (1.0, 10.0):
        options = {
            "show_progress": opts.verbose,
            "abstol": opts.tol * loosen,
            "reltol": opts.tol * loosen,
            "feastol": opts.feastol * loosen,
            "maxiters": opts.max_iters,
        }
        sol = solvers.conelp(c, Gm, hm, dims, kktsolver=kkt, options=options)
        status = _cvxopt_status(sol)
        if sol["status"] != "unknown":
            break
    elapsed = time.perf_counter() - t0
    x = np.array(sol["x"]).reshape(-1) if sol["x"] is not None else None
    info = {k: sol.get(k) for k in ("primal objective", "gap", "relative gap",
                                   "primal infeasibility", "dual infeasibility", "iterations")}
    return BackendResult(status, x, sol["status"], elapsed, info)


def solve_clarabel(prog: ConicProgramDescription, opts: SolverOptions) -> BackendResult:
    import clarabel

    G, h, dims = _stacked(prog, lambda s: _triangle_rows(s, upper=True))
    cones = []
    if dims["l"]:
        cones.append(clarabel.NonnegativeConeT(dims["l"]))
    cones += [clarabel.SecondOrderConeT(q) for q in dims["q"]]
    cones += [clarabel.PSDTriangleConeT(s) for s in dims["s"]]
    settings = clarabel.DefaultSettings()
    settings.verbose = opts.verbose
    settings.max_iter = opts.max_iters
    settings.tol_gap_abs = settings.tol_gap_rel = max(opts.tol, 1e-12)
    settings.tol_feas = max(opts.tol, 1e-12)
    if opts.time_limit:
        settings.time_limit = opts.time_limit
    P = sp.csc_matrix((prog.n_vars, prog.n_vars))
    t0 = time.perf_counter()
    sol = clarabel.DefaultSolver(P, prog.objective, G, h, cones, settings).solve()
    elapsed = time.perf_counter() - t0
    raw = str(sol.status)
    name = raw.split(".")[-1]
    status = {
        "Solved": OPTIMAL,
        "AlmostSolved": INACCURATE,
        "PrimalInfeasible": INFEASIBLE,
        "AlmostPrimalInfeasible": INFEASIBLE,
        "DualInfeasible": UNBOUNDED,
        "AlmostDualInfeasible": UNBOUNDED,
    }.get(name, FAILED)
    x = np.array(sol.x) if status in (OPTIMAL, INACCURATE) else None
    return BackendResult(status, x, raw, elapsed, {"iterations": sol.iterations})


def solve_scs(prog: ConicProgramDescription, opts: SolverOptions) -> BackendResult:
    import scs

    G, h, dims = _stacked(prog, lambda s: _triangle_rows(s, upper=False))
    cone = {k: v for k, v in dims.items() if v}
    settings = {
        "verbose": opts.verbose,
        "eps_abs": max(opts.tol, 1e-9),
        "eps_rel": max(opts.tol, 1e-9),
        "max_iters": max(opts.max_iters, 100_000),
    }
    if opts.time_limit:
        settings["time_limit_secs"] = opts.time_limit
    t0 = time.perf_counter()
    sol = scs.SCS({"A": G, "b": h, "c": prog.objective}, cone, **settings).solve()
    elapsed = time.perf_counter() - t0
    raw = sol["info"]["status"]
    status = {
        "solved": OPTIMAL,
        "solved_inaccurate": INACCURATE,
        "infeasible": INFEASIBLE,
        "infeasible_inaccurate": INFEASIBLE,
        "unbounded": UNBOUNDED,
        "unbounded_inaccurate": UNBOUNDED,
    }.get(raw, FAILED)
    x = np.asarray(sol["x"]) if status in (OPTIMAL, INACCURATE) else None
    return BackendResult(status, x, raw, elapsed, {"iterations": sol["info"]["iter"]})


BACKENDS = {
    "cvxopt": solve_cvxopt,
    "clarabel": solve_clarabel,
    "scs": solve_scs,
}

DEFAULT_BACKEND = "cvxopt"


def resolve_backend(name: str | None = None):
    """Adapter by name; ``None`` falls back to ``$REGRET_SOLVER`` then the default."""
    name = (name or os.environ.get("REGRET_SOLVER") or DEFAULT_BACKEND).lower()
    try:
        return name, BACKENDS[name]
    except KeyError:
        raise ConfigError(f"unknown solver backend {name!r}; choose from {sorted(BACKENDS)}") from None
