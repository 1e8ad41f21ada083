"""Command-line front end.

Exit codes: 0 ok, 2 configuration or argument error, 3 infeasible program,
4 solver or numerical failure, 5 I/O error.  ``$REGRET_SOLVER`` picks the
conic backend when neither the config nor ``--solver`` does.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .certificates import (CertificateSpec, append_csv_row, empirical_violation, min_scenarios_exact,
                           min_scenarios_simple, training_samples)
from .config import RunConfig
from .errors import (ConfigError, DimensionMismatch, DomainError, EigenFailure, Infeasible, NumericalFailure,
                     RegretError, SolverFailure)
from .structure import count_decision_variables
from .synthesis.backends import resolve_backend
from .synthesis.solve import SynthesisResult, solve_scenario_program

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_SOLVER = 4
EXIT_IO = 5

RESULT_FILE = "result.json"
REPORT_FILE = "validation.json"
REPORT_CSV = "validation.csv"

log = logging.getLogger("scenario_regret")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    tmp.replace(path)


def _load_config(args) -> RunConfig:
    if not args.config:
        raise ConfigError("--config is required")
    cfg = RunConfig.load(args.config)
    return cfg.with_overrides(seed=args.seed, N=getattr(args, "scenarios", None),
                              objective=getattr(args, "objective", None),
                              structure=getattr(args, "structure", None),
                              epsilon=getattr(args, "eps", None), beta=getattr(args, "beta", None),
                              out=getattr(args, "out", None))


def _load_result(path) -> tuple[SynthesisResult, RunConfig]:
    with open(path) as fh:
        text = fh.read()
    try:
        payload = json.loads(text)
        cfg = RunConfig.from_dict(payload["config"])
        result = SynthesisResult.from_dict(payload["result"])
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: not a result file ({exc})") from None
    return result, cfg


def cmd_synth(args) -> int:
    cfg = _load_config(args)
    backend = args.solver or cfg.backend
    resolve_backend(backend)
    system = cfg.system()
    weights = cfg.weights(system)
    dataset = training_samples(cfg.sampler(system), cfg.N, cfg.seed)
    result = solve_scenario_program(dataset, system, weights, cfg.objective, safety=cfg.safety(),
                                    structure=cfg.structure, backend=backend, lmi_form=cfg.lmi_form,
                                    options=cfg.solver_options(), safety_slack=cfg.safety_slack)
    spec = CertificateSpec(cfg.epsilon, cfg.beta, result.delta.structural, cfg.N)
    out = Path(cfg.out_dir) / RESULT_FILE
    _write_json(out, {"version": __version__, "config": cfg.data, "result": result.to_dict(),
                      "certificate": {**spec.as_dict(), "holds": spec.holds()}})
    print(f"{cfg.objective} level {result.gamma_star:.10g} over N={cfg.N} "
          f"({result.structure}, delta={result.delta.structural}, status={result.solver_status})")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_certify(args) -> int:
    if args.eps is None or args.beta is None:
        raise ConfigError("--eps and --beta are required")
    if args.delta is not None:
        delta, source = args.delta, "given on the command line"
    elif args.result:
        result, _ = _load_result(args.result)
        delta = result.delta.structural
        source = f"structural count from {args.result} (closed form: {result.delta.closed_form})"
    elif args.config:
        cfg = RunConfig.load(args.config).with_overrides(structure=args.structure)
        system = cfg.system()
        count = count_decision_variables(system.n, system.m, system.p, system.T, cfg.structure)
        delta = count.structural
        source = f"structural count for {cfg.structure} (closed form: {count.closed_form})"
    else:
        raise ConfigError("give --delta, --result or --config")
    spec = CertificateSpec(args.eps, args.beta, delta, args.scenarios)
    exact, simple = min_scenarios_exact(args.eps, args.beta, delta), min_scenarios_simple(args.eps, args.beta, delta)
    print(f"epsilon={args.eps} beta={args.beta} delta={delta}")
    print(f"delta source: {source}")
    print(f"exact N = {exact}")
    print(f"simple N = {simple}")
    if args.scenarios is not None:
        print(f"N = {args.scenarios}: {'certified' if spec.holds() else 'not certified'}")
    if args.out:
        _write_json(Path(args.out) / "certificate.json",
                    {**spec.as_dict(), "delta_source": source, "holds": spec.holds() if args.scenarios else None})
    return EXIT_OK


def cmd_validate(args) -> int:
    if not args.result:
        raise ConfigError("--result is required")
    if args.validate_samples is not None and args.validate_samples < 1:
        raise ConfigError("--validate-samples must be at least 1")
    result, cfg = _load_result(args.result)
    system = cfg.system()
    weights = cfg.weights(system)
    sampler = cfg.sampler(system)
    safety = cfg.safety()
    if args.training:
        samples = training_samples(sampler, cfg.N, cfg.seed)
        report = empirical_violation(result, system, weights, safety, samples=samples, seed=cfg.seed)
    else:
        n = args.validate_samples or 1000
        seed = cfg.seed if args.seed is None else args.seed
        report = empirical_violation(result, system, weights, safety, sampler=sampler, n_validation=n, seed=seed)
    out = Path(args.out or cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    spec = CertificateSpec(cfg.epsilon, cfg.beta, result.delta.structural, result.n_scenarios)
    payload = {"version": __version__, "mode": "training" if args.training else "validation",
               "result_dataset": result.dataset_id, "report": report.to_dict(), "certificate": spec.as_dict()}
    _write_json(out / REPORT_FILE, payload)
    append_csv_row(out / REPORT_CSV, report, spec)
    print(f"violations {report.n_any}/{report.n_validation} (rate {report.empirical_rate:.6g}, "
          f"epsilon {cfg.epsilon}); failed evaluations {report.n_failed}")
    return EXIT_OK


def cmd_repro(args) -> int:
    from .evaluation.experiments import preset, run_experiment

    overrides = {} if args.seed is None else {"seed": args.seed}
    if args.solver:
        overrides["backend"] = args.solver
    cfg = preset(args.kind, args.scale, **overrides)
    report = run_experiment(args.kind, cfg, args.out or ".")
    print(f"{args.kind}: {len(report.rows)} rows, {len(report.failures)} failed points -> {report.csv_path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="scenario-regret", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("synth", help="solve the scenario program")
    s.add_argument("--config", required=True)
    s.add_argument("--out")
    s.add_argument("--seed", type=int)
    s.add_argument("--objective", choices=["regret", "hinf"])
    s.add_argument("--structure", choices=["full", "toeplitz"])
    s.add_argument("--scenarios", type=int, metavar="N")
    s.add_argument("--eps", type=float)
    s.add_argument("--beta", type=float)
    s.add_argument("--solver", help="conic backend (overrides the config and $REGRET_SOLVER)")
    s.set_defaults(func=cmd_synth)

    c = sub.add_parser("certify", help="sample-size bounds")
    c.add_argument("--eps", type=float)
    c.add_argument("--beta", type=float)
    c.add_argument("--delta", type=int)
    c.add_argument("--result")
    c.add_argument("--config")
    c.add_argument("--structure", choices=["full", "toeplitz"])
    c.add_argument("--scenarios", type=int, metavar="N")
    c.add_argument("--out")
    c.set_defaults(func=cmd_certify)

    v = sub.add_parser("validate", help="empirical violation rate of a result")
    v.add_argument("--result", required=True)
    v.add_argument("--validate-samples", type=int)
    v.add_argument("--seed", type=int)
    v.add_argument("--training", action="store_true", help="replay the training scenarios instead")
    v.add_argument("--out")
    v.set_defaults(func=cmd_validate)

    r = sub.add_parser("repro", help="run a benchmark sweep")
    r.add_argument("kind")
    r.add_argument("--scale", default="small", choices=["small", "paper"])
    r.add_argument("--out")
    r.add_argument("--seed", type=int)
    r.add_argument("--solver")
    r.set_defaults(func=cmd_repro)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, DomainError, DimensionMismatch) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Infeasible as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (SolverFailure, NumericalFailure, EigenFailure) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except RegretError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
