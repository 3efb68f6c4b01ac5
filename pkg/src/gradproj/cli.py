"""Command-line entry point: ``gradproj {run,suite,eigmin,estimate-lpl}``.

Exit codes: 0 converged, 1 acceptance failure, 2 iteration limit reached,
3 any error, including bad input and solver failures.
"""

from __future__ import annotations

import argparse
import math
import sys

import numpy as np

from .acceptance import CRITERION_IDS, run_suite
from .analysis import cap_region, fit_linear_rate, lpl_mu_estimate
from .config import parse_config, resolve_x0, validate
from .errors import GradProjError, ParseError, ValidationError
from .objectives import get_problem, load_matrix
from .sampling import RNG_NAME
from .solvers import SolverConfig, eigmin_run, run_algorithm
from .traceio import emit_trace

EXIT_OK, EXIT_SUITE_FAIL, EXIT_MAX_ITER, EXIT_ERROR = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _fitted_q(trace, f0):
    vals = trace.f_values - f0 if f0 is not None else trace.column("step_norm")
    try:
        return fit_linear_rate(vals).fitted_q
    except GradProjError:
        return math.nan


def _summary(trace, f0) -> str:
    pg = trace.records[-1].proj_grad_norm if trace.records else math.nan
    return (f"termination={trace.termination} final_f={trace.final_f:.17g} "
            f"proj_grad_norm={pg:.6e} iterations={len(trace.records)} "
            f"fitted_q={_fitted_q(trace, f0):.6g}")


def _exit_for(trace) -> int:
    return EXIT_MAX_ITER if trace.termination == "max_iter" else EXIT_OK


def _err(msg: str) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return EXIT_ERROR


def run_command(cfg) -> int:
    """Execute a validated :class:`RunConfig`; returns the exit code."""
    prob = validate(cfg)
    x0 = resolve_x0(cfg.x0, prob)
    header = {"config": cfg.as_header(), "problem": {"id": prob.id, "f0": prob.f0, "info": prob.info},
              "seed": cfg.seed, "rng": RNG_NAME}
    trace = None
    try:
        if cfg.algorithm == "eigmin":
            _, _, trace = eigmin_run(prob.quadratic, x0, config=cfg.solver_config())
        else:
            trace = run_algorithm(cfg.algorithm, prob.surface, prob.objective, cfg.solver_config(), x0)
    except GradProjError as exc:
        partial = getattr(exc, "trace", None)
        if partial is not None and cfg.path:
            emit_trace(partial, cfg.format, cfg.path, header)
        return _err(f"{type(exc).__name__}: {exc}")
    if cfg.path:
        emit_trace(trace, cfg.format, cfg.path, header)
    print(_summary(trace, prob.f0))
    return _exit_for(trace)


def _cmd_run(args) -> int:
    try:
        with open(args.config, encoding="utf-8") as fh:
            cfg = parse_config(fh.read())
        if args.out:
            cfg.path = args.out
        return run_command(cfg)
    except (ParseError, ValidationError, GradProjError, OSError) as exc:
        return _err(f"{type(exc).__name__}: {exc}")


def _cmd_suite(args) -> int:
    ids = None
    if args.filter:
        ids = [s.strip() for s in args.filter.split(",") if s.strip()]
        unknown = [i for i in ids if i not in CRITERION_IDS]
        if unknown:
            return _err(f"unknown criteria {', '.join(unknown)}; known: {', '.join(CRITERION_IDS)}")
    _, code = run_suite(ids, out_dir=args.out_dir, seed=args.seed, stream=sys.stdout)
    return code


def _cmd_eigmin(args) -> int:
    try:
        A = load_matrix(args.matrix)
        prob = get_problem(args.matrix)
        x0 = resolve_x0(args.x0, prob)
        cfg = SolverConfig("eigmin") if args.max_iter is None else SolverConfig("eigmin", max_iter=args.max_iter)
        lam_hat, v, trace = eigmin_run(A, x0, config=cfg)
        if args.out:
            emit_trace(trace, args.format, args.out, {"matrix": args.matrix, "rng": RNG_NAME})
    except (GradProjError, OSError, KeyError) as exc:
        return _err(f"{type(exc).__name__}: {exc}")
    print(f"lambda_min={lam_hat:.17g} vector={' '.join(f'{c:.17g}' for c in v)}")
    print(_summary(trace, float(prob.quadratic.eigenvalues[0])))
    return _exit_for(trace)


def _cmd_estimate_lpl(args) -> int:
    try:
        prob = get_problem(args.problem)
        if prob.f0 is None:
            return _err(f"problem {args.problem!r} has no registered minimum value")
        region = None
        if args.tau is not None:
            if prob.quadratic is None:
                return _err("--tau applies to quadratic problems only")
            E = prob.quadratic.eigenvectors
            k = int(np.sum(prob.quadratic.eigenvalues - prob.f0 <= 1e-12 * max(1.0, abs(prob.f0))))
            inner = cap_region(args.tau, k)
            region = lambda x: inner(E.T @ x) if k > 1 else (E[:, 0] @ x) >= args.tau  # noqa: E731
        est = lpl_mu_estimate(prob.surface, prob.objective, prob.f0, args.alpha,
                              beta=args.beta, n_samples=args.samples, seed=args.seed, region=region)
    except (GradProjError, KeyError, ValueError) as exc:
        return _err(f"{type(exc).__name__}: {exc}")
    print(f"mu_hat={est.mu_hat:.17g} alpha={est.alpha:g} n_samples={est.n_samples} "
          f"worst_point={' '.join(f'{c:.17g}' for c in est.worst_point)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="gradproj", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="run one solver from a config file")
    r.add_argument("--config", required=True)
    r.add_argument("--out", help="trace path; overrides the config's [output] path")
    r.set_defaults(func=_cmd_run)

    s = sub.add_parser("suite", help="run the acceptance criteria")
    s.add_argument("--filter", help="comma-separated criterion ids")
    s.add_argument("--out-dir", help="keep the traces here instead of a temporary directory")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=_cmd_suite)

    e = sub.add_parser("eigmin", help="smallest eigenvalue of a symmetric matrix file")
    e.add_argument("--matrix", required=True, help="whitespace-separated rows")
    e.add_argument("--x0", default="registry-default",
                   help="explicit vector, random:SEED or registry-default")
    e.add_argument("--max-iter", type=int)
    e.add_argument("--out")
    e.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")
    e.set_defaults(func=_cmd_eigmin)

    lp = sub.add_parser("estimate-lpl", help="sample the gradient-domination constant")
    lp.add_argument("--problem", required=True)
    lp.add_argument("--alpha", type=float, default=2.0)
    lp.add_argument("--samples", type=int, default=10_000)
    lp.add_argument("--seed", type=int, default=0)
    lp.add_argument("--beta", type=float, default=math.inf, help="keep samples with f <= beta")
    lp.add_argument("--tau", type=float, help="quadratic problems: restrict to (x, e1) >= tau")
    lp.set_defaults(func=_cmd_estimate_lpl)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
