"""Acceptance suite: each criterion runs small fixed problems and compares
measured quantities against the closed-form guarantees of the methods.

Criteria run in id order and print one ``PASS``/``FAIL`` line each. Traces
are written under a per-criterion directory so two suite runs can be
compared byte for byte.
"""

from __future__ import annotations

import filecmp
import math
import sys
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import analysis as an
from .objectives import PROBLEM_IDS, descent_gap, fd_gradient_check, get_problem
from .solvers import (
    SolverConfig,
    eigmin_run,
    ffw_run,
    gpa1_run,
    gpa2_run,
    gpa3_run,
    stationary_point_solve,
)
from .sampling import make_rng
from .traceio import emit_trace

TOLERANCES = {
    "lyapunov_slack": 1e-10,
    "sphere_step_slack": 1e-8,
    "q1_margin": 0.02,
    "domination_slack": 1e-9,
    "alpha_2": (1.85, 2.15),
    "alpha_43": (1.23, 1.43),
    "gpa2_slack": 1e-9,
    "membership": 1e-8,
    "superlinear_power": 1.2,
    "kkt_window": (1e-12, 1e-2),
    "ffw_rate_slack": 0.05,
    "ffw_rate_floor": 1e-10,
    "contraction_slack": 1e-8,
    "contraction_floor": 1e-9,
    "m_hat_min": 1.5,
    "minstat_tol": 1e-12,
    "cubic_range": (2.7, 3.3),
    "e2_rate_min": 0.99,
    "theta_residual": 1e-12,
    "fd_tol": 1e-5,
    "key_tol": 1e-10,
}


@dataclass
class CriterionResult:
    id: str
    passed: bool
    measured: str
    expected: str
    seconds: float = 0.0


@dataclass
class SuiteContext:
    out_dir: Path
    tol: dict = field(default_factory=lambda: dict(TOLERANCES))
    seed: int = 0

    def emit(self, cid: str, name: str, trace) -> None:
        d = self.out_dir / cid
        d.mkdir(parents=True, exist_ok=True)
        emit_trace(trace, "jsonl", d / f"{name}.jsonl", header={"criterion": cid, "run": name})


def _result(cid, ok, measured, expected):
    return CriterionResult(cid, bool(ok), measured, expected)


# ---------------------------------------------------------------------------
# criteria


def gpa1_lyapunov(ctx: SuiteContext) -> CriterionResult:
    slack = ctx.tol["lyapunov_slack"]
    worst = -math.inf
    for pid in ("quad", "linear", "approxlinear", "minstat", "ballwave"):
        prob = get_problem(pid)
        for s in range(3):
            tr = gpa1_run(prob.surface, prob.objective, SolverConfig("gpa1", max_iter=10_000),
                          prob.random_start(ctx.seed + s))
            ctx.emit("gpa1-lyapunov", f"{pid}-{s}", tr)
            f = tr.f_values
            lhs = f[1:] + 0.5 * tr.meta["C"] * tr.column("step_norm") ** 2
            worst = max(worst, float(np.max(lhs - f[:-1])))
    return _result("gpa1-lyapunov", worst <= slack,
                   f"max f(x+)+C/2|dx|^2-f(x) = {worst:.3e}", f"<= {slack:g}")


def stationary_steps(ctx: SuiteContext) -> CriterionResult:
    rows, ok = [], True
    for pid in ("quad", "linear", "approxlinear"):
        prob = get_problem(pid)
        for eps in (1e-2, 1e-3):
            res = stationary_point_solve(prob.surface, prob.objective, eps, x0=prob.x0,
                                         config=SolverConfig("stationary", seed=ctx.seed))
            ctx.emit("stationary-steps", f"{pid}-{eps:g}", res.trace)
            g = prob.objective.grad(res.x)
            resid = float(np.linalg.norm(prob.surface.tangent_project(res.x, g)))
            ok &= res.steps <= res.step_bound and resid <= eps
            rows.append(f"{pid}/{eps:g}: {res.steps}<={res.step_bound}, |P_T f'|={resid:.1e}")
    return _result("stationary-steps", ok, "; ".join(rows), "steps <= N and |P_T f'| <= eps")


def _eigmin_fixture(ctx):
    prob = get_problem("quad:diag=1,2,10")
    A = prob.quadratic.eigenvectors @ np.diag(prob.quadratic.eigenvalues) @ prob.quadratic.eigenvectors.T
    return prob, A


def sphere_step_bound(ctx: SuiteContext) -> CriterionResult:
    prob, A = _eigmin_fixture(ctx)
    lam_hat, v, tr = eigmin_run(A, prob.x0, config=SolverConfig("eigmin", max_iter=10_000))
    ctx.emit("sphere-step-bound", "diag-1-2-10", tr)
    mu, L1 = tr.meta["mu"], tr.meta["L1"]
    phi = tr.column("phi")
    slack = ctx.tol["sphere_step_slack"]
    worst, ok = -math.inf, True
    for k in range(len(phi) - 1):
        x = tr.records[k].x
        w = np.linalg.norm(L1 * x - 2.0 * A @ x)
        factor = 1.0 - mu / (2.0 * w)
        bound = factor * phi[k] * (1.0 + slack)
        if phi[k] > 0:
            worst = max(worst, phi[k + 1] / (factor * phi[k]))
        ok &= phi[k + 1] <= bound
    return _result("sphere-step-bound", ok and abs(mu - 1.0) < 1e-12,
                   f"mu = {mu:.15g}, max phi+/(factor*phi) = {worst:.6f}", f"<= 1 + {slack:g}")


def eigmin_rate(ctx: SuiteContext) -> CriterionResult:
    prob, A = _eigmin_fixture(ctx)
    lam_hat, v, tr = eigmin_run(A, prob.x0, config=SolverConfig("eigmin", max_iter=10_000))
    ctx.emit("eigmin-rate", "diag-1-2-10", tr)
    phi = tr.column("phi")
    q, q1 = tr.meta["q"], tr.meta["q1"]
    rep = an.fit_linear_rate(phi, theoretical_q=q1)
    fit_ok = rep.fitted_q <= q1 + ctx.tol["q1_margin"]
    k = np.arange(len(phi))
    env = q**k * phi[0]
    glob_ok = bool(np.all(phi <= env * (1 + 1e-12) + 1e-15))
    return _result("eigmin-rate", fit_ok and glob_ok,
                   f"fitted_q = {rep.fitted_q:.6f}, max phi_k/(q^k phi_0) = {np.max(phi / env):.4f}",
                   f"fitted_q <= q1 + {ctx.tol['q1_margin']:g} = {q1 + ctx.tol['q1_margin']:.6f}; "
                   f"phi_k <= q^k phi_0 with q = {q:.6f}")


def lpl_quadratic_bound(ctx: SuiteContext) -> CriterionResult:
    prob, _ = _eigmin_fixture(ctx)
    tau = 0.5
    lam = prob.quadratic.eigenvalues
    mu = 4.0 * tau**2 * (lam[1] - lam[0])
    # eigen-coordinates coincide with the standard basis for a diagonal fixture
    region = an.cap_region(tau)
    pts = []
    for x in prob.surface.sample(8 * 10_000, ctx.seed):
        if region(x):
            pts.append(x)
            if len(pts) == 10_000:
                break
    margins = []
    for x in pts:
        f, g = prob.objective.eval(x)
        pg = np.linalg.norm(prob.surface.tangent_project(x, g))
        margins.append(pg**2 - mu * (f - lam[0]))
    worst = float(min(margins))
    est = an.lpl_mu_estimate(prob.surface, prob.objective, lam[0], 2.0, n_samples=10_000,
                             seed=ctx.seed, region=region)
    ok = len(pts) == 10_000 and worst >= -ctx.tol["domination_slack"]
    return _result("lpl-quadratic-bound", ok,
                   f"{len(pts)} samples, min margin = {worst:.3e}, mu_hat = {est.mu_hat:.6f}",
                   f"margin >= -{ctx.tol['domination_slack']:g} with mu = {mu:g}")


def lpl_exponents(ctx: SuiteContext) -> CriterionResult:
    out, ok = [], True
    for p, key in (("0.5", "alpha_2"), ("1", "alpha_43")):
        prob = get_problem(f"lpl2d:p={p}")
        a = an.lpl_exponent_estimate(prob.surface, prob.objective, prob.f0, an.circle_path())
        lo, hi = ctx.tol[key]
        ok &= lo <= a <= hi
        out.append(f"p={p}: alpha_hat = {a:.4f} in [{lo}, {hi}]")
    return _result("lpl-exponents", ok, "; ".join(out), "alpha = 2 for p < 1, 4/3 for p = 1")


def gpa2_decrease(ctx: SuiteContext) -> CriterionResult:
    out, ok = [], True
    for pid in ("lpl2d:p=0.5", "scf"):
        prob = get_problem(pid)
        tr = gpa2_run(prob.surface, prob.objective, SolverConfig("gpa2", max_iter=20_000), prob.x0)
        ctx.emit("gpa2-decrease", pid.replace(":", "-").replace("=", ""), tr)
        f = tr.f_values
        pg = tr.column("proj_grad_norm")
        gap = (f[:-1] - f[1:]) - pg**2 * tr.meta["q_t"] + ctx.tol["gpa2_slack"] * (1 + np.abs(f[:-1]))
        member = max(prob.surface.membership_residual(x) for x in tr.iterates)
        ok &= bool(np.min(gap) >= 0) and member <= ctx.tol["membership"]
        out.append(f"{pid}: {len(pg)} steps, min slack = {np.min(gap):.2e}, max |g| = {member:.1e}")
    return _result("gpa2-decrease", ok, "; ".join(out),
                   "decrease >= q(t0)|P_T f'|^2 - 1e-9(1+|f|), residual <= 1e-8")


def gpa3_superlinear(ctx: SuiteContext) -> CriterionResult:
    prob = get_problem("quad:diag=1,2,3")
    x0 = np.array([1.0, 0.1, 0.1])
    x0 /= np.linalg.norm(x0)
    tr = gpa3_run(prob.surface, prob.objective, SolverConfig("gpa3", max_iter=10_000), x0)
    ctx.emit("gpa3-superlinear", "diag-1-2-3", tr)
    kkt = list(tr.column("kkt_norm"))
    if tr.meta.get("final_kkt_norm") is not None:
        kkt.append(tr.meta["final_kkt_norm"])
    lo, hi = ctx.tol["kkt_window"]
    power = ctx.tol["superlinear_power"]
    pairs = [(a, b) for a, b in zip(kkt[:-1], kkt[1:]) if lo <= a <= hi]
    sup_ok = bool(pairs) and all(b <= a**power for a, b in pairs)
    phases = [r.phase for r in tr.records]
    switches = sum(1 for a, b in zip(phases[:-1], phases[1:]) if a != b)
    ok = sup_ok and switches == 1 and tr.termination == "converged"
    worst = max((math.log(b) / math.log(a) for a, b in pairs if b > 0), default=math.nan)
    return _result("gpa3-superlinear", ok,
                   f"{len(pairs)} pairs, min log|F+|/log|F| = {worst:.3f}, {switches} phase switch, "
                   f"termination {tr.termination}",
                   f"|F+| <= |F|^{power} on [{lo:g}, {hi:g}], exactly 1 switch")


def ffw_linear_rate(ctx: SuiteContext) -> CriterionResult:
    prob = get_problem("approxlinear:eps=0.1")
    cfg = SolverConfig("ffw", max_iter=1000, tol_x=0.0)
    ref = ffw_run(prob.surface, prob.objective, cfg, prob.x0)
    tr = ffw_run(prob.surface, prob.objective, SolverConfig("ffw", max_iter=1000), prob.x0)
    ctx.emit("ffw-linear-rate", "approxlinear", tr)
    q = tr.meta["q"]
    d = np.linalg.norm(tr.iterates - ref.final_x, axis=1)
    env = q ** np.arange(d.size) * d[0]
    mask = env >= ctx.tol["ffw_rate_floor"]
    slack = ctx.tol["ffw_rate_slack"]
    ok = bool(np.all(d[mask] <= env[mask] * (1 + slack)))
    step = an.check_rate_bound(d, q, slack, floor=ctx.tol["ffw_rate_floor"])
    return _result("ffw-linear-rate", ok,
                   f"q = {q:.6f}, max |x_k-x*|/(q^k|x_0-x*|) = {np.max(d[mask] / env[mask]):.4f} "
                   f"over {int(mask.sum())} iterates; worst one-step ratio {step.worst_ratio:.4f}",
                   f"<= 1 + {slack:g}")


def ffw_contraction(ctx: SuiteContext) -> CriterionResult:
    prob = get_problem("ballwave")
    tr = ffw_run(prob.surface, prob.objective, SolverConfig("ffw", max_iter=1000), prob.x0)
    ctx.emit("ffw-contraction", "ballwave", tr)
    m_hat = tr.meta["m_hat"]
    chk = an.ffw_contraction_check(tr, slack=ctx.tol["contraction_slack"],
                                   floor=ctx.tol["contraction_floor"])
    ok = m_hat >= ctx.tol["m_hat_min"] and chk is not None and chk.passed
    return _result("ffw-contraction", ok,
                   f"m_hat = {m_hat:.4f}, worst step ratio = {chk.worst_ratio:.4f} ({chk.n_checked} pairs)",
                   f"m_hat >= {ctx.tol['m_hat_min']}, ratio <= 1/m_hat = {1 / m_hat:.4f}")


def minstat_stationary(ctx: SuiteContext) -> CriterionResult:
    tol = ctx.tol["minstat_tol"]
    prob = get_problem("minstat:r=2")
    tr = ffw_run(prob.surface, prob.objective, SolverConfig("ffw", max_iter=1), prob.x0)
    ctx.emit("minstat-stationary", "one-step", tr)
    x1 = tr.final_x
    dist = an.stationarity_distance(prob.surface, prob.objective, x1)
    a = np.array([-math.sqrt(3.0), -1.0])
    fa = prob.objective.f(a)
    x0 = prob.x0
    ok = (x0[0] > 0 and -1 < x0[1] < 0 and np.linalg.norm(x1) <= tol and dist <= tol
          and abs(fa + 0.5) <= tol and prob.objective.f(x1) > fa)
    return _result("minstat-stationary", ok,
                   f"x1 = ({x1[0]:.1e}, {x1[1]:.1e}), dist = {dist:.1e}, f(x1) = {prob.objective.f(x1):g}, "
                   f"f(a) = {fa:.17g}",
                   "x1 = 0 stationary, f(a) = -1/2 < f(x1)")


def e2_sublinear(ctx: SuiteContext) -> CriterionResult:
    prob = get_problem("e2")
    xs = np.geomspace(1e-1, 1e-3, 9)
    gaps = []
    for a in xs:
        start = np.array([a, 0.5 - math.sqrt(0.25 - a * a)])
        tr = ffw_run(prob.surface, prob.objective, SolverConfig("ffw", max_iter=1), start)
        gaps.append(abs(a - tr.final_x[0]))
    gaps = np.array(gaps)
    expo = float(np.polyfit(np.log(xs), np.log(gaps), 1)[0])
    C = float(np.max(gaps / xs**3))
    tr = ffw_run(prob.surface, prob.objective, SolverConfig("ffw", max_iter=1000), prob.x0)
    ctx.emit("e2-sublinear", "long-run", tr)
    rep = an.fit_linear_rate(np.abs(tr.iterates[:, 0]))
    lo, hi = ctx.tol["cubic_range"]
    ok = lo <= expo <= hi and rep.fitted_q > ctx.tol["e2_rate_min"] and tr.termination == "max_iter"
    return _result("e2-sublinear", ok,
                   f"cubic exponent = {expo:.4f} (C = {C:.3f}), tail rate = {rep.fitted_q:.6f}",
                   f"exponent in [{lo}, {hi}], rate > {ctx.tol['e2_rate_min']}")


def ffw_theta_calculator(ctx: SuiteContext) -> CriterionResult:
    h1 = an.h(1.0)
    res = {m: abs(an.h_ratio(an.theta_m(m)) - m) for m in (1.05, 1.2, 1.4)}
    rates = []
    for m in (1.05, 1.2, 1.4, 2.0):
        tm = an.theta_m(m)
        for th in np.linspace(tm / 101, tm * 100 / 101, 100):
            rates.append(an.ffw_local_rate(m, th))
    worst = max(res.values())
    ok = h1 == math.sqrt(2.0) and worst <= ctx.tol["theta_residual"] and max(rates) < 1.0
    return _result("ffw-theta-calculator", ok,
                   f"h(1) - sqrt2 = {h1 - math.sqrt(2.0):g}, max residual = {worst:.1e}, "
                   f"max rate = {max(rates):.6f}",
                   f"h(1) = sqrt2, residual <= {ctx.tol['theta_residual']:g}, rate < 1")


def derivative_hygiene(ctx: SuiteContext) -> CriterionResult:
    worst_fd, worst_key = 0.0, -math.inf
    for pid in PROBLEM_IDS:
        prob = get_problem(pid)
        obj = prob.objective
        pts = prob.surface.sample(100, ctx.seed)
        worst_fd = max(worst_fd, max(fd_gradient_check(obj, x) for x in pts))
        rng = make_rng(ctx.seed)
        cloud = prob.surface.sample(200, ctx.seed + 1)
        for _ in range(1000):
            i, j = rng.integers(0, len(cloud), size=2)
            x, y = cloud[i], cloud[j]
            scale = 1.0 + float(np.dot(y - x, y - x))
            worst_key = max(worst_key, descent_gap(obj, x, y, C=obj.L1) / scale)
    ok = worst_fd <= ctx.tol["fd_tol"] and worst_key <= ctx.tol["key_tol"]
    return _result("derivative-hygiene", ok,
                   f"max fd gap = {worst_fd:.2e}, max quadratic-bound gap = {worst_key:.2e}",
                   f"fd <= {ctx.tol['fd_tol']:g}, gap <= {ctx.tol['key_tol']:g}(1+|y-x|^2)")


CRITERIA: dict[str, Callable[[SuiteContext], CriterionResult]] = {
    "gpa1-lyapunov": gpa1_lyapunov,
    "stationary-steps": stationary_steps,
    "sphere-step-bound": sphere_step_bound,
    "eigmin-rate": eigmin_rate,
    "lpl-quadratic-bound": lpl_quadratic_bound,
    "lpl-exponents": lpl_exponents,
    "gpa2-decrease": gpa2_decrease,
    "gpa3-superlinear": gpa3_superlinear,
    "ffw-linear-rate": ffw_linear_rate,
    "ffw-contraction": ffw_contraction,
    "minstat-stationary": minstat_stationary,
    "e2-sublinear": e2_sublinear,
    "ffw-theta-calculator": ffw_theta_calculator,
    "derivative-hygiene": derivative_hygiene,
}
DETERMINISM_ID = "determinism"
CRITERION_IDS = tuple(sorted([*CRITERIA, DETERMINISM_ID]))


def _run_one(cid: str, ctx: SuiteContext) -> CriterionResult:
    t0 = time.perf_counter()
    try:
        res = CRITERIA[cid](ctx)
    except Exception as exc:  # a crash is reported as a failure, never raised
        res = CriterionResult(cid, False, f"raised {type(exc).__name__}: {exc}", "no exception")
    res.seconds = time.perf_counter() - t0
    return res


def _dir_files(d: Path):
    return sorted(p.relative_to(d).as_posix() for p in d.rglob("*") if p.is_file())


def determinism(ctx: SuiteContext, ids, first_dir: Path) -> CriterionResult:
    """Re-run ``ids`` into a fresh directory and compare every trace file."""
    t0 = time.perf_counter()
    with tempfile.TemporaryDirectory() as tmp:
        second = SuiteContext(Path(tmp), dict(ctx.tol), ctx.seed)
        for cid in ids:
            _run_one(cid, second)
        a, b = _dir_files(first_dir), _dir_files(second.out_dir)
        same_names = a == b
        mismatched = [] if not same_names else [
            name for name in a if not filecmp.cmp(first_dir / name, second.out_dir / name, shallow=False)]
    ok = same_names and not mismatched and len(a) > 0
    res = CriterionResult(DETERMINISM_ID, ok,
                          f"{len(a)} trace files, {len(mismatched)} differ"
                          + ("" if same_names else ", file sets differ"),
                          "byte-identical traces across two runs")
    res.seconds = time.perf_counter() - t0
    return res


def run_suite(ids=None, out_dir=None, tolerances: dict | None = None, seed: int = 0,
              stream=None) -> tuple[list[CriterionResult], int]:
    """Run the acceptance criteria.

    Parameters
    ----------
    ids : iterable of str, optional
        Criterion ids to run; all of :data:`CRITERION_IDS` by default.
    out_dir : path, optional
        Where traces are written; a temporary directory when omitted.
    tolerances : dict, optional
        Overrides for :data:`TOLERANCES`.
    seed : int
        Base seed for sampled starts and sample sets.
    stream : file, optional
        Receives one ``PASS``/``FAIL`` line per criterion; ``None`` for quiet.

    Returns
    -------
    (results, exit_code)
        Results sorted by id; exit code 0 iff every criterion passed.
    """
    selected = sorted(set(CRITERION_IDS if ids is None else ids))
    unknown = [i for i in selected if i not in CRITERION_IDS]
    if unknown:
        raise KeyError(f"unknown criteria: {', '.join(unknown)}")
    tol = dict(TOLERANCES)
    tol.update(tolerances or {})
    tmp = None
    if out_dir is None:
        tmp = tempfile.TemporaryDirectory()
        out_dir = tmp.name
    try:
        ctx = SuiteContext(Path(out_dir), tol, seed)
        ctx.out_dir.mkdir(parents=True, exist_ok=True)
        others = [c for c in selected if c != DETERMINISM_ID]
        if DETERMINISM_ID in selected and not others:
            others = [c for c in CRITERION_IDS if c != DETERMINISM_ID]
        results = {}
        for cid in others:
            results[cid] = _run_one(cid, ctx)
        if DETERMINISM_ID in selected:
            results[DETERMINISM_ID] = determinism(ctx, others, ctx.out_dir)
        ordered = [results[c] for c in selected]
    finally:
        if tmp is not None:
            tmp.cleanup()
    if stream is not None:
        for r in ordered:
            print(f"{'PASS' if r.passed else 'FAIL'} {r.id}: measured {r.measured}; "
                  f"expected {r.expected} [{r.seconds:.2f}s]", file=stream)
    code = 0 if all(r.passed for r in ordered) else 1
    return ordered, code


def main(argv=None) -> int:
    ids = argv if argv else None
    _, code = run_suite(ids, stream=sys.stdout)
    return code
