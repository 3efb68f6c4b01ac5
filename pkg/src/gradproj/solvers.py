"""Constant-step iteration schemes for minimization on nonconvex surfaces.

Each ``*_run`` function returns a :class:`Trace`. Record ``k`` describes the
iterate ``x_k`` and the step taken *from* it (``step_norm = ||x_{k+1} - x_k||``);
``Trace.final_x`` is the last iterate produced.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .errors import (
    ConfigInvalid,
    DegenerateStep,
    GradProjError,
    NewtonDiverged,
    SingularJacobian,
    ZeroDirection,
    ZeroVector,
)
from .geometry import SphereSurface, reach_offset, segment_surface_intersect
from .objectives import ObjectiveOracle, QuadraticForm, quadratic_spectrum

ALGORITHMS = ("gpa1", "stationary", "sphere-gpa", "gpa2", "gpa3", "ffw", "eigmin")


@dataclass
class SolverConfig:
    algorithm: str = "gpa1"
    t: float | None = None
    C: float | None = None
    eps: float = 1e-3
    max_iter: int = 100_000
    tol_x: float = 1e-12
    pg_tol: float = 1e-12
    bisect_tol: float = 1e-12
    newton_tol: float = 1e-12
    seed: int = 0


@dataclass
class IterationRecord:
    k: int
    x: np.ndarray
    f: float
    proj_grad_norm: float
    step_norm: float
    residual_z: float | None = None
    phase: str | None = None
    phi: float | None = None
    kkt_norm: float | None = None


@dataclass
class Trace:
    algorithm: str
    records: list[IterationRecord]
    termination: str
    final_x: np.ndarray
    final_f: float
    meta: dict = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    @property
    def f_values(self) -> np.ndarray:
        """``f(x_0), ..., f(x_K)`` including the final iterate."""
        return np.append(self.column("f"), self.final_f)

    @property
    def iterates(self) -> np.ndarray:
        return np.vstack([r.x for r in self.records] + [self.final_x])


def _fail(exc_type, message, records, algorithm, x, f, meta):
    trace = Trace(algorithm, records, exc_type.code, x, f, meta)
    return exc_type(message, trace=trace)


def default_penalty(obj: ObjectiveOracle, R: float) -> float:
    """A penalty ``C`` satisfying ``L / (C + L1) < R`` with room to spare."""
    return max(obj.L1, 2.0 * (obj.L / R - obj.L1))


def gpa2_step_bound(obj: ObjectiveOracle, R: float) -> float:
    """Largest step ``t0 = 1 / (L1 + 2L/R)`` of the tangent-plane method."""
    return 1.0 / (obj.L1 + 2.0 * obj.L / R)


def one_step_gain(t: float, obj: ObjectiveOracle, R: float) -> float:
    """Guaranteed decrease factor ``t - t^2 (L1/2 + L/R)`` per unit ``||P_T f'||^2``."""
    return t - t * t * (0.5 * obj.L1 + obj.L / R)


# ---------------------------------------------------------------------------
# GPA1 and the stationary-point algorithm


def gpa1_run(surface, obj: ObjectiveOracle, config: SolverConfig | None = None, x0=None) -> Trace:
    """Projected gradient with constant step ``1 / (C + L1)``.

    Needs a surface with a closed-form metric projection (sphere or ball
    boundary). Raises :class:`ConfigInvalid` unless ``L / (C + L1) < R``.
    """
    config = config or SolverConfig("gpa1")
    if not hasattr(surface, "project"):
        raise ConfigInvalid("gpa1 needs a surface with closed-form projection; use gpa2 for level sets")
    R = surface.R
    C = default_penalty(obj, R) if config.C is None else float(config.C)
    if not (C > 0 and obj.L / (C + obj.L1) < R):
        raise ConfigInvalid(f"need C > 0 and L/(C+L1) < R; got C={C:g}, L={obj.L:g}, L1={obj.L1:g}, R={R:g}")
    C1 = C + obj.L1
    meta = {"C": C, "C1": C1, "t": 1.0 / C1, "L": obj.L, "L1": obj.L1, "R": R}

    x = surface.check_on_surface(x0)
    f, g = obj.eval(x)
    records = []
    for k in range(config.max_iter):
        try:
            x_new = surface.project(x - g / C1)
        except ZeroVector as exc:
            raise _fail(DegenerateStep, str(exc), records, "gpa1", x, f, meta) from exc
        step = float(np.linalg.norm(x_new - x))
        pg = float(np.linalg.norm(surface.tangent_project(x, g)))
        records.append(IterationRecord(k, x, f, pg, step))
        x = x_new
        f, g = obj.eval(x)
        if step < config.tol_x or pg < config.pg_tol:
            return Trace("gpa1", records, "converged", x, f, meta)
    return Trace("gpa1", records, "max_iter", x, f, meta)


def estimate_delta_f(surface, f, n_samples: int = 10_000, seed: int = 0, safety: float = 1.5) -> float:
    """Upper estimate of ``sup f - inf f`` over the surface.

    ``safety * 2 * max |f - mean f|`` over quasi-random surface samples.
    """
    vals = np.array([f(x) for x in surface.sample(n_samples, seed)])
    return safety * 2.0 * float(np.max(np.abs(vals - vals.mean())))


@dataclass
class StationaryResult:
    x: np.ndarray
    steps: int
    delta: float
    delta_f: float
    step_bound: int
    C: float
    trace: Trace


def stationary_point_solve(surface, obj: ObjectiveOracle, eps: float, C: float | None = None,
                           x0=None, config: SolverConfig | None = None,
                           n_samples: int = 10_000) -> StationaryResult:
    """Run GPA1 until a step shorter than ``delta = eps / (C + 2 L1)``.

    The returned point is ``eps``-stationary, and at most
    ``floor(2 Delta_f / (C delta^2)) + 1`` steps are taken (``Delta_f`` is
    estimated by sampling, see :func:`estimate_delta_f`).
    """
    config = config or SolverConfig("stationary")
    R = surface.R
    if C is None:
        C = config.C if config.C is not None else default_penalty(obj, R)
    if not C > max(0.0, obj.L / R - obj.L1):
        raise ConfigInvalid(f"need C > max(0, L/R - L1) = {max(0.0, obj.L / R - obj.L1):g}, got {C:g}")
    delta = eps / (C + 2.0 * obj.L1)
    delta_f = estimate_delta_f(surface, obj.f, n_samples=n_samples, seed=config.seed)
    bound = int(math.floor(2.0 * delta_f / (C * delta * delta))) + 1
    run_cfg = replace(config, algorithm="gpa1", C=C, tol_x=delta, pg_tol=-1.0)
    trace = gpa1_run(surface, obj, run_cfg, x0)
    trace.algorithm = "stationary"
    trace.meta.update({"eps": eps, "delta": delta, "delta_f": delta_f, "N": bound})
    return StationaryResult(trace.final_x, len(trace.records), delta, delta_f, bound, C, trace)


# ---------------------------------------------------------------------------
# unit sphere


def sphere_residual_z(x, g, L1) -> float:
    w = L1 * x - g
    return float(np.linalg.norm(w) - np.dot(w, x))


def sphere_gpa_run(obj: ObjectiveOracle, config: SolverConfig | None = None, x0=None) -> Trace:
    """``x <- (x - t f'(x)) / ||x - t f'(x)||`` on the unit sphere, ``t = 1/L1`` by default."""
    config = config or SolverConfig("sphere-gpa")
    t = 1.0 / obj.L1 if config.t is None else float(config.t)
    x = np.asarray(x0, dtype=float)
    SphereSurface(x.size).check_on_surface(x)
    meta = {"t": t, "L1": obj.L1, "L": obj.L}
    f, g = obj.eval(x)
    records = []
    for k in range(config.max_iter):
        y = x - t * g
        ny = float(np.linalg.norm(y))
        if ny == 0.0:
            raise _fail(DegenerateStep, "x - t f'(x) vanished", records, "sphere-gpa", x, f, meta)
        x_new = y / ny
        pg = float(np.linalg.norm(g - np.dot(g, x) * x))
        step = float(np.linalg.norm(x_new - x))
        records.append(IterationRecord(k, x, f, pg, step, residual_z=sphere_residual_z(x, g, obj.L1)))
        x = x_new
        f, g = obj.eval(x)
        if step < config.tol_x or pg < config.pg_tol:
            return Trace("sphere-gpa", records, "converged", x, f, meta)
    return Trace("sphere-gpa", records, "max_iter", x, f, meta)


def eigmin_run(A, x0=None, tau_check: bool = True, config: SolverConfig | None = None):
    """Smallest eigenvalue of a symmetric matrix by the sphere iteration with
    ``t = 1 / (2 lam_n)``.

    When ``lam_n <= 0`` the matrix is shifted by ``(1 + |lam_n|) I`` first;
    this keeps eigenvectors and eigenvalue gaps. With ``tau_check`` the trace
    carries ``phi_k = (A x_k, x_k) - lam_1`` against the Jacobi spectrum, and
    the header constants ``tau``, ``mu``, ``q`` and ``q1``; ``phi`` is summed in
    the eigenbasis so it keeps full relative accuracy near the minimum.

    Returns
    -------
    (lam_hat, v, trace)
    """
    config = config or SolverConfig("eigmin")
    qf = A if isinstance(A, QuadraticForm) else QuadraticForm.from_matrix(A)
    lam, E = qf.eigenvalues, qf.eigenvectors
    n = qf.n
    shift = 0.0 if lam[-1] > 0 else 1.0 + abs(float(lam[-1]))
    As = qf.A + shift * np.eye(n)
    L1 = 2.0 * (float(lam[-1]) + shift)
    obj = ObjectiveOracle(
        f=lambda x: float(x @ As @ x),
        grad=lambda x: 2.0 * (As @ x),
        L=1.1 * 2.0 * float(np.max(np.abs(lam + shift))),
        L1=L1,
        name="eigmin",
    )
    if x0 is None:
        x0 = np.ones(n)
    x0 = np.asarray(x0, dtype=float)
    nx = float(np.linalg.norm(x0))
    if nx == 0.0:
        raise ZeroVector("eigmin start vector is zero")
    x0 = x0 / nx
    trace = sphere_gpa_run(obj, replace(config, algorithm="sphere-gpa", t=1.0 / L1), x0)
    trace.algorithm = "eigmin"
    for rec in trace.records:
        rec.f -= shift
    trace.final_f -= shift
    trace.meta.update({"shift": shift, "L1": L1, "lambda": [float(v) for v in lam]})
    if tau_check:
        # sum_i (lam_i - lam_1) (e_i, x)^2 equals (Ax, x) - lam_1 without the cancellation
        gaps = lam - lam[0]
        for rec in trace.records:
            rec.phi = float(gaps @ (E.T @ rec.x) ** 2)
        trace.meta.update(eigmin_constants(lam, E, x0))
    v = trace.final_x
    return float(v @ qf.A @ v), v, trace


def eigmin_constants(lam, E, x0, rtol: float = 1e-12) -> dict:
    """Rate constants of the eigenvalue iteration for a given start.

    Handles a repeated smallest eigenvalue by measuring ``tau`` as the norm
    of the projection onto the whole bottom eigenspace and using the first
    strictly larger eigenvalue in the gap.
    """
    lam = np.asarray(lam, dtype=float)
    spread = float(lam[-1] - lam[0])
    k = int(np.sum(lam - lam[0] <= rtol * max(1.0, float(np.max(np.abs(lam))))))
    tau = float(np.linalg.norm(E[:, :k].T @ x0))
    out = {"tau": tau, "multiplicity": k}
    if k < lam.size and spread > 0:
        gap = float(lam[k] - lam[0])
        out.update({
            "mu": 4.0 * tau * tau * gap,
            "q": 1.0 - tau * tau * gap / spread,
            "q1": float(lam[-1] - lam[k]) / spread,
        })
    return out


# ---------------------------------------------------------------------------
# GPA2: tangent step plus bisection retraction


def gpa2_run(surface, obj: ObjectiveOracle, config: SolverConfig | None = None, x0=None) -> Trace:
    """Gradient step in the tangent plane, then bisection back onto the surface.

    The chord searched is ``z -/+ p (R - sqrt(R^2 - ||x - z||^2))`` with ``p``
    the unit normal at ``x``. Requires ``0 < t < 2 t0``; ``t0`` is the default.
    """
    config = config or SolverConfig("gpa2")
    ls = surface.as_level_set()
    R = float(ls.R)
    t0 = gpa2_step_bound(obj, R)
    t = t0 if config.t is None else float(config.t)
    if not 0 < t < 2 * t0:
        raise ConfigInvalid(f"step t={t:g} outside (0, 2 t0) = (0, {2 * t0:g})")
    meta = {"t": t, "t0": t0, "q_t": one_step_gain(t, obj, R), "L": obj.L, "L1": obj.L1, "R": R}
    x = _polish(ls, ls.check_on_surface(x0), config.bisect_tol)
    f, g = obj.eval(x)
    records = []
    for k in range(config.max_iter):
        try:
            x_new, pg = _gpa2_step(ls, x, g, t, R, config.bisect_tol)
        except GradProjError as exc:
            exc.trace = Trace("gpa2", records, exc.code, x, f, meta)
            raise
        step = float(np.linalg.norm(x_new - x))
        records.append(IterationRecord(k, x, f, pg, step))
        x = x_new
        f, g = obj.eval(x)
        if step < config.tol_x or pg < config.pg_tol:
            return Trace("gpa2", records, "converged", x, f, meta)
    return Trace("gpa2", records, "max_iter", x, f, meta)


def _gpa2_step(ls, x, g, t, R, bisect_tol):
    p = ls.unit_normal(x)
    pg_vec = g - np.dot(g, p) * p
    pg = float(np.linalg.norm(pg_vec))
    if pg == 0.0:
        return x.copy(), 0.0
    z = x - t * pg_vec
    s = reach_offset(R, t * pg)
    return segment_surface_intersect(ls, z - s * p, z + s * p, bisect_tol), pg


def _polish(ls, x, tol):
    """Pull a start point that passed the loose membership check onto the
    surface to bisection accuracy, searching along the normal line."""
    gx = float(ls.g(x))
    if abs(gx) <= tol:
        return x
    d = np.asarray(ls.grad_g(x), dtype=float)
    nd = float(np.linalg.norm(d))
    reach = 4.0 * abs(gx) / nd
    try:
        return segment_surface_intersect(ls, x - reach * d / nd, x + reach * d / nd, tol)
    except GradProjError:
        return x


# ---------------------------------------------------------------------------
# GPA3: tangent-plane gradient phase, then modified Newton on the KKT system


@dataclass
class KKTResidual:
    F: np.ndarray
    Fprime: np.ndarray
    sigma1: float
    mnew: float


def newton_kkt_residual(obj: ObjectiveOracle, x, lam: float) -> KKTResidual:
    """KKT map ``F(x, lam) = [f'(x) + lam x; (||x||^2 - 1)/2]`` and its Jacobian.

    ``sigma1`` is the smallest-magnitude eigenvalue of the (symmetric)
    Jacobian; ``mnew`` is the left-hand side of the local convergence test
    for the modified Newton method, ``L1/sigma1^2 * sqrt(||P_T f'||^2 + g^2)``.
    """
    if obj.hess is None:
        raise ConfigInvalid(f"objective {obj.name!r} has no Hessian")
    x = np.asarray(x, dtype=float)
    n = x.size
    g = np.asarray(obj.grad(x), dtype=float)
    gx = 0.5 * (float(np.dot(x, x)) - 1.0)
    F = np.append(g + lam * x, gx)
    J = np.zeros((n + 1, n + 1))
    J[:n, :n] = np.asarray(obj.hess(x), dtype=float) + lam * np.eye(n)
    J[:n, n] = x
    J[n, :n] = x
    sig, _ = quadratic_spectrum(J)
    sigma1 = float(np.min(np.abs(sig)))
    tang = g - np.dot(x, g) * x
    resid = math.sqrt(float(np.dot(tang, tang)) + gx * gx)
    mnew = obj.L1 / sigma1**2 * resid if sigma1 > 0 else math.inf
    return KKTResidual(F, J, sigma1, mnew)


def gpa3_run(surface, obj: ObjectiveOracle, config: SolverConfig | None = None, x0=None,
             max_fallbacks: int = 8, refresh_every: int = 50) -> Trace:
    """Gradient projection on the unit sphere, finished by modified Newton.

    Phase one takes tangent-plane steps while ``||P_T f'(x)|| >= sigma1^2 /
    (4 L1)``, with ``sigma1`` re-evaluated at every iterate. Phase two
    iterates ``z <- z - F'(z_s)^{-1} F(z)`` with the Jacobian frozen at the
    switch point ``z_s``, refactored only after ``refresh_every`` steps
    without convergence. Five consecutive increases of ``||F||`` send the run
    back to phase one from the switch point with a four times smaller
    switching threshold.
    """
    config = config or SolverConfig("gpa3")
    if obj.hess is None:
        raise ConfigInvalid(f"gpa3 needs a Hessian; objective {obj.name!r} has none")
    x = np.asarray(x0, dtype=float)
    n = x.size
    if surface is not None and not (isinstance(surface, SphereSurface) and surface.radius == 1.0):
        raise ConfigInvalid("gpa3 runs on the unit sphere only")
    sphere = SphereSurface(n)
    ls = sphere.as_level_set()
    t0 = gpa2_step_bound(obj, 1.0)
    t = t0 if config.t is None else float(config.t)
    if not 0 < t < 2 * t0:
        raise ConfigInvalid(f"step t={t:g} outside (0, 2 t0) = (0, {2 * t0:g})")
    meta = {"t": t, "t0": t0, "q_t": one_step_gain(t, obj, 1.0), "L": obj.L, "L1": obj.L1, "R": 1.0,
            "switches": [], "fallbacks": 0, "refreshes": 0}
    x = _polish(ls, sphere.check_on_surface(x), config.bisect_tol)
    shrink = 1.0
    records = []
    k = 0
    z = F = None

    def fail(exc_type, msg, x_, f_):
        return _fail(exc_type, msg, records, "gpa3", x_, f_, meta)

    while k < config.max_iter:
        # phase 1
        f, g = obj.eval(x)
        lam = -float(np.dot(x, g))
        kkt = newton_kkt_residual(obj, x, lam)
        pg = float(np.linalg.norm(g - np.dot(g, x) * x))
        threshold = shrink * kkt.sigma1**2 / (4.0 * obj.L1)
        if pg >= threshold and np.linalg.norm(kkt.F) > config.newton_tol:
            try:
                x_new, _ = _gpa2_step(ls, x, g, t, 1.0, config.bisect_tol)
            except GradProjError as exc:
                exc.trace = Trace("gpa3", records, exc.code, x, f, meta)
                raise
            step = float(np.linalg.norm(x_new - x))
            records.append(IterationRecord(k, x, f, pg, step, phase="gradient",
                                           kkt_norm=float(np.linalg.norm(kkt.F))))
            k += 1
            x = x_new
            if step < config.tol_x:
                return Trace("gpa3", records, "converged", x, obj.f(x), meta)
            continue

        # phase 2
        x_s, lam_s = x.copy(), lam
        meta["switches"].append({"k": k, "sigma1": kkt.sigma1, "threshold": threshold,
                                 "mnew": kkt.mnew})
        z = np.append(x, lam)
        F = kkt.F
        Fn = float(np.linalg.norm(F))
        if Fn <= config.newton_tol:
            records.append(IterationRecord(k, x, f, pg, 0.0, phase="newton", kkt_norm=Fn))
            meta["final_kkt_norm"] = Fn
            return Trace("gpa3", records, "converged", x, f, meta)
        if kkt.sigma1 <= 1e-10 * np.linalg.norm(kkt.Fprime):
            raise fail(SingularJacobian, f"sigma1 = {kkt.sigma1:.3e} at the switch point", x, f)
        lu = lu_factor(kkt.Fprime)
        since_factor = 0
        rises = 0
        diverged = False
        while k < config.max_iter:
            dz = lu_solve(lu, F)
            z_new = z - dz
            xk = z[:n]
            gk = obj.grad(xk)
            u = xk / np.linalg.norm(xk)
            pgk = float(np.linalg.norm(gk - np.dot(gk, u) * u))
            records.append(IterationRecord(k, xk.copy(), obj.f(xk), pgk, float(np.linalg.norm(dz[:n])),
                                           phase="newton", kkt_norm=Fn))
            k += 1
            z = z_new
            x_k, lam_k = z[:n], float(z[n])
            F = np.append(obj.grad(x_k) + lam_k * x_k, 0.5 * (float(np.dot(x_k, x_k)) - 1.0))
            Fn_new = float(np.linalg.norm(F))
            if not np.isfinite(Fn_new):
                diverged = True
                break
            rises = rises + 1 if Fn_new > Fn else 0
            Fn = Fn_new
            if Fn <= config.newton_tol:
                meta["final_kkt_norm"] = Fn
                return Trace("gpa3", records, "converged", z[:n].copy(), obj.f(z[:n]), meta)
            if rises >= 5:
                diverged = True
                break
            since_factor += 1
            if since_factor >= refresh_every:
                J = newton_kkt_residual(obj, x_k, lam_k).Fprime
                lu = lu_factor(J)
                since_factor = 0
                meta["refreshes"] += 1
        if not diverged:
            break
        meta["fallbacks"] += 1
        if meta["fallbacks"] > max_fallbacks:
            raise fail(NewtonDiverged, "modified Newton diverged repeatedly", z[:n], obj.f(z[:n]))
        x = x_s
        shrink *= 0.25
    meta["final_kkt_norm"] = None if F is None else float(np.linalg.norm(F))
    x_end = x if z is None else z[:n].copy()
    return Trace("gpa3", records, "max_iter", x_end, obj.f(x_end), meta)


# ---------------------------------------------------------------------------
# full-step Frank-Wolfe


def ffw_run(surface, obj: ObjectiveOracle, config: SolverConfig | None = None, x0=None) -> Trace:
    """Full-step Frank-Wolfe: jump to the minimizer of the linearization.

    On a sphere or ball boundary the minimizer is the support point in the
    direction ``-f'(x_k)``. A vanishing gradient ends the run with
    termination ``"stationary_certificate"``.
    """
    config = config or SolverConfig("ffw")
    if not hasattr(surface, "support_point"):
        raise ConfigInvalid("ffw needs a sphere or ball boundary")
    r = float(surface.r)
    x = surface.check_on_surface(x0)
    meta = {"r": r, "L1": obj.L1}
    if isinstance(surface, SphereSurface):
        g0 = float(np.linalg.norm(obj.grad(np.zeros(surface.n))))
        meta["grad0_norm"] = g0
        if g0 > 2 * obj.L1:
            meta["q"] = obj.L1 / (g0 - obj.L1)
    f, g = obj.eval(x)
    records = []
    termination = "max_iter"
    for k in range(config.max_iter):
        try:
            x_new = surface.support_point(-g)
        except ZeroDirection:
            records.append(IterationRecord(k, x, f, 0.0, 0.0))
            termination = "stationary_certificate"
            break
        step = float(np.linalg.norm(x_new - x))
        pg = float(np.linalg.norm(surface.tangent_project(x, g)))
        records.append(IterationRecord(k, x, f, pg, step))
        x = x_new
        f, g = obj.eval(x)
        if step < config.tol_x:
            termination = "converged"
            break
    grad_norms = [float(np.linalg.norm(obj.grad(rec.x))) for rec in records]
    m_hat = min(grad_norms) / (r * obj.L1)
    meta["m_hat"] = m_hat
    if m_hat > 1.0:
        from .analysis import theta_m

        meta["theta_m"] = theta_m(m_hat)
    return Trace("ffw", records, termination, x, f, meta)


def run_algorithm(algorithm: str, surface, obj, config: SolverConfig, x0):
    """Dispatch by algorithm id; returns a :class:`Trace`."""
    if algorithm == "gpa1":
        return gpa1_run(surface, obj, config, x0)
    if algorithm == "stationary":
        return stationary_point_solve(surface, obj, config.eps, x0=x0, config=config).trace
    if algorithm == "sphere-gpa":
        return sphere_gpa_run(obj, config, x0)
    if algorithm == "gpa2":
        return gpa2_run(surface, obj, config, x0)
    if algorithm == "gpa3":
        return gpa3_run(surface, obj, config, x0)
    if algorithm == "ffw":
        return ffw_run(surface, obj, config, x0)
    raise ConfigInvalid(f"unknown algorithm {algorithm!r}")
