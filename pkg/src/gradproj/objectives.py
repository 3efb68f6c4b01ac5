"""Objective oracles and the registry of example problems."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import NotSymmetric
from .geometry import BallBoundarySurface, LevelSetSurface, SphereSurface, segment_surface_intersect


@dataclass(frozen=True, eq=False)
class ObjectiveOracle:
    """A smooth objective with its Lipschitz metadata.

    ``L`` bounds ``||f'||`` over the region the solvers visit (the surface and
    a thin tube around it); ``L1`` is a global Lipschitz constant of ``f'``.
    """

    f: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    L: float
    L1: float
    hess: Callable[[np.ndarray], np.ndarray] | None = None
    name: str = "objective"

    @property
    def has_hessian(self) -> bool:
        return self.hess is not None

    def eval(self, x):
        x = np.asarray(x, dtype=float)
        return float(self.f(x)), np.asarray(self.grad(x), dtype=float)


def evaluate(obj: ObjectiveOracle, x):
    return obj.eval(x)


def fd_gradient_check(obj: ObjectiveOracle, x, h: float = 1e-6) -> float:
    """Max componentwise gap between central differences and ``obj.grad``.

    The gap is divided by ``max(1, ||grad(x)||)``.
    """
    if not h > 0:
        raise ValueError("h must be positive")
    x = np.asarray(x, dtype=float)
    g = np.asarray(obj.grad(x), dtype=float)
    fd = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        fd[i] = (obj.f(x + e) - obj.f(x - e)) / (2.0 * h)
    return float(np.max(np.abs(fd - g)) / max(1.0, float(np.linalg.norm(g))))


def descent_gap(obj: ObjectiveOracle, x, y, C: float | None = None) -> float:
    """``|f(y) - f(x) - (f'(x), y - x)| - (C/2)||y - x||^2``; non-positive when the
    upper/lower quadratic bound holds."""
    C = obj.L1 if C is None else C
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = y - x
    lhs = abs(obj.f(y) - obj.f(x) - float(np.dot(obj.grad(x), d)))
    return lhs - 0.5 * C * float(np.dot(d, d))


# ---------------------------------------------------------------------------
# symmetric eigensolver


def _symmetric(A, rtol=1e-12) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise NotSymmetric(f"matrix of shape {A.shape} is not square")
    if not np.all(np.isfinite(A)):
        raise NotSymmetric("matrix has non-finite entries")
    amax = float(np.max(np.abs(A))) if A.size else 0.0
    asym = float(np.max(np.abs(A - A.T))) if A.size else 0.0
    if asym > rtol * amax:
        raise NotSymmetric(f"max |A - A^T| = {asym:.3e} exceeds {rtol:g} * max|A|")
    return 0.5 * (A + A.T)


def quadratic_spectrum(A, max_sweeps: int = 64):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns ``(lam, E)`` with eigenvalues ascending and the matching
    orthonormal eigenvectors as the columns of ``E``. Each eigenvector is
    signed so that its largest-magnitude entry is positive.
    """
    a = _symmetric(A).copy()
    n = a.shape[0]
    V = np.eye(n)
    scale = float(np.linalg.norm(a))
    if scale == 0.0:
        return np.zeros(n), V
    for _ in range(max_sweeps):
        off = math.sqrt(max(0.0, float(np.sum(a * a) - np.sum(np.diag(a) ** 2))))
        if off <= 1e-15 * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = (1.0 if theta >= 0 else -1.0) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                col_p, col_q = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p, row_q = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                a[p, q] = a[q, p] = 0.0
                v_p, v_q = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * v_p - s * v_q
                V[:, q] = s * v_p + c * v_q
    lam = np.diag(a).copy()
    order = np.argsort(lam, kind="stable")
    lam, V = lam[order], V[:, order]
    for j in range(n):
        k = int(np.argmax(np.abs(V[:, j])))
        if V[k, j] < 0:
            V[:, j] = -V[:, j]
    return lam, V


def load_matrix(path) -> np.ndarray:
    """Read a whitespace-separated matrix, one row per line."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                rows.append([float(tok) for tok in line.split()])
            except ValueError as exc:
                raise NotSymmetric(f"{path}: unparsable row {line!r}") from exc
    if not rows or any(len(r) != len(rows) for r in rows):
        raise NotSymmetric(f"{path}: rows do not form a square matrix")
    return _symmetric(np.array(rows))


@dataclass(frozen=True, eq=False)
class QuadraticForm:
    """``f(x) = (Ax, x)`` with its spectrum computed once at construction."""

    A: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @classmethod
    def from_matrix(cls, A) -> "QuadraticForm":
        A = _symmetric(A)
        lam, E = quadratic_spectrum(A)
        return cls(A, lam, E)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def L1(self) -> float:
        # 2*lam_n alone is not a Lipschitz constant once |lam_1| > lam_n
        return 2.0 * float(max(abs(self.eigenvalues[0]), abs(self.eigenvalues[-1])))

    def objective(self, radius: float = 1.0) -> ObjectiveOracle:
        A = self.A
        L1 = self.L1
        return ObjectiveOracle(
            f=lambda x: float(x @ A @ x),
            grad=lambda x: 2.0 * (A @ x),
            hess=lambda x: 2.0 * A,
            L=1.1 * L1 * radius,
            L1=L1 if L1 > 0 else 1.0,
            name="quadratic",
        )


# ---------------------------------------------------------------------------
# registry


@dataclass(frozen=True, eq=False)
class ExampleProblem:
    id: str
    surface: object
    objective: ObjectiveOracle
    x0: np.ndarray
    minimizer: np.ndarray | None = None
    f0: float | None = None
    lpl_alpha: float | None = None
    quadratic: QuadraticForm | None = None
    info: dict = field(default_factory=dict)

    def random_start(self, seed: int) -> np.ndarray:
        return self.surface.sample(1, seed)[0]


def _floats(text: str) -> np.ndarray:
    return np.array([float(t) for t in text.split(",") if t.strip()])


def _quad(params):
    if "diag" in params:
        A = np.diag(_floats(params["diag"]))
    else:
        A = np.diag([1.0, 2.0, 3.0])
    return _quad_from_matrix(A, "quad")


def _quad_from_matrix(A, pid):
    qf = QuadraticForm.from_matrix(A)
    n = qf.n
    e1 = qf.eigenvectors[:, 0]
    if n == 1:
        x0 = e1.copy()
    else:
        # (x0, e1) = 0.5, the remaining mass spread evenly over the other eigenvectors
        rest = qf.eigenvectors[:, 1:].sum(axis=1)
        x0 = 0.5 * e1 + math.sqrt(0.75 / (n - 1)) * rest
    return ExampleProblem(
        id=pid,
        surface=SphereSurface(n),
        objective=qf.objective(),
        x0=x0,
        minimizer=e1.copy(),
        f0=float(qf.eigenvalues[0]),
        lpl_alpha=2.0,
        quadratic=qf,
    )


def _linear(params):
    c = _floats(params.get("c", "0,0,1"))
    nc = float(np.linalg.norm(c))
    if nc == 0:
        raise ValueError("linear objective needs a nonzero c")
    n = c.size
    x0 = np.zeros(n)
    # start orthogonal to c when possible
    k = int(np.argmin(np.abs(c)))
    x0[k] = 1.0
    x0 = x0 - np.dot(x0, c) / nc**2 * c
    x0 = x0 / np.linalg.norm(x0) if np.linalg.norm(x0) > 0 else -c / nc
    obj = ObjectiveOracle(
        f=lambda x: float(np.dot(c, x)),
        grad=lambda x: c.copy(),
        hess=lambda x: np.zeros((n, n)),
        L=nc,
        # f' is constant; any positive number is a Lipschitz constant of it
        L1=1.0,
        name="linear",
    )
    return ExampleProblem("linear", SphereSurface(n), obj, x0, minimizer=-c / nc, f0=-nc)


def approx_linear_data(eps: float, n: int):
    """``c`` and ``d`` for ``(c, x) + eps/2 ||x - d||^2`` with ``||f'(0)|| = 1``."""
    u = np.arange(1.0, n + 1.0)
    u /= np.linalg.norm(u)
    d = np.array([(-1.0) ** i for i in range(n)])
    d = 0.3 * d / np.linalg.norm(d)
    return u + eps * d, d


def _approxlinear(params):
    eps = float(params.get("eps", 0.1))
    n = int(params.get("n", 3))
    if "c" in params or "d" in params:
        c = _floats(params["c"])
        d = _floats(params["d"])
        n = c.size
    else:
        c, d = approx_linear_data(eps, n)
    g0 = float(np.linalg.norm(c - eps * d))
    if not g0 > 2 * eps:
        raise ValueError(f"||f'(0)|| = {g0:g} must exceed 2*eps = {2 * eps:g}")
    obj = ObjectiveOracle(
        f=lambda x: float(np.dot(c, x) + 0.5 * eps * np.dot(x - d, x - d)),
        grad=lambda x: c + eps * (x - d),
        hess=lambda x: eps * np.eye(n),
        L=float(np.linalg.norm(c) + eps * (1.1 + np.linalg.norm(d))),
        L1=eps,
        name="approxlinear",
    )
    # any start not parallel to f'(0); a start on that line is solved in one step
    x0 = np.zeros(n)
    x0[-1] = 1.0
    if n > 1 and abs(np.dot(x0, c - eps * d)) > 0.99 * g0:
        x0 = np.roll(x0, 1)
    info = {"grad0_norm": g0, "predicted_rate": eps / (g0 - eps), "eps": eps}
    return ExampleProblem("approxlinear", SphereSurface(n), obj, x0, info=info)


def lpl2d_circle() -> LevelSetSurface:
    return LevelSetSurface(
        g=lambda x: float(x[0] ** 2 + (x[1] - 0.5) ** 2 - 0.25),
        grad_g=lambda x: np.array([2.0 * x[0], 2.0 * x[1] - 1.0]),
        m_lower=1.0,
        L1g=2.0,
        interior_point=np.array([0.0, 0.5]),
    )


def circle_point(theta: float) -> np.ndarray:
    """Point of the circle ``x^2 + (y - 1/2)^2 = 1/4`` at angle ``theta`` from (0, 0)."""
    return np.array([0.5 * math.sin(theta), 0.5 - 0.5 * math.cos(theta)])


def _lpl2d(params):
    p = float(params.get("p", 0.5))
    if not 0 < p <= 1:
        raise ValueError("p must lie in (0, 1]")
    obj = ObjectiveOracle(
        f=lambda x: float(x[1] - p * x[0] ** 2),
        grad=lambda x: np.array([-2.0 * p * x[0], 1.0]),
        hess=lambda x: np.diag([-2.0 * p, 0.0]),
        # bound on ||f'|| over |x| <= 1, which contains the circle and its tube
        L=math.sqrt(1.0 + 4.0 * p * p),
        L1=2.0 * p,
        name="lpl2d",
    )
    alpha = 2.0 if p < 1 else 4.0 / 3.0
    return ExampleProblem(
        "lpl2d", lpl2d_circle(), obj, circle_point(1.0),
        minimizer=np.zeros(2), f0=0.0, lpl_alpha=alpha, info={"p": p},
    )


def _e2(params):
    obj = ObjectiveOracle(
        f=lambda x: float(x[1] - x[0] ** 2),
        grad=lambda x: np.array([-2.0 * x[0], 1.0]),
        hess=lambda x: np.diag([-2.0, 0.0]),
        L=math.sqrt(1.0 + 4.0 * 0.6**2),
        L1=2.0,
        name="e2",
    )
    surface = BallBoundarySurface(np.array([0.0, 0.5]), 0.5)
    # ||f'(0,0)|| = 1 = m * r * L1 with r = 1/2, L1 = 2
    return ExampleProblem(
        "e2", surface, obj, circle_point(0.5), minimizer=np.zeros(2), f0=0.0,
        lpl_alpha=4.0 / 3.0, info={"m": 1.0},
    )


def _psi(x):
    return -0.5 * x * x if x <= 0 else 0.0


def _dpsi(x):
    return -x if x <= 0 else 0.0


def _minstat(params):
    r = float(params.get("r", 2.0))
    if not r > 1:
        raise ValueError("minstat needs r > 1")
    obj = ObjectiveOracle(
        f=lambda x: float(_psi(x[0]) - x[1]),
        grad=lambda x: np.array([_dpsi(x[0]), -1.0]),
        hess=None,  # psi is C^1 only
        L=math.sqrt(1.0 + r * r),
        L1=1.0,
        name="minstat",
    )
    surface = BallBoundarySurface(np.array([0.0, -r]), r)
    theta = 0.5 if r * (1 - math.cos(0.5)) < 1 else 0.5 / r
    x0 = np.array([r * math.sin(theta), -r + r * math.cos(theta)])
    a0 = np.array([-math.sqrt(r * r - 1.0), 1.0 - r])
    return ExampleProblem(
        "minstat", surface, obj, x0, minimizer=a0, f0=-((r - 1.0) ** 2) / 2.0,
        info={"r": r, "stationary_point": [0.0, 0.0], "m": 1.0 / r},
    )


SCF_AXES = (1.0, 0.8, 0.6)
SCF_TARGET = (0.0, 0.0, 0.75)
SCF_BETA = 0.1


def _scf(params):
    axes = np.array(SCF_AXES)
    xbar = np.array(SCF_TARGET)
    inv2 = 1.0 / axes**2
    surface = LevelSetSurface(
        g=lambda x: 0.5 * (float(np.dot(inv2, x * x)) - 1.0),
        grad_g=lambda x: inv2 * x,
        m_lower=1.0 / axes.max(),
        L1g=1.0 / axes.min() ** 2,
        interior_point=np.zeros(3),
    )
    obj = ObjectiveOracle(
        f=lambda x: float(np.dot(x - xbar, x - xbar)),
        grad=lambda x: 2.0 * (x - xbar),
        hess=lambda x: 2.0 * np.eye(3),
        L=1.1 * 2.0 * (axes.max() + np.linalg.norm(xbar)),
        L1=2.0,
        name="scf",
    )
    x0 = segment_surface_intersect(surface, np.zeros(3), 2.0 * np.array([0.2, 0.1, 0.6]))
    minimizer = np.array([0.0, 0.0, axes.min()])
    f0 = float(np.dot(minimizer - xbar, minimizer - xbar))
    # Lipschitz constant of f on the level set {f <= beta}, and strong convexity
    level_L = 2.0 * math.sqrt(SCF_BETA)
    info = {"beta": SCF_BETA, "kappa": 2.0, "level_L": level_L,
            "level_condition": level_L / 2.0 < surface.R}
    return ExampleProblem("scf", surface, obj, x0, minimizer=minimizer, f0=f0,
                          lpl_alpha=2.0, info=info)


BALLWAVE_C = (0.6, 0.8)
BALLWAVE_EPS = 0.25


def _ballwave(params):
    c = np.array(BALLWAVE_C)
    eps = float(params.get("eps", BALLWAVE_EPS))
    surface = BallBoundarySurface(np.array([0.5, -0.3]), 1.0)
    obj = ObjectiveOracle(
        f=lambda x: float(np.dot(c, x) + eps * np.sum(np.sin(x))),
        grad=lambda x: c + eps * np.cos(x),
        hess=lambda x: np.diag(-eps * np.sin(x)),
        L=float(np.linalg.norm(c) + eps * math.sqrt(2.0)),
        L1=eps,
        name="ballwave",
    )
    m_lower = (np.linalg.norm(c) - eps * math.sqrt(2.0)) / (surface.r * eps)
    return ExampleProblem("ballwave", surface, obj, surface.center + np.array([0.0, 1.0]),
                          info={"m_lower": float(m_lower)})


_BUILDERS = {
    "quad": _quad,
    "linear": _linear,
    "approxlinear": _approxlinear,
    "lpl2d": _lpl2d,
    "e2": _e2,
    "minstat": _minstat,
    "scf": _scf,
    "ballwave": _ballwave,
}

PROBLEM_IDS = tuple(sorted(_BUILDERS))


def parse_problem_id(pid: str):
    name, _, rest = pid.partition(":")
    params = {}
    for item in filter(None, (s.strip() for s in rest.split(";"))):
        key, eq, value = item.partition("=")
        if not eq:
            raise ValueError(f"problem parameter {item!r} is not key=value")
        params[key.strip()] = value.strip()
    return name.strip(), params


def get_problem(pid: str) -> ExampleProblem:
    """Build a registered problem from ``name[:key=value;key=value]``, or a
    quadratic form from a matrix file path."""
    name, params = parse_problem_id(pid)
    if name in _BUILDERS:
        prob = _BUILDERS[name](params)
        object.__setattr__(prob, "id", pid)
        return prob
    if os.path.exists(pid):
        return _quad_from_matrix(load_matrix(pid), pid)
    raise KeyError(f"unknown problem {pid!r}; known: {', '.join(PROBLEM_IDS)}")


def estimate_lipschitz(surface, grad, n_samples: int = 10_000, seed: int = 0,
                       safety: float = 1.1) -> float:
    """``safety * max ||grad||`` over quasi-random surface samples."""
    pts = surface.sample(n_samples, seed)
    return safety * max(float(np.linalg.norm(grad(x))) for x in pts)
