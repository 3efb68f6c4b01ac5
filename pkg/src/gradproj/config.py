"""Run configuration: a flat ``key = value`` format with optional
``[run]``, ``[solver]`` and ``[output]`` section headers.

Example::

    [run]
    problem = lpl2d:p=0.5
    algorithm = gpa2
    x0 = registry-default

    [solver]
    max_iter = 5000

    [output]
    path = trace.jsonl
    format = jsonl
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .errors import ParseError, ValidationError, ZeroVector
from .geometry import SphereSurface
from .objectives import ExampleProblem, get_problem
from .solvers import ALGORITHMS, SolverConfig, gpa2_step_bound

SECTIONS = {
    "run": ("problem", "algorithm", "x0", "seed"),
    "solver": ("t", "C", "eps", "max_iter", "tol_x", "pg_tol", "bisect_tol", "newton_tol"),
    "output": ("path", "format"),
}
KEY_SECTION = {key: sec for sec, keys in SECTIONS.items() for key in keys}
FORMATS = ("jsonl", "csv")
_INT_KEYS = ("max_iter", "seed")
_FLOAT_KEYS = ("t", "C", "eps", "tol_x", "pg_tol", "bisect_tol", "newton_tol")


@dataclass
class RunConfig:
    problem: str
    algorithm: str
    x0: str = "registry-default"
    seed: int = 0
    t: float | None = None
    C: float | None = None
    eps: float = 1e-3
    max_iter: int = 100_000
    tol_x: float = 1e-12
    pg_tol: float = 1e-12
    bisect_tol: float = 1e-12
    newton_tol: float = 1e-12
    path: str | None = None
    format: str = "jsonl"
    defaulted: tuple = field(default=(), compare=False)

    def solver_config(self) -> SolverConfig:
        names = {f.name for f in fields(SolverConfig)}
        return SolverConfig(**{k: v for k, v in asdict(self).items() if k in names and k != "algorithm"},
                            algorithm=self.algorithm)

    def as_header(self) -> dict:
        d = asdict(self)
        d["defaulted"] = list(self.defaulted)
        return d


def _coerce(key: str, raw: str, lineno: int):
    if key in _INT_KEYS:
        try:
            return int(raw)
        except ValueError:
            raise ParseError(f"{key} expects an integer, got {raw!r}", lineno) from None
    if key in _FLOAT_KEYS:
        if raw.lower() in ("none", "auto", "default"):
            return None
        try:
            return float(raw)
        except ValueError:
            raise ParseError(f"{key} expects a number, got {raw!r}", lineno) from None
    return raw


def parse_config(text: str) -> RunConfig:
    """Parse and validate a run configuration.

    Parameters
    ----------
    text : str
        ``key = value`` lines. ``#`` and ``;`` start comment lines; a
        ``[section]`` line scopes the keys that follow it. Keys given before
        any section header may come from any section.

    Returns
    -------
    RunConfig
        Every field set; ``defaulted`` lists the fields left at their default.

    Raises
    ------
    ParseError
        A line that cannot be read, such as an unknown key or a value of the
        wrong type. The message carries the line number.
    ValidationError
        The parsed values are inconsistent; the error names the key.
    """
    values: dict = {}
    section = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if not s or s[0] in "#;":
            continue
        if s.startswith("["):
            if not s.endswith("]"):
                raise ParseError(f"unterminated section header {s!r}", lineno)
            section = s[1:-1].strip().lower()
            if section not in SECTIONS:
                raise ParseError(f"unknown section [{section}]", lineno)
            continue
        key, eq, raw = s.partition("=")
        if not eq:
            raise ParseError(f"expected key = value, got {s!r}", lineno)
        key, raw = key.strip(), raw.strip()
        if key not in KEY_SECTION:
            raise ParseError(f"unknown key {key!r}", lineno)
        if section is not None and KEY_SECTION[key] != section:
            raise ParseError(f"key {key!r} belongs in [{KEY_SECTION[key]}], not [{section}]", lineno)
        if key in values:
            raise ParseError(f"duplicate key {key!r}", lineno)
        values[key] = _coerce(key, raw, lineno)

    for key in ("problem", "algorithm"):
        if key not in values:
            raise ValidationError(key, "is required")
    defaulted = tuple(f.name for f in fields(RunConfig) if f.name not in values and f.name != "defaulted")
    cfg = RunConfig(**values, defaulted=defaulted)
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> ExampleProblem:
    """Check a configuration against its problem; returns the problem."""
    if cfg.algorithm not in ALGORITHMS:
        raise ValidationError("algorithm", f"{cfg.algorithm!r} is not one of {', '.join(ALGORITHMS)}")
    if cfg.format not in FORMATS:
        raise ValidationError("format", f"{cfg.format!r} is not one of {', '.join(FORMATS)}")
    if cfg.max_iter < 1:
        raise ValidationError("max_iter", "must be at least 1")
    for key in ("eps", "tol_x", "bisect_tol", "newton_tol"):
        if not getattr(cfg, key) > 0:
            raise ValidationError(key, "must be positive")
    if cfg.C is not None and not cfg.C > 0:
        raise ValidationError("C", "must be positive")
    try:
        prob = get_problem(cfg.problem)
    except (KeyError, ValueError, OSError) as exc:
        raise ValidationError("problem", str(exc)) from exc
    check_compatible(cfg.algorithm, prob)
    if cfg.algorithm in ("gpa2", "gpa3") and cfg.t is not None:
        R = 1.0 if cfg.algorithm == "gpa3" else prob.surface.as_level_set().R
        t0 = gpa2_step_bound(prob.objective, R)
        if not 0 < cfg.t < 2 * t0:
            raise ValidationError(
                "t", f"{cfg.t:g} outside (0, 2 t0) = (0, {2 * t0:.6g}); t0 = 1/(L1 + 2L/R) "
                "is the step that guarantees a per-step decrease")
    resolve_x0(cfg.x0, prob)
    return prob


def check_compatible(algorithm: str, prob: ExampleProblem) -> None:
    surface = prob.surface
    if algorithm == "gpa3" and not prob.objective.has_hessian:
        raise ValidationError("algorithm", f"gpa3 needs a Hessian; problem {prob.id!r} provides none")
    if algorithm in ("gpa1", "stationary") and not hasattr(surface, "project"):
        raise ValidationError("algorithm", f"{algorithm} needs a closed-form projection; use gpa2 on level sets")
    if algorithm in ("sphere-gpa", "gpa3") and not (isinstance(surface, SphereSurface) and surface.radius == 1.0):
        raise ValidationError("algorithm", f"{algorithm} runs on the unit sphere only")
    if algorithm == "ffw" and not hasattr(surface, "support_point"):
        raise ValidationError("algorithm", "ffw needs a sphere or ball boundary")
    if algorithm == "eigmin" and prob.quadratic is None:
        raise ValidationError("algorithm", "eigmin needs a quadratic-form problem (quad or a matrix file)")


def resolve_x0(text: str, prob: ExampleProblem) -> np.ndarray:
    """Starting point from ``registry-default``, ``random:SEED`` or an
    explicit comma- or space-separated vector.

    Explicit vectors are projected onto spheres and ball boundaries; on level
    sets they must already lie on the surface.
    """
    text = text.strip()
    if text == "registry-default":
        return np.array(prob.x0, dtype=float)
    if text.startswith("random:"):
        try:
            seed = int(text.split(":", 1)[1])
        except ValueError:
            raise ValidationError("x0", f"bad random seed in {text!r}") from None
        return prob.random_start(seed)
    try:
        x = np.array([float(v) for v in text.replace(",", " ").split()])
    except ValueError:
        raise ValidationError("x0", f"cannot read {text!r} as a vector") from None
    n = np.asarray(prob.x0).size
    if x.size != n:
        raise ValidationError("x0", f"has {x.size} entries; problem dimension is {n}")
    if hasattr(prob.surface, "project"):
        try:
            x = prob.surface.project(x)
        except ZeroVector:
            raise ValidationError("x0", "cannot project the center onto the surface") from None
    return x
