"""Feasible sets and the geometric primitives the solvers share.

Three kinds of surface are supported:

* :class:`SphereSurface` -- the sphere ``||x|| = radius`` centred at the origin;
* :class:`LevelSetSurface` -- ``{x : g(x) = 0}`` with ``g'(x) != 0`` on it;
* :class:`BallBoundarySurface` -- the boundary of the ball ``B_r(center)``,
  the prototypical strongly convex set.

All operations are pure functions of their inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import (
    DegenerateNormal,
    NoSignChange,
    OffSurface,
    StepExceedsReach,
    ZeroDirection,
    ZeroVector,
)
from .sampling import sphere_directions

SURFACE_TOL = 1e-8
BISECT_TOL = 1e-12
BISECT_POS_TOL = 1e-14


def _vec(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("expected a non-empty 1-d vector")
    if not np.all(np.isfinite(x)):
        raise ValueError("vector has non-finite entries")
    return x


def project_sphere(x, radius: float = 1.0) -> np.ndarray:
    """Metric projection onto the origin-centred sphere of the given radius."""
    x = _vec(x)
    nx = np.linalg.norm(x)
    if nx == 0.0:
        raise ZeroVector("projection onto a sphere is set-valued at its center")
    return (radius / nx) * x


class _Surface:
    kind = "surface"
    tol = SURFACE_TOL

    def membership_residual(self, x) -> float:
        raise NotImplementedError

    def _normal(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def check_on_surface(self, x) -> np.ndarray:
        x = _vec(x)
        res = self.membership_residual(x)
        if res > self.tol:
            raise OffSurface(f"membership residual {res:.3e} exceeds {self.tol:.1e}")
        return x

    def unit_normal(self, x) -> np.ndarray:
        """Unit vector spanning the normal cone at a surface point."""
        return self._normal(self.check_on_surface(x))

    def tangent_project(self, x, v) -> np.ndarray:
        """Orthogonal projection of ``v`` onto the tangent subspace at ``x``."""
        p = self.unit_normal(x)
        v = _vec(v)
        return v - np.dot(v, p) * p

    def sample(self, count: int, seed: int) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class SphereSurface(_Surface):
    n: int
    radius: float = 1.0
    kind = "sphere"

    def __post_init__(self):
        if self.n < 1 or not self.radius > 0:
            raise ValueError("sphere needs n >= 1 and a positive radius")

    @property
    def R(self) -> float:
        """Proximal smoothness constant."""
        return float(self.radius)

    @property
    def r(self) -> float:
        """Strong-convexity radius of the enclosed ball."""
        return float(self.radius)

    @property
    def center(self) -> np.ndarray:
        return np.zeros(self.n)

    def membership_residual(self, x) -> float:
        return abs(float(np.linalg.norm(_vec(x))) - self.radius)

    def _normal(self, x):
        return x / np.linalg.norm(x)

    def project(self, x) -> np.ndarray:
        return project_sphere(x, self.radius)

    def support_point(self, d) -> np.ndarray:
        return _support(self.center, self.radius, d)

    def sample(self, count, seed):
        return self.radius * sphere_directions(self.n, count, seed)

    def as_level_set(self) -> "LevelSetSurface":
        rad = float(self.radius)
        return LevelSetSurface(
            g=lambda x: 0.5 * (float(np.dot(x, x)) - rad * rad),
            grad_g=lambda x: np.array(x, dtype=float),
            R=rad,
            m_lower=rad,
            interior_point=np.zeros(self.n),
            g_scale=rad,
        )


@dataclass(frozen=True, eq=False)
class LevelSetSurface(_Surface):
    """Surface ``{x : g(x) = 0}``.

    ``R`` is the proximal smoothness constant. When only ``m_lower`` (a lower
    bound on ``||g'||`` over the surface) and ``L1g`` (Lipschitz constant of
    ``g'``) are known, ``R`` defaults to ``m_lower / L1g``.

    ``interior_point`` must satisfy ``g < 0``; it anchors the radial chords
    used to sample the surface. ``g_scale`` converts ``|g|`` into a distance
    for the membership pre-check (the residual reported is ``|g|`` itself).
    """

    g: Callable[[np.ndarray], float]
    grad_g: Callable[[np.ndarray], np.ndarray]
    R: float | None = None
    m_lower: float | None = None
    L1g: float | None = None
    interior_point: np.ndarray | None = None
    g_scale: float = 1.0
    kind = "level_set"

    def __post_init__(self):
        if self.R is None:
            if self.m_lower is None or self.L1g is None:
                raise ValueError("level set needs R, or both m_lower and L1g")
            object.__setattr__(self, "R", float(self.m_lower) / float(self.L1g))
        if not self.R > 0:
            raise ValueError("proximal smoothness constant must be positive")

    def membership_residual(self, x) -> float:
        return abs(float(self.g(_vec(x))))

    def check_on_surface(self, x):
        x = _vec(x)
        res = self.membership_residual(x)
        if res > self.tol * max(1.0, self.g_scale):
            raise OffSurface(f"|g(x)| = {res:.3e} exceeds tolerance")
        return x

    def _normal(self, x):
        d = np.asarray(self.grad_g(x), dtype=float)
        nd = np.linalg.norm(d)
        if nd == 0.0:
            raise DegenerateNormal("g'(x) vanishes on the surface")
        return d / nd

    def sample(self, count, seed):
        if self.interior_point is None:
            raise ValueError("sampling a level set needs an interior point")
        c = np.asarray(self.interior_point, dtype=float)
        if self.g(c) >= 0:
            raise ValueError("interior point must satisfy g < 0")
        dirs = sphere_directions(c.size, count, seed)
        out = np.empty_like(dirs)
        for i, u in enumerate(dirs):
            s = 1.0
            for _ in range(80):
                if self.g(c + s * u) > 0:
                    break
                s *= 2.0
            else:
                raise ValueError("radial chord never leaves the sublevel set")
            out[i] = segment_surface_intersect(self, c, c + s * u)
        return out

    def as_level_set(self) -> "LevelSetSurface":
        return self


@dataclass(frozen=True, eq=False)
class BallBoundarySurface(_Surface):
    """Boundary of the ball of radius ``r`` about ``center``."""

    center: np.ndarray
    r: float
    kind = "ball_boundary"

    def __post_init__(self):
        object.__setattr__(self, "center", _vec(self.center).copy())
        if not self.r > 0:
            raise ValueError("radius must be positive")

    @property
    def n(self) -> int:
        return self.center.size

    @property
    def R(self) -> float:
        return float(self.r)

    def membership_residual(self, x) -> float:
        return abs(float(np.linalg.norm(_vec(x) - self.center)) - self.r)

    def _normal(self, x):
        d = x - self.center
        return d / np.linalg.norm(d)

    def project(self, x) -> np.ndarray:
        return self.center + project_sphere(_vec(x) - self.center, self.r)

    def support_point(self, d) -> np.ndarray:
        return _support(self.center, self.r, d)

    def sample(self, count, seed):
        return self.center + self.r * sphere_directions(self.n, count, seed)

    def as_level_set(self) -> LevelSetSurface:
        c, r = self.center.copy(), float(self.r)
        return LevelSetSurface(
            g=lambda x: 0.5 * (float(np.dot(x - c, x - c)) - r * r),
            grad_g=lambda x: np.asarray(x, dtype=float) - c,
            R=r,
            m_lower=r,
            interior_point=c,
            g_scale=r,
        )


def _support(center, radius, d):
    d = _vec(d)
    nd = np.linalg.norm(d)
    if nd == 0.0:
        raise ZeroDirection("every point maximizes a zero linear functional")
    return center + (radius / nd) * d


def unit_normal(surface, x) -> np.ndarray:
    return surface.unit_normal(x)


def tangent_project(surface, x, v) -> np.ndarray:
    return surface.tangent_project(x, v)


def membership_residual(surface, x) -> float:
    return surface.membership_residual(x)


def support_point(surface, d) -> np.ndarray:
    """Point of the ball maximizing ``(d, x)``; lies on its boundary."""
    return surface.support_point(d)


def segment_surface_intersect(surface, A, B, tol: float = BISECT_TOL) -> np.ndarray:
    """Locate the crossing of the segment ``[A, B]`` with ``g = 0`` by bisection.

    Parameters
    ----------
    surface : LevelSetSurface (or anything with ``as_level_set``)
    A, B : array_like
        Segment endpoints; ``g`` must change sign between them unless an
        endpoint already lies on the surface.
    tol : float
        Accept ``x`` once ``|g(x)| <= tol * max(1, |g(A)|, |g(B)|)``.

    Returns
    -------
    numpy.ndarray
        A point of the segment on the surface.

    Raises
    ------
    NoSignChange
        If ``g(A)`` and ``g(B)`` share a sign and neither endpoint is on the
        surface.
    """
    g = surface.as_level_set().g
    a, b = _vec(A).copy(), _vec(B).copy()
    ga, gb = float(g(a)), float(g(b))
    scale = max(1.0, abs(ga), abs(gb))
    target = tol * scale
    if abs(ga) <= target or abs(gb) <= target:
        return a if abs(ga) <= abs(gb) else b
    if ga * gb > 0:
        raise NoSignChange(f"g(A) = {ga:.3e} and g(B) = {gb:.3e} share a sign")

    length = float(np.linalg.norm(b - a))
    pos_tol = max(BISECT_POS_TOL * length, np.finfo(float).tiny)
    max_iter = int(math.ceil(math.log2(length / pos_tol))) + 2 if length > 0 else 1
    best, best_g = (a, ga) if abs(ga) <= abs(gb) else (b, gb)
    for _ in range(max_iter):
        mid = 0.5 * (a + b)
        gm = float(g(mid))
        if abs(gm) < abs(best_g):
            best, best_g = mid, gm
        if abs(gm) <= target:
            return mid
        if np.array_equal(mid, a) or np.array_equal(mid, b):
            break
        if gm * ga < 0:
            b, gb = mid, gm
        else:
            a, ga = mid, gm
        if np.linalg.norm(b - a) <= pos_tol:
            break
    return best


def reach_offset(R: float, d: float) -> float:
    """Half-length ``R - sqrt(R^2 - d^2)`` of the retraction chord.

    Evaluated as ``d^2 / (R + sqrt(R^2 - d^2))`` to avoid cancellation for
    short steps.
    """
    if d >= R:
        raise StepExceedsReach(f"tangent step {d:.3e} reaches past R = {R:.3e}")
    return d * d / (R + math.sqrt(R * R - d * d))
