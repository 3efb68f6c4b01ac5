"""Empirical checks on traces and oracles, plus the local-rate calculator for
full-step Frank-Wolfe.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import (
    DominanceTooWeak,
    InsufficientRange,
    NonPositiveValue,
    NoSamplesInLevel,
    ThetaOutOfRange,
    TooShort,
)
from .geometry import BallBoundarySurface
from .objectives import circle_point

UNDERFLOW = 1e-14
SQRT2 = math.sqrt(2.0)


@dataclass
class RateReport:
    fitted_q: float
    theoretical_q: float | None
    tail_start: int
    residual: float
    n_used: int


def fit_linear_rate(values, tail_fraction: float = 0.5, theoretical_q: float | None = None) -> RateReport:
    """Fit ``values[k] ~ c * q**k`` over the tail of a positive sequence.

    Parameters
    ----------
    values : array_like
        Positive sequence, e.g. ``f(x_k) - f0`` or ``||x_k - x*||``. The
        sequence is cut at its first entry below ``1e-14``; later entries are
        dominated by rounding.
    tail_fraction : float
        Fraction of the (cut) sequence used for the fit, counted from the end.
        At least four entries are always used.
    theoretical_q : float, optional
        Echoed into the report for comparison.

    Returns
    -------
    RateReport
        ``fitted_q = exp(slope)`` of the least-squares line through
        ``log(values)``, and the RMS residual of that line.

    Raises
    ------
    NonPositiveValue
        If the sequence contains NaN, starts at a non-positive value, or
        goes clearly negative.
    TooShort
        If fewer than four entries survive the cut.
    """
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise TooShort("empty sequence")
    if np.any(np.isnan(v)) or v[0] <= 0 or np.any(v <= -UNDERFLOW):
        raise NonPositiveValue("rate fitting needs a positive sequence")
    small = np.flatnonzero(v < UNDERFLOW)
    if small.size:
        v = v[: small[0]]
    n = v.size
    if n < 4:
        raise TooShort(f"only {n} usable entries; need at least 4")
    if not 0 < tail_fraction <= 1:
        raise ValueError("tail_fraction must lie in (0, 1]")
    start = max(0, min(int(math.floor(n * (1.0 - tail_fraction))), n - 4))
    k = np.arange(start, n, dtype=float)
    y = np.log(v[start:])
    slope, intercept = np.polyfit(k, y, 1)
    resid = float(np.sqrt(np.mean((y - (slope * k + intercept)) ** 2)))
    return RateReport(float(math.exp(slope)), theoretical_q, start, resid, n - start)


@dataclass
class RateCheck:
    passed: bool
    worst_ratio: float
    worst_index: int
    n_checked: int


def check_rate_bound(seq, theoretical_q: float, slack: float = 0.0, floor: float = 0.0) -> RateCheck:
    """Check ``seq[k+1] <= q * seq[k] * (1 + slack)`` for every ``k`` with
    ``seq[k] > floor``; report the worst observed ratio."""
    s = np.asarray(seq, dtype=float).ravel()
    worst, worst_k, checked, ok = -math.inf, -1, 0, True
    for k in range(s.size - 1):
        if not s[k] > floor:
            continue
        ratio = s[k + 1] / s[k]
        checked += 1
        if ratio > worst:
            worst, worst_k = float(ratio), k
        if s[k + 1] > theoretical_q * s[k] * (1.0 + slack):
            ok = False
    if checked == 0:
        worst = math.nan
    return RateCheck(ok, worst, worst_k, checked)


@dataclass
class LplEstimate:
    mu_hat: float
    alpha: float
    n_samples: int
    worst_point: np.ndarray
    beta: float


def _lpl_terms(surface, obj, xs, f0):
    df = np.empty(len(xs))
    pg = np.empty(len(xs))
    for i, x in enumerate(xs):
        f, g = obj.eval(x)
        df[i] = f - f0
        pg[i] = np.linalg.norm(surface.tangent_project(x, g))
    return df, pg


def lpl_mu_estimate(surface, obj, f0: float, alpha: float = 2.0, beta: float = math.inf,
                    n_samples: int = 10_000, seed: int = 0,
                    region: Callable[[np.ndarray], bool] | None = None,
                    max_draw_factor: int = 64) -> LplEstimate:
    """Smallest observed ratio ``||P_T f'(x)||**alpha / (f(x) - f0)``.

    Quasi-random surface samples are kept when ``f(x) <= beta``, ``region(x)``
    holds (if given) and ``f(x) - f0`` exceeds ``1e-12 * (1 + |f0|)``; the
    ratio is 0/0 at the minimizer. The sample stream is drawn in growing
    prefixes until ``n_samples`` points are accepted or ``max_draw_factor``
    times that many have been drawn.

    Raises
    ------
    NoSamplesInLevel
        If no sample survives the filters.
    """
    floor = 1e-12 * (1.0 + abs(f0))
    draw = n_samples
    while True:
        pts = surface.sample(draw, seed)
        keep = []
        for x in pts:
            if region is not None and not region(x):
                continue
            fx = obj.f(x)
            if fx > beta or fx - f0 <= floor:
                continue
            keep.append(x)
            if len(keep) == n_samples:
                break
        if len(keep) == n_samples or draw >= max_draw_factor * n_samples:
            break
        draw *= 4
    if not keep:
        raise NoSamplesInLevel("no sample lies in the level set above the floor")
    xs = np.array(keep)
    df, pg = _lpl_terms(surface, obj, xs, f0)
    ratios = pg**alpha / df
    i = int(np.argmin(ratios))
    return LplEstimate(float(ratios[i]), float(alpha), len(xs), xs[i].copy(), float(beta))


def cap_region(tau: float, k: int = 1):
    """Indicator of ``{x : sum_{i<k} x_i**2 >= tau**2}``, with ``x_1 >= tau``
    when ``k == 1``; eigen-coordinates are assumed."""
    if k == 1:
        return lambda x: x[0] >= tau
    return lambda x: float(np.dot(x[:k], x[:k])) >= tau * tau


def lpl_exponent_estimate(surface, obj, f0: float, path: Sequence) -> float:
    """Exponent ``alpha`` with ``||P_T f'||**alpha ~ f - f0`` along a path.

    Least-squares slope of ``log(f - f0)`` against ``log ||P_T f'||``.

    Raises
    ------
    InsufficientRange
        If ``f - f0`` spans fewer than three decades over the path, or some
        point has ``f - f0 <= 0`` or a zero projected gradient.
    """
    xs = [surface.check_on_surface(x) for x in path]
    df, pg = _lpl_terms(surface, obj, xs, f0)
    if np.any(df <= 0) or np.any(pg <= 0):
        raise InsufficientRange("path touches the minimum value or a stationary point")
    span = math.log10(df.max() / df.min())
    if span < 3.0:
        raise InsufficientRange(f"f - f0 spans {span:.2f} decades; need 3")
    slope, _ = np.polyfit(np.log(pg), np.log(df), 1)
    return float(slope)


def circle_path(theta_max: float = 0.5, theta_min: float = 1e-3, count: int = 40) -> np.ndarray:
    """Points of the test circle at geometrically spaced angles toward 0."""
    thetas = np.geomspace(theta_max, theta_min, count)
    return np.array([circle_point(t) for t in thetas])


def stationarity_distance(surface, obj, x) -> float:
    """Distance from ``-f'(x)`` to the normal cone at ``x``.

    The normal cone is the normal line for spheres and level sets, and the
    outward ray for a ball boundary.
    """
    x = surface.check_on_surface(x)
    g = np.asarray(obj.grad(x), dtype=float)
    p = surface.unit_normal(x)
    along = float(np.dot(-g, p))
    tangential = float(np.linalg.norm(-g - along * p))
    if isinstance(surface, BallBoundarySurface) and along < 0:
        return float(np.linalg.norm(g))
    return tangential


def h_ratio(theta: float) -> float:
    """``h(theta) / theta``, written as ``sqrt(2 / (1 + sqrt(1 - theta**2)))``."""
    if not 0 <= theta <= 1:
        raise ThetaOutOfRange(f"theta = {theta!r} outside [0, 1]")
    return math.sqrt(2.0 / (1.0 + math.sqrt(1.0 - theta * theta)))


def h(theta: float) -> float:
    """``h(theta) = 2 sin(arcsin(theta) / 2)`` for ``theta`` in [0, 1].

    Evaluated via the half-angle identity so that ``h(1) = sqrt(2)`` exactly.
    """
    return theta * h_ratio(theta)


def theta_m(m: float, tol: float = 1e-15) -> float:
    """Root of ``h(theta) / theta = m`` for ``m`` in (1, sqrt(2)], and 1 beyond.

    The map ``theta -> h(theta) / theta`` increases from 1 to ``sqrt(2)`` on
    [0, 1], so bisection brackets the root.
    """
    if not m > 1:
        raise DominanceTooWeak(f"m = {m!r} must exceed 1")
    if m >= SQRT2:
        return 1.0
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if h_ratio(mid) < m:
            lo = mid
        else:
            hi = mid
    return lo if abs(h_ratio(lo) - m) <= abs(h_ratio(hi) - m) else hi


def ffw_local_rate(m: float, theta: float) -> float:
    """Local contraction factor ``h(theta) / (theta * m)`` of full-step
    Frank-Wolfe.

    Raises
    ------
    DominanceTooWeak
        If ``m <= 1``.
    ThetaOutOfRange
        If ``theta`` is not in ``(0, theta_m)``; for ``m > sqrt(2)`` the
        endpoint ``theta = 1`` is allowed.
    """
    tm = theta_m(m)
    upper_ok = theta <= 1.0 if m > SQRT2 else theta < tm
    if not (theta > 0 and upper_ok):
        raise ThetaOutOfRange(f"theta = {theta!r} outside (0, {tm!r})")
    return h_ratio(theta) / m


def ffw_contraction_check(trace, m: float | None = None, slack: float = 1e-8,
                          floor: float = 0.0) -> RateCheck | None:
    """Check that consecutive Frank-Wolfe steps shrink by ``1/m``.

    ``m`` defaults to the trace's certified ``m_hat``. Returns ``None`` with a
    warning when ``m <= 1``, where no contraction is claimed.
    """
    if m is None:
        m = trace.meta.get("m_hat")
    if m is None or m <= 1.0:
        warnings.warn(f"m = {m!r} <= 1; skipping the contraction check", RuntimeWarning, stacklevel=2)
        return None
    steps = trace.column("step_norm")
    return check_rate_bound(steps, 1.0 / m, slack=slack, floor=floor)
