"""Seeded random and quasi-random streams.

Every random draw in the package goes through :func:`make_rng`, which wraps
numpy's ``SeedSequence`` -> ``PCG64`` pipeline around a single integer seed.
Quasi-random surface points come from a scrambled Halton sequence whose
scrambling is itself drawn from that generator, so a seed pins everything.
"""

import numpy as np
from scipy.special import ndtri
from scipy.stats import qmc

RNG_NAME = "numpy.random.PCG64(SeedSequence(seed))"


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))


def sphere_directions(n: int, count: int, seed: int) -> np.ndarray:
    """Low-discrepancy unit vectors in R^n, shape ``(count, n)``.

    Halton points in the unit cube are pushed through the inverse normal CDF
    and normalized, which yields an (asymptotically) uniform spread on the
    sphere.
    """
    engine = qmc.Halton(d=n, scramble=True, seed=make_rng(seed))
    u = engine.random(count)
    u = np.clip(u, 1e-12, 1.0 - 1e-12)
    g = ndtri(u)
    norms = np.linalg.norm(g, axis=1)
    # a Gaussian draw landing exactly at the origin is measure-zero; guard anyway
    norms[norms == 0.0] = 1.0
    return g / norms[:, None]


def random_unit_vector(n: int, seed: int) -> np.ndarray:
    rng = make_rng(seed)
    v = rng.standard_normal(n)
    while not np.any(v):
        v = rng.standard_normal(n)
    return v / np.linalg.norm(v)
