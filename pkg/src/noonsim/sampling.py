"""Seeded Poisson sampling with a fixed, platform-independent algorithm.

Only uniform doubles are drawn from numpy (PCG64 via ``Generator.random``,
whose stream is stable); the Poisson transformation is implemented here:

* mean < 30: inversion by sequential search over the CDF;
* mean >= 30: transformed rejection with squeeze (Hormann's PTRS), which
  accepts most draws from a hat close to the normal approximation.

Each phase point gets its own child stream from ``SeedSequence(seed)``, so
the draw at point i does not depend on how many uniforms other points used
and serial and parallel evaluation agree.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

INVERSION_LIMIT = 30.0


def point_generators(seed: int, n: int) -> list[np.random.Generator]:
    children = np.random.SeedSequence(seed).spawn(n)
    return [np.random.Generator(np.random.PCG64(c)) for c in children]


def poisson_inversion(lam: float, rng: np.random.Generator) -> int:
    u = rng.random()
    k = 0
    p = math.exp(-lam)
    cdf = p
    while u > cdf:
        k += 1
        p *= lam / k
        cdf += p
        if p == 0.0 and cdf < u:  # CDF rounding shortfall in the far tail
            break
    return k


def poisson_ptrs(lam: float, rng: np.random.Generator) -> int:
    slam = math.sqrt(lam)
    loglam = math.log(lam)
    b = 0.931 + 2.53 * slam
    a = -0.059 + 0.02483 * b
    invalpha = 1.1239 + 1.1328 / (b - 3.4)
    vr = 0.9277 - 3.6224 / (b - 2)
    while True:
        u = rng.random() - 0.5
        v = rng.random()
        us = 0.5 - abs(u)
        k = math.floor((2 * a / us + b) * u + lam + 0.43)
        if us >= 0.07 and v <= vr:
            return k
        if k < 0 or (us < 0.013 and v > us):
            continue
        if math.log(v) + math.log(invalpha) - math.log(a / (us * us) + b) <= -lam + k * loglam - math.lgamma(k + 1):
            return k


def poisson(lam: float, rng: np.random.Generator) -> int:
    if lam < 0 or not math.isfinite(lam):
        raise ValueError(f"Poisson mean must be finite and non-negative, got {lam}")
    if lam == 0:
        return 0
    if lam < INVERSION_LIMIT:
        return poisson_inversion(lam, rng)
    return poisson_ptrs(lam, rng)


def sample_counts(means: Sequence[float], seed: int) -> np.ndarray:
    """One Poisson draw per point, point i from child stream i of ``seed``."""
    means = np.asarray(means, dtype=float)
    gens = point_generators(seed, len(means))
    return np.array([poisson(float(m), g) for m, g in zip(means, gens)], dtype=np.int64)
