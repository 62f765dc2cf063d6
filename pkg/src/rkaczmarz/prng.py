"""Seeded random streams shared by the solver, the ensembles and the generators.

Every stream is a numpy ``Generator`` over ``PCG64`` seeded with a 64-bit
integer. Ensemble trials get their own seed through :func:`mix_seed`, a
SplitMix64 finalizer over ``(base, index)``, so trial ``t`` can be replayed in
isolation. Normal variates are produced with the Box-Muller transform from
the generator's uniform doubles, which pins the full recipe down to the
PCG64 output stream.
"""

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15


def _splitmix64(z):
    z = (z + GOLDEN_GAMMA) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def mix_seed(base: int, index: int) -> int:
    """Derive the seed of sub-stream ``index`` from ``base``.

    >>> mix_seed(0, 0) != mix_seed(0, 1)
    True
    """
    if base < 0 or index < 0:
        raise ValueError("seeds and stream indices must be nonnegative")
    return _splitmix64(_splitmix64(base & MASK64) ^ (index & MASK64))


def make_rng(seed: int) -> np.random.Generator:
    if not 0 <= int(seed) <= MASK64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return np.random.Generator(np.random.PCG64(int(seed)))


def box_muller(rng: np.random.Generator, size: int) -> np.ndarray:
    """Draw ``size`` standard normals, two per pair of uniforms.

    Pair ``j`` consumes uniforms ``u1, u2`` and yields
    ``r cos(2 pi u2)`` then ``r sin(2 pi u2)`` with ``r = sqrt(-2 log(1 - u1))``.
    """
    pairs = (size + 1) // 2
    u = rng.random(2 * pairs).reshape(pairs, 2)
    r = np.sqrt(-2.0 * np.log1p(-u[:, 0]))
    theta = 2.0 * np.pi * u[:, 1]
    z = np.empty((pairs, 2))
    z[:, 0] = r * np.cos(theta)
    z[:, 1] = r * np.sin(theta)
    return z.reshape(-1)[:size]
