"""Seeded test matrices and systems."""

import math
from dataclasses import dataclass

import numpy as np

from .linalg import RANK_TOL, as_vector, matvec, svd
from .prng import box_muller, make_rng, mix_seed

KINDS = ("gaussian_shifted_duplicate", "random_consistent", "diagonal")
MAX_REDRAWS = 10


def default_shift(n):
    """Diagonal shift of the desk-scale planted matrix, ``10 sqrt(n)``."""
    return 10.0 * math.sqrt(n)


@dataclass(frozen=True)
class GeneratorSpec:
    kind: str
    n: int
    m: int = 0
    shift: float = 0.0
    perturb: float = 0.01
    seed: int = 0
    entries: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown generator kind {self.kind!r}")
        if self.kind == "gaussian_shifted_duplicate" and self.n < 2:
            raise ValueError("gaussian_shifted_duplicate needs n >= 2")
        if self.kind == "random_consistent" and not self.m >= self.n >= 1:
            raise ValueError("random_consistent needs m >= n >= 1")

    def build(self):
        """Matrix for ``diagonal`` and the planted kind; ``(A, x, b)`` otherwise."""
        if self.kind == "diagonal":
            return diagonal(self.entries)
        if self.kind == "gaussian_shifted_duplicate":
            return gaussian_shifted_duplicate(self.n, self.shift, self.perturb, self.seed)
        return random_consistent(self.m, self.n, self.seed)


def gaussian_shifted_duplicate(n, shift, perturb, seed) -> np.ndarray:
    """Gaussian ``n x n`` matrix plus ``shift * I`` whose last row is a near copy.

    After the shift, row ``n-1`` (0-based) is replaced by row ``n-2`` plus
    ``perturb`` in every entry, which plants one tiny singular value.
    """
    if n < 2:
        raise ValueError(f"need n >= 2, got {n}")
    a = box_muller(make_rng(seed), n * n).reshape(n, n)
    a[np.diag_indices(n)] += shift
    a[-1] = a[-2] + perturb
    return a


def random_consistent(m, n, seed):
    """Gaussian ``A`` (m x n), Gaussian ``x`` and ``b = A x``.

    Draws that are rank deficient, ``sigma_n <= 1e-12 sigma_1``, or contain a
    zero row are rejected and redrawn from the next sub-seed.
    """
    if not m >= n >= 1:
        raise ValueError(f"need m >= n >= 1, got m={m}, n={n}")
    for attempt in range(MAX_REDRAWS + 1):
        rng = make_rng(mix_seed(seed, attempt))
        a = box_muller(rng, m * n).reshape(m, n)
        x = box_muller(rng, n)
        if np.any(np.all(a == 0, axis=1)):
            continue
        if svd(a).is_full_rank(RANK_TOL):
            return a, x, matvec(a, x)
    raise ValueError(f"no full-rank draw after {MAX_REDRAWS} retries (seed {seed})")


def diagonal(entries) -> np.ndarray:
    entries = as_vector(entries, name="entries")
    if np.any(entries == 0):
        raise ValueError("diagonal entries must be nonzero")
    return np.diag(entries)
