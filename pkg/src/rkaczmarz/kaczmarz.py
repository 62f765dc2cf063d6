"""Randomized Kaczmarz: row sampling, the projection step and the solver loop."""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .linalg import SvdFactorization, as_matrix, as_vector
from .prng import make_rng

# uniforms are drawn in blocks; PCG64 doubles do not depend on the block size
DRAW_BLOCK = 4096


class ZeroRowError(ValueError):
    """A row of the system matrix is zero and defines no hyperplane."""

    def __init__(self, row):
        super().__init__(f"row {row} of the matrix is zero")
        self.row = row


@dataclass(frozen=True)
class RowSampler:
    """Cumulative squared row norms; row ``i`` is drawn with probability
    ``||a_i||^2 / ||A||_F^2``."""

    cumulative: np.ndarray
    total: float

    @property
    def probabilities(self) -> np.ndarray:
        return np.diff(self.cumulative, prepend=0.0) / self.total


def build_sampler(a) -> RowSampler:
    a = as_matrix(a)
    norms_sq = np.einsum("ij,ij->i", a, a)
    zero = np.flatnonzero(norms_sq == 0)
    if zero.size:
        raise ZeroRowError(int(zero[0]))
    cumulative = np.cumsum(norms_sq)
    return RowSampler(cumulative=cumulative, total=float(cumulative[-1]))


def rows_from_uniforms(s: RowSampler, u) -> np.ndarray:
    """Map uniforms in ``[0, 1)`` to row indices by binary search."""
    idx = np.searchsorted(s.cumulative, np.asarray(u) * s.total, side="right")
    return np.minimum(idx, s.cumulative.size - 1)


def sample_row(s: RowSampler, rng: np.random.Generator) -> int:
    """Draw one 0-based row index."""
    return int(rows_from_uniforms(s, rng.random()))


def row_stream(s: RowSampler, rng: np.random.Generator, count: int) -> np.ndarray:
    """Draw ``count`` row indices; equal to ``count`` calls of :func:`sample_row`."""
    return rows_from_uniforms(s, rng.random(count))


def project_step(a, b, x, i) -> np.ndarray:
    """Project ``x`` onto the hyperplane ``<a_i, x> = b_i``.

    Returns ``x + (b_i - <a_i, x>) / ||a_i||^2 * a_i``, the closest point to
    ``x`` on that hyperplane.
    """
    a = as_matrix(a)
    row = a[i]
    norm_sq = row @ row
    if norm_sq == 0:
        raise ZeroRowError(i)
    x = np.asarray(x, dtype=np.float64)
    return x + ((b[i] - row @ x) / norm_sq) * row


@dataclass(frozen=True)
class SolveConfig:
    seed: int = 0
    max_iters: int = 10_000
    residual_tol: float = 0.0
    trace_every: int = 10
    track_coefficients: bool = False

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.residual_tol < 0:
            raise ValueError("residual_tol must be nonnegative")
        if self.trace_every < 1:
            raise ValueError("trace_every must be at least 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass
class IterateTrace:
    """Logged iterates of one run.

    ``rows[j]`` is the row projected on to reach iterate ``iters[j]`` (``-1``
    for the starting point). ``error``, ``rayleigh`` and ``overlap`` hold NaN
    where they are undefined; ``coefficients`` has one row per logged step.
    """

    iters: np.ndarray
    rows: np.ndarray
    residual: np.ndarray
    error: np.ndarray
    rayleigh: np.ndarray
    coefficients: Optional[np.ndarray] = None
    overlap: Optional[np.ndarray] = None
    x: np.ndarray = field(default=None, repr=False)
    steps: int = 0

    def __len__(self):
        return self.iters.size


def solve(a, b, x0, cfg: SolveConfig, true_x=None, svd: Optional[SvdFactorization] = None,
          overlap_with: Optional[np.ndarray] = None) -> IterateTrace:
    """Run randomized Kaczmarz from ``x0``.

    Stops after ``cfg.max_iters`` steps or at the first logged step whose
    residual is at most ``cfg.residual_tol``. Iterate 0 and every
    ``cfg.trace_every``-th iterate are logged, plus the last one. With
    ``true_x`` the error is logged; with ``svd`` and ``cfg.track_coefficients``
    also the coordinates of ``x_k - true_x`` in the right singular basis.
    ``overlap_with`` is a unit vector ``v`` for logging ``|<x_k/||x_k||, v>|``.
    """
    a = as_matrix(a)
    m, n = a.shape
    b = as_vector(b, m, "b")
    x = as_vector(x0, n, "x0").copy()
    if true_x is not None:
        true_x = as_vector(true_x, n, "true_x")
        gap = np.linalg.norm(a @ true_x - b)
        if gap > 1e-10 * np.linalg.norm(b):
            raise ValueError(f"true_x does not solve the system (residual {gap:.3e})")
    sampler = build_sampler(a)
    norms_sq = np.einsum("ij,ij->i", a, a)
    homogeneous = not np.any(b)
    track = cfg.track_coefficients and svd is not None
    if track and true_x is None and not homogeneous:
        raise ValueError("tracking coefficients needs true_x unless b = 0")
    if track and svd.v.shape != (n, n):
        raise ValueError("svd does not match the matrix dimensions")
    ref = true_x if true_x is not None else (np.zeros(n) if homogeneous else None)

    log = {"iters": [], "rows": [], "residual": [], "error": [], "rayleigh": [],
           "coef": [], "overlap": []}

    def record(k, row):
        ax = a @ x
        res = float(np.linalg.norm(ax - b))
        xn = np.linalg.norm(x)
        log["iters"].append(k)
        log["rows"].append(row)
        log["residual"].append(res)
        log["error"].append(float(np.linalg.norm(x - true_x)) if true_x is not None else np.nan)
        log["rayleigh"].append(float(np.linalg.norm(ax) / xn) if homogeneous and xn > 0 else np.nan)
        if track:
            log["coef"].append(svd.v.T @ (x - ref))
        if overlap_with is not None:
            log["overlap"].append(float(abs(x @ overlap_with) / xn) if xn > 0 else np.nan)
        return res

    rng = make_rng(cfg.seed)
    record(0, -1)
    k = 0
    res = np.inf
    # the tolerance is only checked at logged steps after the first move
    while k < cfg.max_iters and res > cfg.residual_tol:
        block = row_stream(sampler, rng, min(DRAW_BLOCK, cfg.max_iters - k))
        for row in block:
            ai = a[row]
            x += ((b[row] - ai @ x) / norms_sq[row]) * ai
            k += 1
            if k % cfg.trace_every == 0 or k == cfg.max_iters:
                res = record(k, int(row))
                if res <= cfg.residual_tol:
                    break

    coef = np.array(log["coef"]) if track else None
    overlap = np.array(log["overlap"]) if overlap_with is not None else None
    return IterateTrace(
        iters=np.array(log["iters"], dtype=np.int64),
        rows=np.array(log["rows"], dtype=np.int64),
        residual=np.array(log["residual"]),
        error=np.array(log["error"]),
        rayleigh=np.array(log["rayleigh"]),
        coefficients=coef,
        overlap=overlap,
        x=x,
        steps=k,
    )
