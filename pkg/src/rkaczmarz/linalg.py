"""Dense kernels and the singular value decomposition used as ground truth.

Matrices are plain 2-D ``float64`` numpy arrays and vectors 1-D ones; the
helpers :func:`as_matrix` and :func:`as_vector` validate and coerce inputs.
"""

from dataclasses import dataclass

import numpy as np

RANK_TOL = 1e-12
MAX_SWEEPS = 60


class SvdConvergenceError(RuntimeError):
    def __init__(self, sweeps, off):
        super().__init__(
            f"one-sided Jacobi did not converge after {sweeps} sweeps "
            f"(largest remaining column cosine {off:.3e})"
        )
        self.sweeps = sweeps
        self.off = off


def as_matrix(a) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"expected a non-empty 2-D matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def as_vector(x, length=None, name="vector") -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size < 1:
        raise ValueError(f"{name} must be a non-empty 1-D array, got shape {x.shape}")
    if length is not None and x.size != length:
        raise ValueError(f"{name} has length {x.size}, expected {length}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} has non-finite entries")
    return x


def frobenius_norm_sq(a) -> float:
    a = as_matrix(a)
    return float(np.sum(a * a))


def matvec(a, x) -> np.ndarray:
    """Return ``A @ x`` summed column by column, left to right.

    Entry ``i`` is ``((a[i,0]*x[0] + a[i,1]*x[1]) + ...)``, the same order as a
    naive double loop, so results are reproducible bit for bit.
    """
    a = as_matrix(a)
    x = as_vector(x, a.shape[1], "x")
    y = np.zeros(a.shape[0])
    for j in range(a.shape[1]):
        y += a[:, j] * x[j]
    return y


@dataclass(frozen=True)
class SvdFactorization:
    """Thin SVD ``A = U diag(sigma) V^T`` with ``sigma`` descending.

    ``u`` is m-by-n, ``v`` is n-by-n; singular vectors are the columns. In each
    column of ``v`` the entry of largest magnitude is positive.
    """

    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray
    sweeps: int = 0

    @property
    def frob_sq(self) -> float:
        return float(np.sum(self.sigma**2))

    def is_full_rank(self, rank_tol=RANK_TOL) -> bool:
        return bool(self.sigma[-1] > rank_tol * self.sigma[0])


def _round_robin(n):
    """Yield ``n - 1`` (or ``n``) rounds of disjoint column pairs covering all pairs."""
    players = list(range(n)) if n % 2 == 0 else list(range(n)) + [-1]
    k = len(players)
    for _ in range(k - 1):
        p, q = [], []
        for i in range(k // 2):
            a, b = players[i], players[k - 1 - i]
            if a >= 0 and b >= 0:
                p.append(min(a, b))
                q.append(max(a, b))
        yield np.array(p, dtype=np.intp), np.array(q, dtype=np.intp)
        players = [players[0]] + [players[-1]] + players[1:-1]


def _complete_columns(u, missing):
    # fill zero-sigma columns of u with unit vectors orthogonal to the rest
    m = u.shape[0]
    for j in missing:
        for e in range(m):
            cand = np.zeros(m)
            cand[e] = 1.0
            for _ in range(2):
                cand -= u @ (u.T @ cand)
            norm = np.linalg.norm(cand)
            if norm > 0.5:
                u[:, j] = cand / norm
                break
    return u


def jacobi_svd(a, tol=None, max_sweeps=MAX_SWEEPS) -> SvdFactorization:
    """One-sided (Hestenes) Jacobi SVD of a tall matrix.

    Columns of ``W = A V`` are rotated pairwise until every pair is orthogonal
    to within ``tol`` in relative terms, ``|w_p . w_q| <= tol ||w_p|| ||w_q||``.
    Each sweep visits all pairs in round-robin order, applying the disjoint
    rotations of a round at once.
    """
    a = as_matrix(a)
    m, n = a.shape
    if m < n:
        raise ValueError(f"svd requires m >= n, got {m}x{n}")
    if tol is None:
        tol = max(1e-14, m * np.finfo(np.float64).eps)
    w = a.copy()
    v = np.eye(n)
    rounds = list(_round_robin(n)) if n > 1 else []
    off = 0.0
    for sweep in range(1, max_sweeps + 1):
        rotated = False
        off = 0.0
        for p, q in rounds:
            wp, wq = w[:, p], w[:, q]
            alpha = np.einsum("ij,ij->j", wp, wp)
            beta = np.einsum("ij,ij->j", wq, wq)
            gamma = np.einsum("ij,ij->j", wp, wq)
            scale = np.sqrt(alpha * beta)
            live = scale > 0
            cos = np.zeros_like(gamma)
            cos[live] = np.abs(gamma[live]) / scale[live]
            off = max(off, float(cos.max(initial=0.0)))
            act = cos > tol
            if not act.any():
                continue
            rotated = True
            p, q = p[act], q[act]
            alpha, beta, gamma = alpha[act], beta[act], gamma[act]
            zeta = (beta - alpha) / (2.0 * gamma)
            t = np.where(zeta >= 0, 1.0, -1.0) / (np.abs(zeta) + np.hypot(1.0, zeta))
            c = 1.0 / np.hypot(1.0, t)
            s = c * t
            wp, wq = w[:, p], w[:, q]
            w[:, p] = c * wp - s * wq
            w[:, q] = s * wp + c * wq
            vp, vq = v[:, p], v[:, q]
            v[:, p] = c * vp - s * vq
            v[:, q] = s * vp + c * vq
        if not rotated:
            break
    else:
        raise SvdConvergenceError(max_sweeps, off)

    sigma = np.sqrt(np.einsum("ij,ij->j", w, w))
    order = np.argsort(-sigma, kind="stable")
    sigma, w, v = sigma[order], w[:, order], v[:, order]
    u = np.zeros((m, n))
    nonzero = sigma > 0
    u[:, nonzero] = w[:, nonzero] / sigma[nonzero]
    if not nonzero.all():
        u = _complete_columns(u, np.flatnonzero(~nonzero))
    u, v = _fix_signs(u, v)
    return SvdFactorization(u=u, sigma=sigma, v=v, sweeps=sweep)


def _fix_signs(u, v):
    lead = np.argmax(np.abs(v), axis=0)
    flip = v[lead, np.arange(v.shape[1])] < 0
    sign = np.where(flip, -1.0, 1.0)
    return u * sign, v * sign


def svd(a, method="jacobi") -> SvdFactorization:
    """Thin SVD of ``a`` (``m >= n``), sigma descending, signs normalized.

    ``method="jacobi"`` runs :func:`jacobi_svd`; ``method="lapack"`` calls
    ``numpy.linalg.svd`` and applies the same ordering and sign convention,
    which is far faster for matrices in the thousands.
    """
    if method == "jacobi":
        return jacobi_svd(a)
    if method != "lapack":
        raise ValueError(f"unknown svd method {method!r}")
    a = as_matrix(a)
    if a.shape[0] < a.shape[1]:
        raise ValueError(f"svd requires m >= n, got {a.shape[0]}x{a.shape[1]}")
    u, sigma, vt = np.linalg.svd(a, full_matrices=False)
    u, v = _fix_signs(u, vt.T.copy())
    return SvdFactorization(u=u, sigma=sigma, v=v)


def rayleigh_quotient(a, x) -> float:
    """``||A x|| / ||x||``; lies between the smallest and largest singular value."""
    a = as_matrix(a)
    x = as_vector(x, a.shape[1], "x")
    norm = np.linalg.norm(x)
    if norm == 0:
        raise ValueError("Rayleigh quotient of the zero vector is undefined")
    return float(np.linalg.norm(a @ x) / norm)
