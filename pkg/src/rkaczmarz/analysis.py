"""Expectation oracles and Monte Carlo statistics for randomized Kaczmarz.

Two kinds of checks live here. One-step oracles enumerate all ``m`` possible
projections of an error vector ``y`` (system reduced to ``A y = 0``) and
average them with the sampling weights ``||a_i||^2 / ||A||_F^2``; these are
compared against closed forms built from the SVD. Ensembles run many seeded
solver trajectories side by side and report per-step sample means and
standard errors, compared against the same closed forms iterated ``k`` times.

Row and singular-vector indices are 0-based throughout.
"""

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .kaczmarz import IterateTrace, SolveConfig, build_sampler, row_stream, solve
from .linalg import SvdFactorization, as_matrix, as_vector
from .prng import make_rng, mix_seed

ORACLE_TOL = 1e-10
MC_SIGMAS = 4.0
# absolute slack for Monte Carlo comparisons where the sample is constant
# (k = 0) and the standard error is zero; relative to ||x0 - x||
MC_FLOOR = 1e-12
# sample standard errors are only trusted with at least this many samples
MIN_SAMPLES = 30


class HypothesisViolation(ValueError):
    """A projection sends the error exactly to zero, so its direction is undefined."""

    def __init__(self, row):
        super().__init__(
            f"projection onto row {row} annihilates the probe; "
            "the direction-stability identity requires P(x_(k+1) = x) = 0"
        )
        self.row = row


def _weights_and_outcomes(a, y):
    """Sampling weights and the ``m`` possible successors of ``y`` under ``A y = 0``."""
    a = as_matrix(a)
    y = as_vector(y, a.shape[1], "y")
    norms_sq = np.einsum("ij,ij->i", a, a)
    build_sampler(a)  # raises ZeroRowError
    weights = norms_sq / norms_sq.sum()
    outcomes = y[None, :] - ((a @ y) / norms_sq)[:, None] * a
    return weights, outcomes


def singular_coefficients(svd: SvdFactorization, e) -> np.ndarray:
    e = as_vector(e, svd.v.shape[0], "e")
    return svd.v.T @ e


def predicted_coefficient(sigma_l, frob_sq, k, c0) -> float:
    """Expected singular coefficient after ``k`` steps, ``(1 - sigma^2/||A||_F^2)^k c0``."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    if frob_sq <= 0 or sigma_l < 0 or sigma_l**2 > frob_sq * (1 + 1e-12):
        raise ValueError(f"need 0 <= sigma^2 <= ||A||_F^2, got {sigma_l}^2 vs {frob_sq}")
    factor = min(max(1.0 - sigma_l**2 / frob_sq, 0.0), 1.0)
    return factor**k * c0


def one_step_expected_coefficients(a, svd: SvdFactorization, y) -> np.ndarray:
    """Enumerated ``E <y', v_l>`` for every ``l`` at once."""
    weights, outcomes = _weights_and_outcomes(a, y)
    return weights @ (outcomes @ svd.v)


def theorem1_one_step_oracle(a, svd: SvdFactorization, y, l) -> float:
    """Average of ``<y', v_l>`` over all ``m`` projections of ``y``.

    Should equal ``(1 - sigma_l^2 / ||A||_F^2) <y, v_l>``.
    """
    return float(one_step_expected_coefficients(a, svd, y)[l])


def contraction_factor(a, y) -> float:
    """``1 - ||A y||^2 / (||A||_F^2 ||y||^2)``, the expected one-step shrinkage
    of the squared error when the error points along ``y``."""
    a = as_matrix(a)
    y = as_vector(y, a.shape[1], "y")
    norm = np.linalg.norm(y)
    if norm == 0:
        raise ValueError("contraction factor of the zero vector is undefined")
    ay = a @ (y / norm)
    return float(1.0 - (ay @ ay) / np.sum(a * a))


def theorem2_one_step_oracle(a, y) -> float:
    """Average of ``||y'||^2`` over all ``m`` projections of ``y``.

    For a consistent system this equals ``contraction_factor(a, y) * ||y||^2``
    exactly, not just as an upper bound.
    """
    weights, outcomes = _weights_and_outcomes(a, y)
    return float(weights @ np.einsum("ij,ij->i", outcomes, outcomes))


def theorem3_one_step_oracle(a, y) -> float:
    """Average of ``<y/||y||, y'/||y'||>^2`` over all ``m`` projections of ``y``.

    Raises :class:`HypothesisViolation` naming the first row whose projection
    sends ``y`` to zero (to roundoff).
    """
    weights, outcomes = _weights_and_outcomes(a, y)
    y = np.asarray(y, dtype=np.float64)
    norm = np.linalg.norm(y)
    if norm == 0:
        raise ValueError("direction of the zero vector is undefined")
    out_norms = np.linalg.norm(outcomes, axis=1)
    dead = np.flatnonzero(out_norms <= np.finfo(np.float64).eps * norm)
    if dead.size:
        raise HypothesisViolation(int(dead[0]))
    overlaps = (outcomes @ y) / (out_norms * norm)
    return float(weights @ overlaps**2)


def second_moments(a, y0, k):
    """Exact ``E[y_j y_j^T]`` for ``j = 0..k``, shape ``(k + 1, n, n)``.

    One step maps ``M`` to ``sum_i p_i P_i M P_i`` with ``P_i`` the projector
    onto the hyperplane orthogonal to ``a_i``. This does not go through the
    one-step contraction identity, so it checks multi-step behaviour
    independently and gives exact variances for Monte Carlo error bars.
    """
    a = as_matrix(a)
    y0 = as_vector(y0, a.shape[1], "y0")
    norms_sq = np.einsum("ij,ij->i", a, a)
    frob = norms_sq.sum()
    gram = a.T @ a
    mom = np.outer(y0, y0)
    out = [mom]
    for _ in range(k):
        gm = gram @ mom
        w = np.einsum("ij,jk,ik->i", a, mom, a) / norms_sq
        mom = mom - (gm + gm.T) / frob + (a.T * w) @ a / frob
        mom = 0.5 * (mom + mom.T)
        out.append(mom)
    return np.array(out)


def expected_sq_error(a, y0, k) -> np.ndarray:
    """Exact ``E ||y_j||^2`` for ``j = 0..k``."""
    return np.trace(second_moments(a, y0, k), axis1=1, axis2=2)


def coefficient_stderr(a, svd: SvdFactorization, y0, iters, trials) -> np.ndarray:
    """Exact standard error of the mean singular coefficients, ``(len(iters), n)``.

    Uses the propagated second moments and the closed-form mean, so it stays
    meaningful when every sampled coefficient is identical (rare events).
    """
    iters = np.asarray(iters)
    moms = second_moments(a, y0, int(iters.max()))[iters]
    second = np.einsum("li,kij,lj->kl", svd.v.T, moms, svd.v.T)
    c0 = singular_coefficients(svd, y0)
    mean = (1.0 - svd.sigma**2 / svd.frob_sq)[None, :] ** iters[:, None] * c0[None, :]
    return np.sqrt(np.maximum(second - mean**2, 0.0) / trials)


@dataclass
class EnsembleStats:
    """Per logged step sample means and standard errors over independent trials.

    Quantities: ``coef_1..coef_n`` (signed singular coefficients of
    ``x_k - x``), ``sq_error``, ``contraction`` (``contraction_factor`` at the
    current error), ``overlap_sq`` (squared cosine between consecutive logged
    errors). With a cadence of one step, also ``sq_error_chain`` (the
    one-step prediction of ``sq_error`` from the previous iterate) and the
    paired differences ``sq_error_gap`` and ``overlap_gap``, whose means should
    vanish.
    """

    trials: int
    iters: np.ndarray
    mean: dict = field(default_factory=dict)
    stderr: dict = field(default_factory=dict)
    count: dict = field(default_factory=dict)
    skipped: Optional[np.ndarray] = None

    @property
    def quantities(self):
        return list(self.mean)

    def coefficients(self):
        names = sorted((q for q in self.mean if q.startswith("coef_")),
                       key=lambda q: int(q[5:]))
        return (np.column_stack([self.mean[q] for q in names]),
                np.column_stack([self.stderr[q] for q in names]))


def trial_seeds(base_seed, trials):
    return [mix_seed(base_seed, t) for t in range(trials)]


def _mean_stderr(samples):
    # samples: (trials, steps), NaN for skipped entries
    count = np.sum(~np.isnan(samples), axis=0)
    with np.errstate(invalid="ignore", divide="ignore"), warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        mean = np.nanmean(samples, axis=0) if samples.size else np.zeros(0)
        var = np.nanvar(samples, axis=0, ddof=1)
        se = np.sqrt(var / count)
    return mean, np.where(count >= 2, se, np.nan), count


def ensemble_run(a, b, x0, cfg: SolveConfig, trials, svd: SvdFactorization, true_x) -> EnsembleStats:
    """Run ``trials`` independent solves for ``cfg.max_iters`` steps each.

    Trial ``t`` uses seed ``mix_seed(cfg.seed, t)`` and follows exactly the row
    sequence of ``solve`` with that seed; the trials are stepped together as
    one batch. ``cfg.residual_tol`` is ignored so that every trial has the same
    horizon.
    """
    if trials < 2:
        raise ValueError("an ensemble needs at least 2 trials")
    a = as_matrix(a)
    m, n = a.shape
    b = as_vector(b, m, "b")
    true_x = as_vector(true_x, n, "true_x")
    x0 = as_vector(x0, n, "x0")
    sampler = build_sampler(a)
    norms_sq = np.einsum("ij,ij->i", a, a)
    frob = norms_sq.sum()
    steps = cfg.max_iters
    rows = np.stack([row_stream(sampler, make_rng(s), steps) for s in trial_seeds(cfg.seed, trials)])

    logged = sorted(set(range(0, steps + 1, cfg.trace_every)) | {steps})
    chain = cfg.trace_every == 1
    x = np.tile(x0, (trials, 1))
    samples = {f"coef_{l + 1}": [] for l in range(n)}
    samples.update(sq_error=[], contraction=[], overlap_sq=[])
    if chain:
        samples.update(sq_error_chain=[], sq_error_gap=[], overlap_gap=[])
    skipped = []
    prev = None
    prev_pred = None

    def observe():
        nonlocal prev, prev_pred
        y = x - true_x
        sq = np.einsum("ij,ij->i", y, y)
        ay_sq = np.einsum("ij,ij->i", y @ a.T, y @ a.T)
        alive = sq > 0
        with np.errstate(invalid="ignore", divide="ignore"):
            contraction = np.where(alive, 1.0 - ay_sq / (frob * sq), np.nan)
        coef = y @ svd.v
        for l in range(n):
            samples[f"coef_{l + 1}"].append(coef[:, l])
        samples["sq_error"].append(sq)
        samples["contraction"].append(contraction)
        if prev is None:
            overlap = np.full(trials, np.nan)
            skipped.append(0)
        else:
            py, psq = prev
            both = alive & (psq > 0)
            with np.errstate(invalid="ignore", divide="ignore"):
                overlap = np.where(both, np.einsum("ij,ij->i", py, y) ** 2 / (psq * sq), np.nan)
            skipped.append(int(trials - both.sum()))
        samples["overlap_sq"].append(overlap)
        if chain:
            if prev_pred is None:
                pred_sq = sq.copy()
                overlap_gap = np.full(trials, np.nan)
            else:
                pred_sq, pred_c = prev_pred
                overlap_gap = overlap - pred_c
            samples["sq_error_chain"].append(pred_sq)
            samples["sq_error_gap"].append(sq - pred_sq)
            samples["overlap_gap"].append(overlap_gap)
            # Theorem 3 needs P(y_(k+1) = 0) = 0: drop errors parallel to a row
            with np.errstate(invalid="ignore", divide="ignore"):
                cos_sq = (y @ a.T) ** 2 / (norms_sq[None, :] * sq[:, None])
            parallel = np.max(cos_sq, axis=1) >= 1.0 - 1e-12
            prev_pred = (sq - ay_sq / frob, np.where(parallel, np.nan, contraction))
        prev = (y, sq)

    logged_set = set(logged)
    observe()
    for k in range(1, steps + 1):
        r = rows[:, k - 1]
        ar = a[r]
        x += (((b[r] - np.einsum("ij,ij->i", ar, x)) / norms_sq[r])[:, None]) * ar
        if k in logged_set:
            observe()

    stats = EnsembleStats(trials=trials, iters=np.array(logged, dtype=np.int64),
                          skipped=np.array(skipped, dtype=np.int64))
    for name, cols in samples.items():
        stats.mean[name], stats.stderr[name], stats.count[name] = _mean_stderr(np.column_stack(cols))
    return stats


def minimize_rayleigh(a, x0, cfg: SolveConfig, svd: Optional[SvdFactorization] = None) -> IterateTrace:
    """Drive ``||A x|| / ||x||`` down by running Kaczmarz on ``A x = 0``.

    The trace's ``rayleigh`` column holds the quotient; with ``svd`` the
    ``overlap`` column holds ``|<x_k / ||x_k||, v_n>|``. Once an iterate hits
    zero exactly (e.g. for the identity) both become NaN.
    """
    a = as_matrix(a)
    x0 = as_vector(x0, a.shape[1], "x0")
    if not np.any(x0):
        raise ValueError("x0 = 0 is a fixed point of the iteration for A x = 0")
    vmin = svd.v[:, -1] if svd is not None else None
    return solve(a, np.zeros(a.shape[0]), x0, cfg, svd=svd, overlap_with=vmin)


@dataclass
class TheoremReport:
    """Outcome of one check: ``passed`` iff ``max_deviation <= tolerance``.

    ``unit`` is ``"abs"`` for deviations in absolute terms (per unit ``||y||``
    for one-step oracles) and ``"stderr"`` for Monte Carlo deviations
    measured in standard errors.
    """

    theorem: int
    check: str
    predicted: np.ndarray
    observed: np.ndarray
    deviation: np.ndarray
    tolerance: float
    unit: str = "abs"

    @property
    def max_deviation(self) -> float:
        return float(np.max(self.deviation)) if self.deviation.size else 0.0

    @property
    def passed(self) -> bool:
        return self.max_deviation <= self.tolerance

    def summary(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        unit = " stderr" if self.unit == "stderr" else ""
        return (f"theorem {self.theorem} {self.check}: {self.predicted.size} values, "
                f"max deviation {self.max_deviation:.3e}{unit} <= {self.tolerance:g}{unit}: {verdict}")


def _report(theorem, check, predicted, observed, deviation, tolerance, unit="abs"):
    return TheoremReport(theorem, check, np.ravel(predicted), np.ravel(observed),
                         np.ravel(deviation), tolerance, unit)


def verify_theorem1(a, svd: SvdFactorization, probes, tol=ORACLE_TOL) -> TheoremReport:
    """Enumerated one-step coefficients vs ``(1 - sigma_l^2/||A||_F^2) <y, v_l>``."""
    frob = float(np.sum(as_matrix(a) ** 2))
    factors = 1.0 - svd.sigma**2 / frob
    pred, obs, dev = [], [], []
    for y in probes:
        norm = np.linalg.norm(y)
        p = factors * singular_coefficients(svd, y)
        o = one_step_expected_coefficients(a, svd, y)
        pred.append(p)
        obs.append(o)
        dev.append(np.abs(o - p) / (norm if norm > 0 else 1.0))
    return _report(1, "one_step", pred, obs, dev, tol)


def verify_theorem2(a, probes, tol=ORACLE_TOL) -> TheoremReport:
    """Enumerated ``E||y'||^2`` vs ``contraction_factor * ||y||^2``."""
    pred, obs, dev = [], [], []
    for y in probes:
        sq = float(y @ y)
        p = contraction_factor(a, y) * sq if sq > 0 else 0.0
        o = theorem2_one_step_oracle(a, y)
        pred.append(p)
        obs.append(o)
        dev.append(abs(o - p) / (sq if sq > 0 else 1.0))
    return _report(2, "one_step", pred, obs, dev, tol)


def verify_theorem3(a, probes, tol=ORACLE_TOL) -> TheoremReport:
    """Enumerated ``E<y_hat, y_hat'>^2`` vs ``1 - ||A y_hat||^2/||A||_F^2``."""
    pred, obs = [], []
    for y in probes:
        pred.append(contraction_factor(a, y))
        obs.append(theorem3_one_step_oracle(a, y))
    pred, obs = np.array(pred), np.array(obs)
    return _report(3, "one_step", pred, obs, np.abs(obs - pred), tol)


def _zscores(observed, predicted, stderr, floor):
    se = np.where(np.isnan(stderr), 0.0, stderr)
    return np.abs(observed - predicted) / np.maximum(se, floor)


def theorem1_monte_carlo(stats: EnsembleStats, svd: SvdFactorization, y0, a=None,
                         sigmas=MC_SIGMAS) -> TheoremReport:
    """Signed mean coefficients against ``(1 - sigma_l^2/||A||_F^2)^k <y0, v_l>``.

    With the matrix ``a`` the standard errors are the exact ones from
    :func:`coefficient_stderr`; otherwise the sample standard errors.
    """
    c0 = singular_coefficients(svd, y0)
    factors = 1.0 - svd.sigma**2 / svd.frob_sq
    pred = factors[None, :] ** stats.iters[:, None] * c0[None, :]
    mean, se = stats.coefficients()
    if a is not None:
        se = coefficient_stderr(a, svd, y0, stats.iters, stats.trials)
    floor = MC_FLOOR * max(np.linalg.norm(y0), 1.0)
    return _report(1, "monte_carlo", pred, mean, _zscores(mean, pred, se, floor), sigmas, "stderr")


def theorem2_monte_carlo(stats: EnsembleStats, y0, sigmas=MC_SIGMAS) -> TheoremReport:
    """Mean squared error against the mean one-step prediction from the
    previous iterate; compared through the paired per-trial difference."""
    if "sq_error_gap" not in stats.mean:
        raise ValueError("chained checks need an ensemble logged at every step")
    floor = MC_FLOOR * max(float(np.dot(y0, y0)), 1.0)
    dev = _zscores(stats.mean["sq_error_gap"], 0.0, stats.stderr["sq_error_gap"], floor)
    return _report(2, "monte_carlo_chain", stats.mean["sq_error_chain"], stats.mean["sq_error"],
                   dev, sigmas, "stderr")


def theorem3_monte_carlo(stats: EnsembleStats, sigmas=MC_SIGMAS) -> TheoremReport:
    """Mean squared overlap of consecutive errors against the mean contraction
    factor of the earlier one, via the paired per-trial difference.

    Only steps where at least ``MIN_SAMPLES`` trials satisfy the hypothesis
    (earlier error not parallel to any row) are compared.
    """
    if "overlap_gap" not in stats.mean:
        raise ValueError("chained checks need an ensemble logged at every step")
    gap, se = stats.mean["overlap_gap"][1:], stats.stderr["overlap_gap"][1:]
    keep = stats.count["overlap_gap"][1:] >= MIN_SAMPLES
    observed = stats.mean["overlap_sq"][1:][keep]
    dev = _zscores(gap[keep], 0.0, se[keep], MC_FLOOR)
    return _report(3, "monte_carlo_chain", observed - gap[keep], observed, dev, sigmas, "stderr")


def strohmer_vershynin_envelope(stats: EnsembleStats, svd: SvdFactorization, y0,
                                slack=1.05, sigmas=MC_SIGMAS) -> TheoremReport:
    """Mean squared error against ``slack (1 - sigma_n^2/||A||_F^2)^k ||y0||^2``.

    Deviation is the excess over the envelope in standard errors, zero when
    the mean lies below it.
    """
    rate = 1.0 - svd.sigma[-1] ** 2 / svd.frob_sq
    bound = slack * rate ** stats.iters * float(np.dot(y0, y0))
    mean, se = stats.mean["sq_error"], stats.stderr["sq_error"]
    floor = MC_FLOOR * max(float(np.dot(y0, y0)), 1.0)
    excess = np.maximum(mean - bound, 0.0) / np.maximum(np.nan_to_num(se), floor)
    return _report(2, "rate_envelope", bound, mean, excess, sigmas, "stderr")
