import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import chi2

from rkaczmarz.analysis import contraction_factor
from rkaczmarz.generators import random_consistent
from rkaczmarz.kaczmarz import (
    DRAW_BLOCK,
    SolveConfig,
    ZeroRowError,
    build_sampler,
    project_step,
    row_stream,
    rows_from_uniforms,
    sample_row,
    solve,
)
from rkaczmarz.prng import make_rng

from conftest import gaussian


def test_sampler_identity():
    s = build_sampler(np.eye(2))
    np.testing.assert_array_equal(s.cumulative, [1, 2])
    np.testing.assert_array_equal(s.probabilities, [0.5, 0.5])


def test_sampler_proportional_to_squared_norms():
    s = build_sampler(np.array([[1.0, 0.0], [1.0, np.sqrt(2.0)]]))
    np.testing.assert_allclose(s.probabilities, [0.25, 0.75], rtol=1e-15)
    assert s.total == pytest.approx(4.0, rel=1e-15)


def test_sampler_total_is_frobenius_and_increasing():
    a = gaussian(30, 5, 1)
    s = build_sampler(a)
    assert np.all(np.diff(s.cumulative) > 0)
    assert s.total == pytest.approx(np.sum(a * a), rel=1e-14)


def test_sampler_zero_row_names_index():
    a = np.ones((4, 2))
    a[2] = 0
    with pytest.raises(ZeroRowError) as err:
        build_sampler(a)
    assert err.value.row == 2


def test_empirical_frequencies_chi_square():
    a = gaussian(12, 3, 5)
    s = build_sampler(a)
    draws = row_stream(s, make_rng(17), 10**6)
    observed = np.bincount(draws, minlength=12)
    expected = 10**6 * s.probabilities
    stat = np.sum((observed - expected) ** 2 / expected)
    assert stat < chi2.ppf(1 - 0.001, df=11)


def test_sample_row_single_row():
    s = build_sampler(np.array([[2.0, 1.0]]))
    rng = make_rng(0)
    assert {sample_row(s, rng) for _ in range(100)} == {0}


def test_sample_row_bracket_lookup():
    s = build_sampler(np.array([[1.0, 0.0], [1.0, np.sqrt(2.0)]]))
    assert rows_from_uniforms(s, 0.3) == 1
    assert rows_from_uniforms(s, 0.2) == 0
    assert rows_from_uniforms(s, 0.25) == 1
    # a uniform that rounds up to the total still maps to the last row
    assert rows_from_uniforms(s, 1.0) == 1


def test_sample_row_replay_and_block_equivalence():
    s = build_sampler(gaussian(9, 4, 3))
    rng = make_rng(42)
    one_by_one = [sample_row(s, rng) for _ in range(DRAW_BLOCK + 10)]
    np.testing.assert_array_equal(row_stream(s, make_rng(42), DRAW_BLOCK + 10), one_by_one)
    rng = make_rng(42)
    chunked = np.concatenate([row_stream(s, rng, 7), row_stream(s, rng, DRAW_BLOCK + 3)])
    np.testing.assert_array_equal(chunked, one_by_one)


def test_project_step_examples():
    np.testing.assert_array_equal(project_step(np.eye(2), np.zeros(2), [1.0, 1.0], 0), [0, 1])
    a = np.array([[1.0, 1.0]])
    np.testing.assert_array_equal(project_step(a, [0.0], [1.0, 0.0], 0), [0.5, -0.5])


def test_project_step_zero_row():
    with pytest.raises(ZeroRowError):
        project_step(np.zeros((1, 2)), [1.0], [1.0, 1.0], 0)


@settings(max_examples=60)
@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 2**32))
def test_project_step_is_orthogonal_projection(m, n, seed):
    a = gaussian(m, n, seed)
    x_sol = gaussian(1, n, seed + 1)[0]
    b = a @ x_sol
    x = gaussian(1, n, seed + 2)[0] * 3
    for i in range(m):
        xp = project_step(a, b, x, i)
        assert abs(a[i] @ xp - b[i]) <= 1e-10 * (np.linalg.norm(a[i]) * np.linalg.norm(xp) + abs(b[i]))
        step = xp - x
        # parallel to a_i
        assert np.linalg.norm(step - (step @ a[i]) / (a[i] @ a[i]) * a[i]) <= 1e-12 * (1 + np.linalg.norm(step))
        # Pythagoras against a point of the hyperplane
        lhs = np.sum((x - xp) ** 2) + np.sum((xp - x_sol) ** 2)
        assert lhs == pytest.approx(np.sum((x - x_sol) ** 2), abs=1e-10)


def test_config_validation():
    with pytest.raises(ValueError):
        SolveConfig(max_iters=0)
    with pytest.raises(ValueError):
        SolveConfig(residual_tol=-1.0)
    with pytest.raises(ValueError):
        SolveConfig(trace_every=0)
    with pytest.raises(ValueError):
        SolveConfig(seed=-1)


def test_identity_system_zeroes_one_coordinate_per_step():
    n = 5
    x0 = np.arange(1.0, n + 1)
    tr = solve(np.eye(n), np.zeros(n), x0, SolveConfig(seed=3, max_iters=200, trace_every=1),
               true_x=np.zeros(n))
    seen = set()
    for k in range(1, len(tr)):
        seen.add(int(tr.rows[k]))
        # the remaining error is exactly the untouched coordinates
        assert tr.error[k] ** 2 == pytest.approx(sum(x0[j] ** 2 for j in range(n) if j not in seen))
        if len(seen) == n:
            break
    assert len(seen) == n
    assert tr.residual[k] == 0


def test_scalar_system_one_step():
    a, x, b = random_consistent(1, 1, 4)
    tr = solve(a, b, [0.0], SolveConfig(max_iters=1, trace_every=1), true_x=x)
    assert tr.error[-1] <= 1e-15 * abs(x[0])


def test_solve_dimension_errors():
    with pytest.raises(ValueError, match="b has length"):
        solve(np.eye(2), np.zeros(3), np.zeros(2), SolveConfig())
    with pytest.raises(ValueError, match="x0 has length"):
        solve(np.eye(2), np.zeros(2), np.zeros(3), SolveConfig())
    with pytest.raises(ZeroRowError):
        solve(np.array([[1.0, 0.0], [0.0, 0.0]]), np.zeros(2), np.ones(2), SolveConfig())


def test_solve_rejects_inconsistent_true_x():
    with pytest.raises(ValueError, match="does not solve"):
        solve(np.eye(2), np.ones(2), np.zeros(2), SolveConfig(), true_x=np.zeros(2))


def test_trace_cadence_and_tolerance_stop(system_50x20):
    a, x, b, _ = system_50x20
    tr = solve(a, b, np.zeros(20), SolveConfig(seed=1, max_iters=95, trace_every=10), true_x=x)
    np.testing.assert_array_equal(tr.iters, [0, 10, 20, 30, 40, 50, 60, 70, 80, 90, 95])
    assert np.all(np.isfinite(tr.residual)) and np.all(np.isnan(tr.rayleigh))
    tr = solve(a, b, np.zeros(20), SolveConfig(seed=1, max_iters=10**5, residual_tol=1e-3,
                                              trace_every=10), true_x=x)
    assert tr.residual[-1] <= 1e-3 < tr.residual[-2]
    assert tr.steps == tr.iters[-1] < 10**5


def test_already_solved_start_still_runs(system_50x20):
    a, x, b, _ = system_50x20
    tr = solve(a, b, x, SolveConfig(seed=2, max_iters=100, residual_tol=1e-12, trace_every=5),
               true_x=x)
    assert tr.steps == 5
    np.testing.assert_allclose(tr.x, x, rtol=0, atol=1e-13)


def test_solve_is_bitwise_deterministic(system_50x20):
    a, x, b, f = system_50x20
    cfg = SolveConfig(seed=99, max_iters=3000, trace_every=7, track_coefficients=True)
    t1 = solve(a, b, np.zeros(20), cfg, true_x=x, svd=f)
    t2 = solve(a, b, np.zeros(20), cfg, true_x=x, svd=f)
    for field in ("iters", "rows", "residual", "error", "coefficients", "x"):
        np.testing.assert_array_equal(getattr(t1, field), getattr(t2, field))


def test_solve_matches_manual_project_steps():
    a, x, b = random_consistent(8, 3, 6)
    cfg = SolveConfig(seed=5, max_iters=40, trace_every=1)
    tr = solve(a, b, np.zeros(3), cfg)
    rows = row_stream(build_sampler(a), make_rng(5), 40)
    np.testing.assert_array_equal(tr.rows[1:], rows)
    y = np.zeros(3)
    for i in rows:
        y = project_step(a, b, y, i)
    np.testing.assert_array_equal(tr.x, y)


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 10), st.integers(1, 8), st.integers(0, 2**32))
def test_shift_equivalence(extra, n, seed):
    a, x, b = random_consistent(n + extra - 1, n, seed)
    x0 = gaussian(1, n, seed)[0] * 2
    cfg = SolveConfig(seed=seed, max_iters=300, trace_every=1)
    full = solve(a, b, x0, cfg)
    reduced = solve(a, np.zeros_like(b), x0 - x, cfg)
    common = min(len(full), len(reduced))
    np.testing.assert_array_equal(full.rows[:common], reduced.rows[:common])
    if full.steps == reduced.steps:
        np.testing.assert_allclose(full.x, x + reduced.x, rtol=0, atol=1e-12)
    else:
        # one run hit a residual of exactly zero first; both are solved
        np.testing.assert_allclose(full.x, x, rtol=0, atol=1e-12)
        np.testing.assert_allclose(reduced.x, 0, rtol=0, atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 10), st.integers(1, 8), st.integers(0, 2**32))
def test_each_step_satisfies_selected_equation_and_is_monotone(extra, n, seed):
    a, x, b = random_consistent(n + extra - 1, n, seed)
    cfg = SolveConfig(seed=seed, max_iters=200, trace_every=1)
    tr = solve(a, b, gaussian(1, n, seed)[0], cfg, true_x=x)
    rows = tr.rows[1:]
    xk = gaussian(1, n, seed)[0]
    for i in rows:
        xk = project_step(a, b, xk, i)
        assert abs(a[i] @ xk - b[i]) <= 1e-10 * (np.linalg.norm(a[i]) * np.linalg.norm(xk) + abs(b[i]))
    # re-projecting onto an already satisfied equation may move x by an ulp
    slack = 8 * np.finfo(float).eps * (np.linalg.norm(x) + tr.error[:-1] + np.linalg.norm(tr.x))
    assert np.all(tr.error[1:] <= tr.error[:-1] + slack)


def test_50x20_convergence_and_mean_contraction(system_50x20):
    a, x, b, _ = system_50x20
    x0 = np.zeros(20)
    tr = solve(a, b, x0, SolveConfig(seed=8, max_iters=10**4, trace_every=1), true_x=x)
    assert tr.error[-1] <= 1e-6 * tr.error[0]
    # realized one-step squared-error ratios against the predicted factor at
    # the current direction; stop before roundoff dominates
    live = np.flatnonzero(tr.error > 1e-10 * tr.error[0])[:-1]
    ratios, predicted = [], []
    xk = x0.copy()
    for k, i in enumerate(tr.rows[1:]):
        if k > live[-1]:
            break
        y = xk - x
        predicted.append(contraction_factor(a, y))
        xk = project_step(a, b, xk, i)
        ratios.append(np.sum((xk - x) ** 2) / np.sum(y**2))
    d = np.array(ratios) - np.array(predicted)
    assert abs(d.mean()) <= 3 * d.std(ddof=1) / np.sqrt(d.size)


def test_50x20_reaches_1e8_within_1e5_iterations(system_50x20):
    a, x, b, f = system_50x20
    # Strohmer-Vershynin: E||e_k||^2 <= (1 - sigma_n^2/||A||_F^2)^k ||e_0||^2
    rate = 1 - f.sigma[-1] ** 2 / f.frob_sq
    assert rate ** 10**5 * np.sum(x**2) < 1e-30
    tr = solve(a, b, np.zeros(20), SolveConfig(seed=1, max_iters=10**5, trace_every=1000), true_x=x)
    assert tr.error[-1] <= 1e-8
