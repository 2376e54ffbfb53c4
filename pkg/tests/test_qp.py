import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from indexfund.errors import DimensionError, InfeasibleError
from indexfund.qp import QpProblem, solve_tracking_qp, tracking_variance, turnover
from indexfund.similarity import covariance
from oracles import refined_grid_qp, simplex_grid_qp


def random_cov(rng, n, scale=1.0):
    a = rng.normal(size=(n, n))
    v = a @ a.T * scale
    return v + 1e-8 * np.trace(v) / n * np.eye(n)


def frank_wolfe_gap(v, x_b, x, support, x_prev=None, t=None):
    """max over feasible y of grad'(x - y); zero exactly at a constrained optimum."""
    n = len(x)
    g = 2 * v @ (x - x_b)
    off = np.setdiff1d(np.arange(n), support)
    # variables y (n), p (n), m (n) with y - x_prev = p - m
    c = np.concatenate([g, np.zeros(2 * n)])
    a_eq = [np.concatenate([np.ones(n), np.zeros(2 * n)])]
    b_eq = [1.0]
    bounds = [(0, 0) if i in off else (0, None) for i in range(n)] + [(0, None)] * (2 * n)
    a_ub, b_ub = None, None
    if x_prev is not None:
        a_eq = np.vstack([a_eq, np.hstack([np.eye(n), -np.eye(n), np.eye(n)])])
        b_eq = np.concatenate([b_eq, x_prev])
        a_ub = [np.concatenate([np.zeros(n), np.ones(2 * n)])]
        b_ub = [t]
    res = linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=np.atleast_2d(a_eq), b_eq=b_eq,
                  bounds=bounds, method="highs")
    assert res.status == 0
    return float(g @ x - res.fun)


def check_feasible(sol, support, x_prev=None, t=None):
    x = sol.x
    assert abs(x.sum() - 1) <= 1e-8
    assert x.min() >= 0
    off = np.setdiff1d(np.arange(len(x)), support)
    assert np.all(x[off] == 0)
    if x_prev is not None:
        assert turnover(x, x_prev) <= t + 1e-8


@pytest.mark.parametrize("a, b, expected", [
    ([0.3, 0.7], [0.3, 0.7], 0.0),
    ([1, 0], [0, 1], 2.0),
    ([0.6, 0.4], [0.5, 0.5], 0.2),
])
def test_turnover(a, b, expected):
    assert turnover(a, b) == pytest.approx(expected, abs=1e-15)


def test_turnover_dimension_error():
    with pytest.raises(DimensionError):
        turnover([1.0], [0.5, 0.5])


def test_benchmark_on_support_recovered_exactly(rng):
    v = random_cov(rng, 6)
    x_b = np.array([0.2, 0.0, 0.5, 0.0, 0.3, 0.0])
    sol = solve_tracking_qp(QpProblem(v, x_b, (0, 2, 4)))
    np.testing.assert_allclose(sol.x, x_b, atol=1e-8)
    assert sol.objective <= 1e-15
    assert sol.converged


def test_zero_turnover_keeps_previous(rng):
    v = random_cov(rng, 5)
    x_prev = np.array([0.1, 0.4, 0.0, 0.5, 0.0])
    sol = solve_tracking_qp(QpProblem(v, np.full(5, 0.2), (0, 1, 3, 4), x_prev, 0.0))
    np.testing.assert_array_equal(sol.x, x_prev)


def test_infeasible_reports_min_turnover(rng):
    v = random_cov(rng, 4)
    x_prev = np.array([0.3, 0.2, 0.5, 0.0])
    with pytest.raises(InfeasibleError) as info:
        solve_tracking_qp(QpProblem(v, np.full(4, 0.25), (0, 1), x_prev, 0.5))
    assert info.value.min_turnover == pytest.approx(1.0)
    # exactly the minimum is feasible
    sol = solve_tracking_qp(QpProblem(v, np.full(4, 0.25), (0, 1), x_prev, 1.0))
    check_feasible(sol, (0, 1), x_prev, 1.0)


def test_dimension_mismatch():
    with pytest.raises(DimensionError):
        solve_tracking_qp(QpProblem(np.eye(3), np.full(4, 0.25), (0, 1)))


@pytest.mark.parametrize("seed", range(12))
def test_three_stock_grid_oracle_daily_scale(seed):
    rng = np.random.default_rng(seed)
    v = random_cov(rng, 3, scale=1e-4)
    x_b, x_prev = rng.dirichlet(np.ones(3)), rng.dirichlet(np.ones(3))
    t = [0.1, 0.5, 2.0][seed % 3]
    sol = solve_tracking_qp(QpProblem(v, x_b, (0, 1, 2), x_prev, t))
    check_feasible(sol, (0, 1, 2), x_prev, t)
    grid, _ = simplex_grid_qp(v, x_b, x_prev, t)
    assert abs(sol.objective - grid) <= 1e-4
    assert sol.objective <= grid + 1e-15


@pytest.mark.parametrize("seed", range(12))
def test_three_stock_refined_grid_unit_scale(seed):
    rng = np.random.default_rng(100 + seed)
    v = random_cov(rng, 3)
    x_b, x_prev = rng.dirichlet(np.ones(3)), rng.dirichlet(np.ones(3))
    t = [0.1, 0.5, 2.0][seed % 3]
    sol = solve_tracking_qp(QpProblem(v, x_b, (0, 1, 2), x_prev, t))
    ref, _ = refined_grid_qp(v, x_b, x_prev, t)
    assert abs(sol.objective - ref) <= 1e-4
    assert sol.objective <= ref + 1e-12


@pytest.mark.parametrize("seed", range(8))
def test_kkt_stationarity(seed):
    rng = np.random.default_rng(200 + seed)
    n = 8
    v = random_cov(rng, n)
    x_b = rng.dirichlet(np.ones(n))
    support = tuple(sorted(rng.choice(n, 5, replace=False)))
    x_prev = np.zeros(n)
    x_prev[list(support)] = rng.dirichlet(np.ones(5))
    t = [0.05, 0.3, 1.0, 1.9][seed % 4]
    sol = solve_tracking_qp(QpProblem(v, x_b, support, x_prev, t))
    check_feasible(sol, support, x_prev, t)
    assert frank_wolfe_gap(v, x_b, sol.x, support, x_prev, t) <= 1e-6


def test_kkt_at_universe_scale():
    rng = np.random.default_rng(7)
    r = rng.normal(0, 0.02, size=(63, 81))
    v = covariance(r, 63)  # rank-deficient sample covariance plus ridge
    x_b = rng.dirichlet(np.ones(81))
    support = tuple(sorted(rng.choice(81, 20, replace=False)))
    x_prev = np.zeros(81)
    x_prev[list(support)] = 1 / 20
    sol = solve_tracking_qp(QpProblem(v, x_b, support, x_prev, 0.3))
    check_feasible(sol, support, x_prev, 0.3)
    assert frank_wolfe_gap(v, x_b, sol.x, support, x_prev, 0.3) <= 1e-6
    assert sol.converged


def test_turnover_relaxation_monotone(rng):
    for _ in range(10):
        n = 6
        v = random_cov(rng, n)
        x_b = rng.dirichlet(np.ones(n))
        x_prev = rng.dirichlet(np.ones(n))
        objs = [solve_tracking_qp(QpProblem(v, x_b, range(n), x_prev, t)).objective
                for t in (0.05, 0.2, 0.5, 1.0, 2.0)]
        assert all(b <= a + 1e-12 for a, b in zip(objs, objs[1:]))


def test_support_superset_dominates(rng):
    for _ in range(10):
        n = 7
        v = random_cov(rng, n)
        x_b = rng.dirichlet(np.ones(n))
        small = solve_tracking_qp(QpProblem(v, x_b, (0, 2, 4))).objective
        large = solve_tracking_qp(QpProblem(v, x_b, (0, 1, 2, 4, 5))).objective
        assert large <= small + 1e-12


def test_deterministic(rng):
    v = random_cov(rng, 5)
    p = QpProblem(v, rng.dirichlet(np.ones(5)), (0, 1, 3), rng.dirichlet(np.ones(5)), 1.2)
    a, b = solve_tracking_qp(p), solve_tracking_qp(p)
    np.testing.assert_array_equal(a.x, b.x)


def test_objective_zero_iff_on_benchmark(rng):
    v = random_cov(rng, 4)
    x_b = rng.dirichlet(np.ones(4))
    assert tracking_variance(x_b, x_b, v) == 0
    assert tracking_variance(x_b + [0.01, -0.01, 0, 0], x_b, v) > 0


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 6), st.floats(0.01, 2.5))
def test_solution_invariants(seed, n, t):
    rng = np.random.default_rng(seed)
    v = random_cov(rng, n, scale=rng.choice([1e-4, 1.0]))
    x_b = rng.dirichlet(np.ones(n))
    k = int(rng.integers(1, n + 1))
    support = tuple(sorted(rng.choice(n, k, replace=False)))
    x_prev = np.zeros(n)
    x_prev[list(support)] = rng.dirichlet(np.ones(k))
    sol = solve_tracking_qp(QpProblem(v, x_b, support, x_prev, t))
    check_feasible(sol, support, x_prev, t)
    assert sol.objective >= 0
    # no worse than staying put, which is always feasible
    assert sol.objective <= tracking_variance(x_prev, x_b, v) + 1e-12
