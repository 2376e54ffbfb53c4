"""Rebalancing backtest of tracking portfolios against the benchmarks.

Timeline convention: return row t is the move from close t-1 to close t. A
rebalance dated d sets weights from information up to close d-1 (returns
before d, caps at the prior price date) and those weights earn the returns
of d and every later day until the next rebalance. Portfolio and benchmark
weights are both held fixed between rebalances.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from indexfund import clustering
from indexfund.benchmarks import INVERSE_VOL, BenchmarkSpec, benchmark_weight
from indexfund.errors import (DimensionError, InfeasibleError, InsufficientDataError,
                              ValidationError)
from indexfund.heuristic import cluster_cap_weights
from indexfund.qp import QpProblem, solve_tracking_qp, turnover
from indexfund.similarity import correlation, covariance

log = logging.getLogger(__name__)

TRADING_DAYS = 252
QUARTERLY = "quarterly"
SEMIANNUAL = "semiannual"
ANNUAL = "annual"
PERIODS = {QUARTERLY: 63, SEMIANNUAL: 126, ANNUAL: 252}

HEURISTIC = "heuristic"
QP = "qp"
METHODS = (HEURISTIC, QP)


@dataclass(frozen=True)
class RebalanceSchedule:
    frequency: str
    dates: pd.DatetimeIndex
    offsets: tuple

    @property
    def period(self):
        return PERIODS[self.frequency]


@dataclass
class CellResult:
    benchmark: str
    method: str
    k: int
    frequency: str
    rebalance_dates: pd.DatetimeIndex
    weights: np.ndarray
    benchmark_weights: np.ndarray
    turnover_series: list
    ex_ante: np.ndarray
    daily_diffs: pd.Series
    tracking_error: float
    realized_tracking_error: float
    selected: tuple = field(default=())

    @property
    def mean_turnover(self):
        vals = [t for t in self.turnover_series if t is not None]
        return float(np.mean(vals)) if vals else math.nan

    @property
    def key(self):
        return (self.benchmark, self.method, self.k, self.frequency)


def build_schedule(test_dates, frequency, burn_in=0):
    """Rebalance on the first day of each full period of the test window.

    Periods are fixed trading-day strides starting after `burn_in` days; a
    trailing partial period keeps the last weights instead of rebalancing.
    """
    if frequency not in PERIODS:
        raise ValidationError(f"unknown frequency {frequency!r}; expected one of "
                              f"{tuple(PERIODS)}", module="backtest")
    stride = PERIODS[frequency]
    total = len(test_dates)
    offsets = tuple(range(burn_in, total - stride + 1, stride))
    if not offsets:
        raise InsufficientDataError(
            f"test window of {total} days cannot hold a {burn_in}-day burn-in plus one "
            f"{stride}-day {frequency} period", module="backtest")
    return RebalanceSchedule(frequency, pd.DatetimeIndex(test_dates)[list(offsets)], offsets)


def tracking_error_heuristic(daily_diffs):
    """Annualized sample standard deviation of daily return differences."""
    d = np.asarray(daily_diffs, dtype=float)
    if d.size < 2:
        raise InsufficientDataError("tracking error needs at least 2 daily differences",
                                    module="backtest")
    return float(d.std(ddof=1) * math.sqrt(TRADING_DAYS))


def tracking_error_optimization(x, x_b, v):
    """Annualized ex-ante tracking error sqrt((x - x_b)' V (x - x_b))."""
    x = np.asarray(x, dtype=float)
    x_b = np.asarray(x_b, dtype=float)
    v = np.asarray(v, dtype=float)
    if x.shape != x_b.shape or v.shape != (x.size, x.size):
        raise DimensionError(f"shapes {x.shape}, {x_b.shape}, {v.shape} do not agree",
                             module="backtest")
    d = x - x_b
    return math.sqrt(max(float(d @ v @ d), 0.0) * TRADING_DAYS)


def _prior_cap_date(caps, date):
    pos = int(caps.dates.searchsorted(date, side="left")) - 1
    if pos < 0:
        raise InsufficientDataError(f"no market caps before {date.date()}", module="backtest")
    return caps.dates[pos]


def run_cell(returns, caps, benchmark, method, solution, schedule, turnover_bound=1.0,
             recluster_window=None):
    """Backtest one (benchmark, method, k, frequency) cell.

    `solution` is the clustering from the training window. With
    `recluster_window` set, the clustering is recomputed at every rebalance
    on that many trailing return rows instead.
    """
    if method not in METHODS:
        raise ValidationError(f"unknown method {method!r}; expected one of {METHODS}",
                              module="backtest")
    if isinstance(benchmark, str):
        benchmark = BenchmarkSpec(benchmark, schedule.period)
    window = schedule.period
    r = returns.returns
    n = returns.n
    positions = [int(returns.dates.get_loc(d)) for d in schedule.dates]

    weights, bench_weights, ex_ante, turns = [], [], [], []
    prev = None
    for pos, date in zip(positions, schedule.dates):
        info_date = _prior_cap_date(caps, date)
        x_b = benchmark_weight(benchmark, returns, caps, date, info_date)
        sol = solution
        if recluster_window is not None:
            if pos < recluster_window:
                raise InsufficientDataError(f"re-clustering at {date.date()} needs "
                                            f"{recluster_window} prior rows", module="backtest")
            rho = correlation(r[pos - recluster_window:pos])
            sol = clustering.select(rho, solution.k)
        v = covariance(r[:pos], window)
        if method == HEURISTIC:
            x = cluster_cap_weights(sol, caps, info_date)
        else:
            bound = turnover_bound if prev is not None else None
            try:
                x = solve_tracking_qp(QpProblem(v, x_b, sol.selected, prev, bound)).x
            except InfeasibleError as exc:
                # a re-clustered support can sit further away than the bound allows;
                # spend the least turnover that reaches it
                log.warning("%s: raising turnover bound to %.6g to reach the new support",
                            date.date(), exc.min_turnover)
                x = solve_tracking_qp(QpProblem(v, x_b, sol.selected, prev,
                                                exc.min_turnover)).x
        turns.append(None if prev is None else turnover(x, prev))
        ex_ante.append(tracking_error_optimization(x, x_b, v))
        weights.append(x)
        bench_weights.append(x_b)
        prev = x

    bounds = positions + [len(returns)]
    diffs = np.concatenate([r[a:b] @ (x - x_b) for a, b, x, x_b
                            in zip(bounds[:-1], bounds[1:], weights, bench_weights)])
    diff_series = pd.Series(diffs, index=returns.dates[positions[0]:], name="diff")
    realized = tracking_error_heuristic(diffs)
    ex_ante = np.array(ex_ante)
    te = realized if method == HEURISTIC else float(ex_ante.mean())
    return CellResult(benchmark.kind, method, solution.k, schedule.frequency,
                      schedule.dates, np.array(weights), np.array(bench_weights), turns,
                      ex_ante, diff_series, te, realized, tuple(solution.selected))


def burn_in_for(benchmark, frequency):
    return PERIODS[frequency] if benchmark == INVERSE_VOL else 0


def run_grid(returns, caps, train_rows, k_values, frequencies, benchmarks, methods,
             turnover_bound=1.0, recluster=False, solutions=None, executor=None):
    """Run every (benchmark, method, k, frequency) cell.

    Stocks are clustered once per k on the first `train_rows` return rows;
    the test window is everything after. Returns (cells, solutions) with
    cells ordered benchmark, method, k, frequency as given.
    """
    if solutions is None:
        rho = correlation(returns.returns[:train_rows])
        solutions = {k: clustering.select(rho, k) for k in k_values}
    test_dates = returns.dates[train_rows:]
    jobs = []
    for bench in benchmarks:
        for method in methods:
            for k in k_values:
                for freq in frequencies:
                    sched = build_schedule(test_dates, freq, burn_in_for(bench, freq))
                    jobs.append((returns, caps, BenchmarkSpec(bench, PERIODS[freq]), method,
                                 solutions[k], sched, turnover_bound,
                                 train_rows if recluster else None))
    if executor is None:
        cells = [run_cell(*job) for job in jobs]
    else:
        cells = list(executor.map(_run_job, jobs))
    return cells, solutions


def _run_job(job):
    return run_cell(*job)
