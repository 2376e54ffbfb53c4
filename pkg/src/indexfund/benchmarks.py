"""Benchmark weights: equal weight, market-cap weight and trailing inverse volatility."""

import csv
from dataclasses import dataclass

import numpy as np
import pandas as pd

from indexfund.errors import BurnInError, DegenerateInputError, NoDataError, ValidationError

EQUAL = "equal"
MARKET_CAP = "market_cap"
INVERSE_VOL = "inverse_vol"
KINDS = (EQUAL, MARKET_CAP, INVERSE_VOL)


@dataclass(frozen=True)
class BenchmarkSpec:
    kind: str
    window: int = 63

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown benchmark {self.kind!r}; expected one of {KINDS}",
                                  module="benchmarks")
        if self.kind == INVERSE_VOL and self.window < 2:
            raise ValidationError("inverse-volatility window must be >= 2", module="benchmarks")


def equal_weight(n):
    if n < 1:
        raise ValidationError("need at least one stock", module="benchmarks")
    return np.full(n, 1.0 / n)


def resolve_row(dates, asof):
    """Index of the latest date on or before `asof`."""
    pos = dates.searchsorted(pd.Timestamp(asof), side="right") - 1
    if pos < 0:
        raise NoDataError(f"no data on or before {pd.Timestamp(asof).date()}")
    return int(pos)


def cap_weights(caps):
    caps = np.asarray(caps, dtype=float)
    return caps / caps.sum()


def market_cap_weight(caps, asof):
    """x_i = V_i / sum_j V_j with caps taken at the latest date <= asof."""
    return cap_weights(caps.caps[resolve_row(caps.dates, asof)])


def inverse_vol_weight(returns, asof, window):
    """Weights proportional to 1/sigma over the `window` rows strictly before asof."""
    if window < 2:
        raise ValidationError("inverse-volatility window must be >= 2", module="benchmarks")
    end = int(returns.dates.searchsorted(pd.Timestamp(asof), side="left"))
    if end < window:
        raise BurnInError(f"inverse volatility at {pd.Timestamp(asof).date()} needs {window} "
                          f"prior return rows for burn-in, only {end} available")
    sigma = returns.returns[end - window:end].std(axis=0, ddof=1)
    zero = np.flatnonzero(sigma == 0.0)
    if len(zero):
        raise DegenerateInputError(f"zero volatility for stock {returns.tickers[zero[0]]!r}",
                                   module="benchmarks")
    inv = 1.0 / sigma
    return inv / inv.sum()


def benchmark_weight(spec, returns, caps, asof, info_date):
    """Dispatch on `spec.kind`; caps resolve at `info_date`, volatility uses rows before `asof`."""
    if spec.kind == EQUAL:
        return equal_weight(len(returns.tickers))
    if spec.kind == MARKET_CAP:
        return market_cap_weight(caps, info_date)
    return inverse_vol_weight(returns, asof, spec.window)


def write_weights(weights, tickers, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["ticker", "weight"])
        for t, x in zip(tickers, weights):
            w.writerow([t, repr(float(x))])
