"""CSV ingestion of prices and shares outstanding, returns, market caps, train/test split."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np
import pandas as pd

from indexfund.errors import InsufficientDataError, ParseError, ValidationError

DEFAULT_TRAIN_FRACTION = 0.65


def format_float(v):
    return repr(float(v))


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PricePanel:
    dates: pd.DatetimeIndex
    tickers: tuple
    prices: np.ndarray
    shares: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "tickers", tuple(self.tickers))
        object.__setattr__(self, "prices", _frozen(self.prices))
        object.__setattr__(self, "shares", _frozen(self.shares))
        shape = (len(self.dates), len(self.tickers))
        if self.prices.shape != shape or self.shares.shape != shape:
            raise ValidationError(f"panel arrays must have shape {shape}")
        if not self.dates.is_monotonic_increasing or self.dates.has_duplicates:
            raise ValidationError("dates must be strictly increasing")
        if not np.all(np.isfinite(self.prices)) or np.any(self.prices <= 0):
            raise ValidationError("prices must be finite and strictly positive")
        if not np.all(np.isfinite(self.shares)) or np.any(self.shares <= 0):
            raise ValidationError("shares outstanding must be finite and strictly positive")

    @property
    def n(self):
        return len(self.tickers)

    def market_caps(self):
        return MarketCapPanel(self.dates, self.tickers, self.prices * self.shares)


@dataclass(frozen=True, eq=False)
class ReturnsPanel:
    dates: pd.DatetimeIndex
    tickers: tuple
    returns: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "tickers", tuple(self.tickers))
        object.__setattr__(self, "returns", _frozen(self.returns))
        if self.returns.shape != (len(self.dates), len(self.tickers)):
            raise ValidationError("returns array does not match dates x tickers")

    def __len__(self):
        return len(self.dates)

    @property
    def n(self):
        return len(self.tickers)

    def rows(self, start, stop):
        return ReturnsPanel(self.dates[start:stop], self.tickers, self.returns[start:stop])

    def frame(self):
        return pd.DataFrame(self.returns, index=self.dates, columns=list(self.tickers))


@dataclass(frozen=True, eq=False)
class MarketCapPanel:
    dates: pd.DatetimeIndex
    tickers: tuple
    caps: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "tickers", tuple(self.tickers))
        object.__setattr__(self, "caps", _frozen(self.caps))
        if self.caps.shape != (len(self.dates), len(self.tickers)):
            raise ValidationError("caps array does not match dates x tickers")
        if np.any(self.caps <= 0):
            raise ValidationError("market caps must be strictly positive")


def _read_table(path, kind):
    """Read a `date,<ticker>...` CSV into a float frame, locating any bad cell."""
    try:
        raw = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except FileNotFoundError:
        raise
    except (pd.errors.ParserError, UnicodeDecodeError) as exc:
        raise ParseError(f"{kind} CSV {path}: {exc}") from exc
    except pd.errors.EmptyDataError as exc:
        raise ParseError(f"{kind} CSV {path}: file is empty") from exc

    columns = [c.strip() for c in raw.columns]
    if not columns or columns[0].lower() != "date":
        raise ParseError(f"{kind} CSV {path}: row 1, column 1: header must start with 'date'")
    tickers = columns[1:]
    if not tickers:
        raise ParseError(f"{kind} CSV {path}: row 1: no ticker columns")
    if len(set(tickers)) != len(tickers):
        raise ParseError(f"{kind} CSV {path}: row 1: duplicate ticker columns")
    raw.columns = columns

    dates = pd.to_datetime(raw["date"].str.strip(), format="ISO8601", errors="coerce")
    bad = np.flatnonzero(dates.isna().to_numpy())
    if len(bad):
        # header is row 1, first data row is row 2
        raise ParseError(f"{kind} CSV {path}: row {bad[0] + 2}, column 'date': "
                         f"cannot parse date {raw['date'].iloc[bad[0]]!r}")

    # float() rounds correctly, so written panels reload bit-for-bit
    values = np.empty((len(raw), len(tickers)))
    for j, t in enumerate(tickers):
        for i, cell in enumerate(raw[t].str.strip()):
            try:
                values[i, j] = float(cell) if cell else np.nan
            except ValueError:
                raise ParseError(f"{kind} CSV {path}: row {i + 2}, column {t!r}: "
                                 f"not a number: {cell!r}") from None

    frame = pd.DataFrame(values, index=pd.DatetimeIndex(dates), columns=tickers)
    if frame.index.has_duplicates:
        dup = frame.index[frame.index.duplicated()][0]
        raise ParseError(f"{kind} CSV {path}: duplicate date {dup.date()}")
    return frame.sort_index()


def _check_positive(frame, kind, path):
    bad = frame.le(0) & frame.notna()
    if bad.to_numpy().any():
        date, ticker = bad.stack()[lambda s: s].index[0]
        raise ValidationError(f"{kind} CSV {path}: non-positive value at "
                              f"date {date.date()}, ticker {ticker!r}")


def load_panel(prices_path, shares_path):
    """Load and align the price and shares-outstanding CSVs.

    Dates with any missing price are dropped. Shares are forward-filled onto
    the price calendar from the latest prior observation; only the stub before
    the first observation is back-filled.
    """
    prices = _read_table(prices_path, "prices")
    shares = _read_table(shares_path, "shares")
    _check_positive(prices, "prices", prices_path)
    _check_positive(shares, "shares", shares_path)

    missing = [t for t in prices.columns if t not in shares.columns]
    if missing:
        raise ValidationError(f"shares CSV {shares_path} is missing tickers present in "
                              f"prices: {', '.join(missing)}")
    shares = shares[list(prices.columns)]

    prices = prices.dropna(how="any")
    if len(prices) < 3:
        raise InsufficientDataError(f"need at least 3 complete price dates, got {len(prices)}")

    aligned = shares.reindex(shares.index.union(prices.index)).ffill().bfill()
    aligned = aligned.reindex(prices.index)
    empty = aligned.columns[aligned.isna().any()]
    if len(empty):
        raise ValidationError(f"shares CSV {shares_path} has no observations for: "
                              f"{', '.join(empty)}")
    return PricePanel(prices.index, tuple(prices.columns),
                      prices.to_numpy(), aligned.to_numpy())


def write_panel(panel, prices_path, shares_path):
    """Write a panel as two CSVs that `load_panel` reads back exactly."""
    for path, values in ((prices_path, panel.prices), (shares_path, panel.shares)):
        frame = pd.DataFrame(values, index=panel.dates.strftime("%Y-%m-%d"),
                             columns=list(panel.tickers))
        frame.index.name = "date"
        tmp = f"{path}.tmp"
        frame.to_csv(tmp, float_format=format_float, lineterminator="\n")
        os.replace(tmp, path)


def compute_returns(panel):
    if len(panel.dates) < 2:
        raise InsufficientDataError("need at least 2 price dates to compute returns")
    p = panel.prices
    return ReturnsPanel(panel.dates[1:], panel.tickers, p[1:] / p[:-1] - 1.0)


def split_index(rows, train_fraction=DEFAULT_TRAIN_FRACTION):
    if not 0.0 < train_fraction < 1.0:
        raise ValidationError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    cut = math.floor(train_fraction * rows)
    if cut < 2 or rows - cut < 2:
        raise InsufficientDataError(f"split of {rows} rows at {train_fraction} leaves "
                                    f"{cut} train / {rows - cut} test rows; need >= 2 each")
    return cut


def split(returns, train_fraction=DEFAULT_TRAIN_FRACTION):
    """Chronological train/test split of the returns panel."""
    cut = split_index(len(returns), train_fraction)
    return returns.rows(0, cut), returns.rows(cut, len(returns))
