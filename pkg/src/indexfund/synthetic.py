"""Seeded one-factor market for running the pipeline without external data.

    r_it = beta_i * F_t + eps_it,   F_t ~ N(0, factor_vol^2),  eps_it ~ N(0, sigma_i^2)

Prices start between 20 and 200 and compound the returns; shares
outstanding start log-normally dispersed and drift by a small random step
once per quarter (63 trading days).
"""

import numpy as np
import pandas as pd

from indexfund.data import PricePanel
from indexfund.errors import ValidationError

START = "2014-01-02"
FACTOR_VOL = 0.01
IDIO_VOL = (0.008, 0.02)
BETA = (0.5, 1.5)
QUARTER = 63


def generate_synthetic(n, days, seed, factor_vol=FACTOR_VOL, idio_scale=1.0):
    """Price panel of `days` business dates for `n` synthetic tickers S000, S001, ..."""
    if n < 2:
        raise ValidationError(f"synthetic universe needs n >= 2, got {n}", module="cli")
    if days < 100:
        raise ValidationError(f"synthetic history needs days >= 100, got {days}", module="cli")
    rng = np.random.default_rng(seed)
    beta = rng.uniform(*BETA, size=n)
    sigma = rng.uniform(*IDIO_VOL, size=n) * idio_scale
    factor = rng.normal(0.0, 1.0, size=days - 1) * factor_vol
    noise = rng.normal(0.0, 1.0, size=(days - 1, n)) * sigma
    rets = factor[:, None] * beta + noise
    # keep every simple return above -1
    rets = np.maximum(rets, -0.5)

    p0 = rng.uniform(20.0, 200.0, size=n)
    prices = np.vstack([p0, p0 * np.cumprod(1.0 + rets, axis=0)])

    base = np.exp(rng.normal(np.log(5e8), 1.0, size=n))
    quarters = (days + QUARTER - 1) // QUARTER
    steps = np.exp(np.cumsum(rng.normal(0.0, 0.02, size=(quarters, n)), axis=0))
    steps[0] = 1.0
    shares = np.round(base * np.repeat(steps, QUARTER, axis=0)[:days])

    dates = pd.bdate_range(START, periods=days)
    tickers = tuple(f"S{i:03d}" for i in range(n))
    return PricePanel(dates, tickers, prices, shares)
