"""Pairwise correlation for clustering and trailing-window covariance for the tracking QP."""

import numpy as np

from indexfund.errors import DegenerateInputError, InsufficientDataError

RIDGE_SCALE = 1e-8


def _matrix(returns):
    return np.asarray(getattr(returns, "returns", returns), dtype=float)


def _names(returns, n):
    return getattr(returns, "tickers", None) or tuple(str(i) for i in range(n))


def correlation(returns):
    """Sample Pearson correlation matrix with exactly unit diagonal."""
    r = _matrix(returns)
    if r.shape[0] < 2:
        raise InsufficientDataError("correlation needs at least 2 return rows",
                                    module="similarity")
    d = r - r.mean(axis=0)
    ss = np.einsum("ti,ti->i", d, d)
    zero = np.flatnonzero((np.ptp(r, axis=0) == 0.0) | (ss == 0.0))
    if len(zero):
        names = _names(returns, r.shape[1])
        raise DegenerateInputError(f"zero return variance for stock {names[zero[0]]!r}")
    z = d / np.sqrt(ss)
    rho = z.T @ z
    rho = np.clip(0.5 * (rho + rho.T), -1.0, 1.0)
    np.fill_diagonal(rho, 1.0)
    return rho


def covariance(returns, window=None, ridge_scale=RIDGE_SCALE):
    """Sample covariance (n-1 divisor) of the trailing `window` rows plus a trace ridge.

    The ridge is `ridge_scale * trace / n` added to the diagonal so the
    tracking QP stays strictly convex when window < n.
    """
    r = _matrix(returns)
    if window is None:
        window = r.shape[0]
    if window < 2:
        raise InsufficientDataError(f"covariance window must be >= 2, got {window}",
                                    module="similarity")
    if window > r.shape[0]:
        raise InsufficientDataError(f"covariance window {window} exceeds the "
                                    f"{r.shape[0]} available rows", module="similarity")
    d = r[-window:] - r[-window:].mean(axis=0)
    v = d.T @ d / (window - 1)
    v = 0.5 * (v + v.T)
    n = v.shape[0]
    v[np.diag_indices(n)] += ridge_scale * np.trace(v) / n
    return v
