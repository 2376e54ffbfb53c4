"""Sparse index tracking: cluster a stock universe, weight the representatives, backtest."""

from indexfund.errors import IndexFundError

__version__ = "0.1.0"

__all__ = ["IndexFundError", "__version__"]
