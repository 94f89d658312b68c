"""VaR-constrained discrete-time allocation policies under fitted return models."""

from . import backtest, dists, fit, gof, marketdata, policy
from .errors import VarpolError

__all__ = ["backtest", "dists", "fit", "gof", "marketdata", "policy", "VarpolError"]
__version__ = "0.1.0"
