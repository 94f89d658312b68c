"""Empirical CDF and one-sample Kolmogorov-Smirnov tests against any model."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptySample, UnsupportedLevel

# asymptotic two-sided KS constants c(level); the critical value is c/sqrt(n)
KS_CONSTANTS = {0.10: 1.224, 0.05: 1.358, 0.01: 1.628}


@dataclass(frozen=True)
class KsResult:
    d_stat: float
    n: int
    critical: float
    level: float = 0.05
    family: str = ""
    n_params: int = 0

    @property
    def reject(self) -> bool:
        return self.d_stat > self.critical

    def row(self) -> dict:
        return {"family": self.family, "n_params": self.n_params, "D": self.d_stat, "critical": self.critical, "reject": self.reject}


def _nonempty(sample) -> np.ndarray:
    arr = np.asarray(getattr(sample, "values", sample), dtype=float).ravel()
    if arr.size == 0:
        raise EmptySample("sample is empty")
    return arr


def ecdf_eval(sample, x):
    """Fraction of the sample at or below ``x``."""
    arr = np.sort(_nonempty(sample))
    counts = np.searchsorted(arr, np.asarray(x, dtype=float), side="right")
    out = counts / arr.size
    return float(out) if np.ndim(out) == 0 else out


def ks_critical(n: int, level: float = 0.05) -> float:
    if n < 1:
        raise EmptySample("critical value needs n >= 1")
    for key, c in KS_CONSTANTS.items():
        if math.isclose(level, key):
            return c / math.sqrt(n)
    raise UnsupportedLevel(f"level {level!r} not in {sorted(KS_CONSTANTS)}")


def ks_statistic(sample, model, level: float = 0.05) -> KsResult:
    """Exact sup distance between the ECDF and ``model.cdf``.

    For a continuous CDF the supremum is attained at a sample point, from
    one side or the other, so only the ``2n`` one-sided gaps are checked.
    """
    x = np.sort(_nonempty(sample))
    n = x.size
    F = np.asarray(model.cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    d = float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))
    d = min(max(d, 0.0), 1.0)
    return KsResult(d, n, ks_critical(n, level), level, getattr(model, "family", ""), getattr(model, "n_params", 0))


def compare_models(sample, models, level: float = 0.05, transform=None) -> list[KsResult]:
    """KS results for every model, ordered by ascending D.

    ``transform(values, family)`` may map the sample onto a model's support
    before testing (positive-support families see the same subsample they
    were fitted on).
    """
    models = list(models)
    if not models:
        raise ValueError("compare_models needs at least one model")
    arr = _nonempty(sample)
    results = []
    for m in models:
        s = arr if transform is None else transform(arr, m.family)
        results.append(ks_statistic(s, m, level))
    return rank_results(results)


def rank_results(results) -> list[KsResult]:
    return sorted(results, key=lambda r: r.d_stat)
