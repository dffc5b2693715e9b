"""Small fitting helpers shared by the scaling and coupling experiments."""

from __future__ import annotations

import numpy as np


def fit_loglog_slope(x, y) -> tuple[float, float]:
    """Least-squares slope and intercept of log y against log x."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size != y.size or x.size < 2:
        raise ValueError("need at least two matching points for a slope fit")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("log-log fit needs positive data")
    slope, intercept = np.polyfit(np.log(x), np.log(y), 1)
    return float(slope), float(intercept)


def fit_exp_rate(t, y) -> tuple[float, float]:
    """Fit y ~ exp(intercept + rate * t); returns (rate, intercept)."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = y > 0
    if keep.sum() < 2:
        raise ValueError("need at least two positive points for a decay fit")
    rate, intercept = np.polyfit(t[keep], np.log(y[keep]), 1)
    return float(rate), float(intercept)


def moving_average(y, window: int = 5) -> np.ndarray:
    """Centered-origin trailing moving average (first points use shorter windows)."""
    y = np.asarray(y, dtype=float)
    out = np.empty_like(y)
    c = np.cumsum(np.insert(y, 0, 0.0))
    for i in range(y.size):
        lo = max(0, i - window + 1)
        out[i] = (c[i + 1] - c[lo]) / (i + 1 - lo)
    return out
