"""Rolling AR(1) mean forecasts and the ground-truth variance target."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .market_data import DatedSeries, ReturnSeries, windows


class VarianceSeries(DatedSeries):
    def __post_init__(self):
        super().__post_init__()
        if np.any(self.values < 0) or np.isnan(self.values).any():
            raise ValueError("variances must be non-negative")


@dataclass(frozen=True)
class ARModel:
    intercept: float
    coefficient: float
    degenerate: bool = False  # fitted by the constant-mean fallback

    def __post_init__(self):
        if not (math.isfinite(self.intercept) and math.isfinite(self.coefficient)):
            raise ValueError("AR coefficients must be finite")


def fit_ar(window) -> ARModel:
    """Least-squares fit of r_k = c + phi * r_{k-1} over consecutive pairs.

    A window whose lagged regressor has no spread falls back to the
    constant-mean model ``ARModel(mean, 0, degenerate=True)``.
    """
    w = np.asarray(window, dtype=np.float64)
    if w.ndim != 1 or w.size < 3:
        raise ValueError("AR window needs at least 3 observations")
    x, y = w[:-1], w[1:]
    xc = x - x.mean()
    sxx = float(xc @ xc)
    if sxx <= 1e-300 or np.ptp(x) == 0.0:
        return ARModel(float(w.mean()), 0.0, degenerate=True)
    phi = float(xc @ (y - y.mean())) / sxx
    return ARModel(float(y.mean() - phi * x.mean()), phi)


def predict_mean(model: ARModel, last_return: float) -> float:
    return model.intercept + model.coefficient * last_return


def realized_variance(r_t: float, mu_hat: float) -> float:
    return (r_t - mu_hat) ** 2


def ground_truth_series(series: ReturnSeries, window_len: int = 90) -> VarianceSeries:
    """(r_t - mu_hat_t)^2 for every day with a full trailing window."""
    X, target_dates = windows(series, window_len)
    r = series.values[window_len:]
    out = np.empty(len(r))
    for i, w in enumerate(X):
        mu = predict_mean(fit_ar(w), w[-1])
        out[i] = realized_variance(r[i], mu)
    return VarianceSeries(target_dates, out)
