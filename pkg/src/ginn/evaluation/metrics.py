"""R^2, MSE and MAE over date-aligned variance series."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from ..market_data import DatedSeries


class AlignmentError(ValueError):
    pass


@dataclass(frozen=True)
class EvaluationReport:
    model: str
    r2: float
    mse: float
    mae: float
    n: int

    def __post_init__(self):
        if self.n < 1 or self.mse < 0 or self.mae < 0 or self.r2 > 1 + 1e-12:
            raise ValueError(f"inconsistent report {self}")

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def _values(truth, pred):
    if isinstance(truth, DatedSeries) or isinstance(pred, DatedSeries):
        if not (isinstance(truth, DatedSeries) and isinstance(pred, DatedSeries)):
            raise AlignmentError("pass two dated series or two arrays")
        if not np.array_equal(truth.dates, pred.dates):
            raise AlignmentError("truth and prediction dates differ")
        return truth.values, pred.values
    y = np.asarray(truth, dtype=np.float64)
    p = np.asarray(pred, dtype=np.float64)
    if y.shape != p.shape or y.ndim != 1:
        raise AlignmentError(f"shape mismatch {y.shape} vs {p.shape}")
    return y, p


def align(truth: DatedSeries, pred: DatedSeries):
    """Restrict both series to their common dates."""
    common, ti, pi = np.intersect1d(truth.dates, pred.dates, assume_unique=True, return_indices=True)
    if common.size == 0:
        raise AlignmentError("no overlapping dates")
    return truth.select(np.sort(ti)), pred.select(np.sort(pi))


def r_squared(truth, pred) -> float:
    """1 - SS_res / SS_tot with the truth mean over the scored range as baseline."""
    y, p = _values(truth, pred)
    if y.size < 2:
        raise ValueError("R^2 needs at least 2 points")
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        raise ValueError("R^2 undefined for constant truth")
    return 1.0 - float(np.sum((y - p) ** 2)) / ss_tot


def mse(truth, pred) -> float:
    y, p = _values(truth, pred)
    if y.size < 1:
        raise ValueError("empty series")
    return float(np.mean((y - p) ** 2))


def mae(truth, pred) -> float:
    y, p = _values(truth, pred)
    if y.size < 1:
        raise ValueError("empty series")
    return float(np.mean(np.abs(y - p)))


def evaluate(model: str, truth, pred) -> EvaluationReport:
    y, p = _values(truth, pred)
    r2 = r_squared(y, p) if y.size >= 2 and np.ptp(y) > 0 else math.nan
    return EvaluationReport(model, r2, mse(y, p), mae(y, p), int(y.size))
