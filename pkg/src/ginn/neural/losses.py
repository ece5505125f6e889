"""The GARCH-regularised training loss and variance scaling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class LossSpec:
    lam: float = 0.01

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lambda must be in [0, 1], got {self.lam}")


def _aligned(*arrays):
    out = [np.atleast_1d(np.asarray(a, dtype=np.float64)) for a in arrays]
    if len({a.shape for a in out}) != 1:
        raise ValueError(f"length mismatch: {[a.shape for a in out]}")
    return out


def ginn_loss(sigma2_true, sigma2_garch, sigma2_pred, spec: LossSpec | float) -> float:
    """lam * MSE(true, pred) + (1 - lam) * MSE(garch, pred).

    ``lam = 0`` trains purely towards the GARCH forecasts, ``lam = 1`` is
    plain supervised MSE.
    """
    lam = spec.lam if isinstance(spec, LossSpec) else LossSpec(spec).lam
    y, g, p = _aligned(sigma2_true, sigma2_garch, sigma2_pred)
    return lam * float(np.mean((y - p) ** 2)) + (1.0 - lam) * float(np.mean((g - p) ** 2))


def ginn_loss_grad(sigma2_true, sigma2_garch, sigma2_pred, spec: LossSpec | float):
    """Loss value and its gradient with respect to ``sigma2_pred``."""
    lam = spec.lam if isinstance(spec, LossSpec) else LossSpec(spec).lam
    y, g, p = _aligned(sigma2_true, sigma2_garch, sigma2_pred)
    n = p.size
    loss = lam * float(np.mean((y - p) ** 2)) + (1.0 - lam) * float(np.mean((g - p) ** 2))
    grad = (2.0 / n) * (lam * (p - y) + (1.0 - lam) * (p - g))
    return loss, grad


@dataclass(frozen=True)
class Standardizer:
    """Affine z-score of variances, fitted on training data only.

    ``log=True`` scores ``log(sigma2 + delta)`` instead of ``sigma2``.
    Inverse outputs are clamped at zero.
    """

    center: float
    scale: float
    log: bool = False
    delta: float = 1e-12

    @classmethod
    def fit(cls, train_variances, log: bool = False, delta: float = 1e-12) -> "Standardizer":
        v = np.asarray(train_variances, dtype=np.float64)
        if v.size == 0:
            raise ValueError("cannot fit normalisation on an empty training set")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ValueError("training variances must be finite and non-negative")
        z = np.log(v + delta) if log else v
        sd = float(z.std())
        if not sd > 0:
            raise ValueError("degenerate training variances (zero spread)")
        return cls(float(z.mean()), sd, log, delta)

    def transform(self, sigma2):
        v = np.asarray(sigma2, dtype=np.float64)
        if self.log:
            v = np.log(v + self.delta)
        return (v - self.center) / self.scale

    def inverse(self, z):
        v = np.asarray(z, dtype=np.float64) * self.scale + self.center
        if self.log:
            v = np.exp(v) - self.delta
        return np.maximum(v, 0.0)

    def to_dict(self) -> dict:
        return {"center": self.center, "scale": self.scale, "log": self.log, "delta": self.delta}


def normalize_targets(train_variances, log: bool = False):
    """Fit on ``train_variances``; returns ``(transform, inverse_transform)``."""
    s = Standardizer.fit(train_variances, log)
    return s.transform, s.inverse
