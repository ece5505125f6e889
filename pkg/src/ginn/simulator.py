"""Synthetic GARCH(1,1) return series with known conditional variances.

Normal draws come from ``numpy.random.Generator(PCG64(seed))`` via
``standard_normal`` (numpy's ziggurat sampler), so a given seed reproduces
the same series on any platform running the same numpy major version.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .market_data import ReturnSeries
from .mean_model import VarianceSeries

EPOCH = np.datetime64("1970-01-01", "D")


@dataclass(frozen=True)
class SimulationSpec:
    alpha0: float
    alpha: float
    beta: float
    length: int
    burn_in: int = 500
    seed: int = 0

    def __post_init__(self):
        if not self.alpha0 > 0:
            raise ValueError("alpha0 must be positive")
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be non-negative")
        if not self.alpha + self.beta < 1:
            raise ValueError(f"alpha + beta = {self.alpha + self.beta} is not < 1")
        if self.length < 1 or self.burn_in < 0:
            raise ValueError("length must be positive and burn_in non-negative")

    @property
    def persistence(self) -> float:
        return self.alpha + self.beta

    @property
    def unconditional_variance(self) -> float:
        return self.alpha0 / (1.0 - self.alpha - self.beta)


def synthetic_dates(n: int) -> np.ndarray:
    return EPOCH + np.arange(n)


def simulate_garch(spec: SimulationSpec):
    """Returns ``(returns, true_variance)``; epsilon_t = sigma_t * e_t with zero mean."""
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    n = spec.burn_in + spec.length
    z = rng.standard_normal(n)
    eps = np.empty(n)
    s2 = np.empty(n)
    a0, a, b = spec.alpha0, spec.alpha, spec.beta
    var = spec.unconditional_variance
    for t in range(n):
        s2[t] = var
        eps[t] = np.sqrt(var) * z[t]
        var = a0 + a * (eps[t] * eps[t]) + b * var
    dates = synthetic_dates(spec.length)
    return (ReturnSeries(dates, eps[spec.burn_in:]),
            VarianceSeries(dates, s2[spec.burn_in:]))


def persistence_grid(alphas, betas, length: int, seed_base: int = 0, *, alpha0: float | None = None,
                     burn_in: int = 500) -> list[SimulationSpec]:
    """Cartesian (alpha, beta) grid; cell i gets seed ``seed_base + i``.

    ``alpha0`` defaults to ``1 - alpha - beta`` so every cell has unit
    unconditional variance.
    """
    specs = []
    for i, (a, b) in enumerate(itertools.product(alphas, betas)):
        if not a + b < 1:
            raise ValueError(f"infeasible grid cell alpha={a}, beta={b}")
        a0 = alpha0 if alpha0 is not None else 1.0 - a - b
        specs.append(SimulationSpec(a0, a, b, length, burn_in, seed_base + i))
    return specs
