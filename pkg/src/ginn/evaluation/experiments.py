"""Dataset assembly, the lambda sweep and the simulated persistence study."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..garch import GarchVariant, rolling_backtest
from ..market_data import ReturnSeries, windows
from ..mean_model import VarianceSeries, ground_truth_series
from ..neural import GinnDataset, LossSpec, NetworkConfig, TrainConfig, fit_model
from ..simulator import SimulationSpec, simulate_garch
from .metrics import EvaluationReport, align, evaluate

log = logging.getLogger(__name__)

HIGH_PERSISTENCE = 0.9


def paper_lambda_grid() -> list[float]:
    """0.01 steps on [0, 0.2], then 0.05 steps up to 1."""
    fine = [round(0.01 * k, 2) for k in range(21)]
    coarse = [round(0.2 + 0.05 * k, 2) for k in range(1, 17)]
    return fine + coarse


def persistence_label(pi: float) -> str:
    return "high" if round(pi, 12) >= HIGH_PERSISTENCE else "low"


def build_dataset(ground_truth: VarianceSeries, garch: VarianceSeries, window_len: int = 90) -> GinnDataset:
    """Pair each day's trailing ground-truth window with its targets.

    Days without a GARCH forecast (skipped fits) are dropped.
    """
    X, dates = windows(ground_truth, window_len)
    y = ground_truth.values[window_len:]
    common, ia, ib = np.intersect1d(dates, garch.dates, assume_unique=True, return_indices=True)
    order = np.argsort(ia)
    ia, ib = ia[order], ib[order]
    return GinnDataset(dates[ia], X[ia], y[ia], garch.values[ib])


def split_dataset(ds: GinnDataset, boundary) -> tuple[GinnDataset, GinnDataset]:
    b = np.datetime64(boundary, "D")
    before = ds.dates < b
    if before.all() or not before.any():
        raise ValueError(f"split boundary {b} leaves an empty train or test set")
    return ds.subset(before), ds.subset(~before)


def fraction_boundary(dates: np.ndarray, fraction: float) -> np.datetime64:
    if len(dates) < 2:
        raise ValueError("need at least 2 dated samples to place a split boundary")
    k = int(round(fraction * len(dates)))
    k = min(max(k, 1), len(dates) - 1)
    return dates[k]


@dataclass
class Prepared:
    returns: ReturnSeries
    ground_truth: VarianceSeries
    garch: VarianceSeries
    skipped: list = field(default_factory=list)

    def dataset(self, window_len: int = 90) -> GinnDataset:
        return build_dataset(self.ground_truth, self.garch, window_len)


def prepare(returns: ReturnSeries, window_len: int = 90, refit_every: int = 1,
            residual_source: str = "demeaned") -> Prepared:
    gt = ground_truth_series(returns, window_len)
    bt = rolling_backtest(returns, GarchVariant.GARCH, window_len, refit_every=refit_every,
                          residual_source=residual_source)
    return Prepared(returns, gt, bt.forecasts, bt.skipped)


@dataclass
class SweepResult:
    rows: list  # (lam, seed, EvaluationReport)

    def summary(self) -> dict:
        out = {}
        for lam in sorted({r[0] for r in self.rows}):
            reps = [r[2] for r in self.rows if r[0] == lam]
            out[lam] = {
                "mean": {k: float(np.mean([getattr(x, k) for x in reps])) for k in ("r2", "mse", "mae")},
                "best": {"r2": max(x.r2 for x in reps), "mse": min(x.mse for x in reps),
                         "mae": min(x.mae for x in reps)},
                "runs": len(reps),
            }
        return out

    def select(self) -> float:
        """Best mean test R^2; ties broken by the best single-run R^2."""
        s = self.summary()
        return max(s, key=lambda lam: (s[lam]["mean"]["r2"], s[lam]["best"]["r2"]))

    def write_csv(self, path) -> None:
        with Path(path).open("w", encoding="utf-8", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["lambda", "seed", "r2", "mse", "mae"])
            for lam, seed, rep in self.rows:
                w.writerow([repr(float(lam)), seed, repr(rep.r2), repr(rep.mse), repr(rep.mae)])


def lambda_sweep(train: GinnDataset, test: GinnDataset, lambdas, seeds, *,
                 net_config: NetworkConfig, epochs: int = 300,
                 train_config: TrainConfig | None = None, truth: VarianceSeries | None = None) -> SweepResult:
    """Train one network per (lambda, seed) and score it on the held-out days.

    Scores are against the test ground truth unless ``truth`` is given.
    """
    rows = []
    for lam in lambdas:
        spec = LossSpec(float(lam))
        for seed in seeds:
            model = fit_model(train, spec, net_config, epochs=epochs, seed=seed, train_config=train_config)
            pred = VarianceSeries(test.dates, model.predict(test.windows))
            ref = truth if truth is not None else VarianceSeries(test.dates, test.sigma2_true)
            t, p = align(ref, pred)
            rows.append((float(lam), seed, evaluate(f"ginn(lambda={lam})", t, p)))
            log.info("lambda=%s seed=%s r2=%.4f", lam, seed, rows[-1][2].r2)
    return SweepResult(rows)


@dataclass(frozen=True)
class PersistenceRow:
    pi: float
    alpha: float
    beta: float
    label: str
    model: str
    seed: int | None
    report: EvaluationReport


def persistence_experiment(grid: list[SimulationSpec], seeds, *, net_config: NetworkConfig,
                           lam: float = 0.01, epochs: int = 300, window_len: int = 90,
                           train_fraction: float = 0.7, refit_every: int = 1,
                           train_config: TrainConfig | None = None) -> list[PersistenceRow]:
    """Score GARCH and GINN forecasts against the simulator's true variance.

    Each grid cell also gets a constant forecast at the unconditional
    variance as a reference row.
    """
    rows = []
    for spec in grid:
        pi = spec.persistence
        label = persistence_label(pi)
        returns, true_var = simulate_garch(spec)
        prep = prepare(returns, window_len, refit_every)
        ds = prep.dataset(window_len)
        train, test = split_dataset(ds, fraction_boundary(ds.dates, train_fraction))
        truth = true_var.select(np.isin(true_var.dates, test.dates))

        def add(model, seed, pred):
            t, p = align(truth, pred)
            rows.append(PersistenceRow(pi, spec.alpha, spec.beta, label, model, seed, evaluate(model, t, p)))

        add("garch", None, VarianceSeries(test.dates, test.sigma2_garch))
        add("constant", None, VarianceSeries(test.dates, np.full(len(test), spec.unconditional_variance)))
        for seed in seeds:
            model = fit_model(train, LossSpec(lam), net_config, epochs=epochs, seed=seed, train_config=train_config)
            add("ginn", seed, VarianceSeries(test.dates, model.predict(test.windows)))
    return rows


def write_persistence_csv(rows: list[PersistenceRow], path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["pi", "alpha", "beta", "persistence", "model", "seed", "r2", "mse", "mae", "n"])
        for r in rows:
            w.writerow([repr(round(r.pi, 12)), repr(r.alpha), repr(r.beta), r.label, r.model,
                        "" if r.seed is None else r.seed, repr(r.report.r2), repr(r.report.mse),
                        repr(r.report.mae), r.report.n])
