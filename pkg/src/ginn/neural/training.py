"""Mini-batch BPTT training, rolling prediction and JSON checkpoints."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..market_data import DatedSeries, windows as rolling_windows
from ..mean_model import VarianceSeries
from .losses import Standardizer, LossSpec, ginn_loss_grad
from .network import LstmNetwork, NetworkConfig
from .optim import OptimizerState, adamw_step

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "ginn-checkpoint/1"


class TrainingError(RuntimeError):
    def __init__(self, message, last_finite_epoch: int | None = None, losses=None):
        super().__init__(message)
        self.last_finite_epoch = last_finite_epoch
        self.losses = list(losses or [])


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 300
    batch_size: int = 64
    learning_rate: float = 1e-3
    betas: tuple[float, float] = (0.9, 0.999)
    weight_decay: float = 1e-2
    eps: float = 1e-8

    def optimizer(self) -> OptimizerState:
        return OptimizerState(self.learning_rate, tuple(self.betas), self.weight_decay, self.eps)


@dataclass
class GinnDataset:
    """Rolling samples in variance units: the prior ``W`` ground-truth
    variances, the day's ground-truth variance and the GARCH forecast."""

    dates: np.ndarray
    windows: np.ndarray
    sigma2_true: np.ndarray
    sigma2_garch: np.ndarray

    def __post_init__(self):
        n = len(self.dates)
        if not (self.windows.shape[0] == self.sigma2_true.size == self.sigma2_garch.size == n):
            raise ValueError("dataset arrays are not aligned")

    def __len__(self):
        return len(self.dates)

    def subset(self, mask) -> "GinnDataset":
        return GinnDataset(self.dates[mask], self.windows[mask], self.sigma2_true[mask], self.sigma2_garch[mask])


def _seed_streams(seed: int):
    init, shuffle, dropout = np.random.SeedSequence(seed).spawn(3)
    return (np.random.Generator(np.random.PCG64(init)),
            np.random.Generator(np.random.PCG64(shuffle)),
            np.random.Generator(np.random.PCG64(dropout)))


def _batches(order: np.ndarray, batch_size: int):
    n = order.size
    starts = list(range(0, n, batch_size))
    # a trailing batch of one cannot be batch-normalised; fold it into the previous one
    if len(starts) > 1 and n - starts[-1] < 2:
        starts.pop()
    bounds = starts[1:] + [n]
    return [order[s:e] for s, e in zip(starts, bounds)]


def train(net: LstmNetwork, X, y_true, y_garch, spec: LossSpec, epochs: int = 300, seed: int = 0, *,
          config: TrainConfig | None = None, on_epoch=None):
    """Train in place on network-scale inputs/targets; returns per-epoch mean losses.

    Shuffling and dropout masks are drawn from streams derived from ``seed``.
    """
    config = config or TrainConfig(epochs=epochs)
    X = np.asarray(X, dtype=np.float64)
    y_true = np.asarray(y_true, dtype=np.float64)
    y_garch = np.asarray(y_garch, dtype=np.float64)
    n = X.shape[0]
    if n < 2:
        raise ValueError("need at least 2 training samples")
    _, shuffle_rng, dropout_rng = _seed_streams(seed)
    opt = config.optimizer()
    losses: list[float] = []
    net.train()
    try:
        for epoch in range(epochs):
            total = 0.0
            for idx in _batches(shuffle_rng.permutation(n), config.batch_size):
                pred = net.forward(X[idx], rng=dropout_rng)
                loss, dpred = ginn_loss_grad(y_true[idx], y_garch[idx], pred, spec)
                if not math.isfinite(loss):
                    last = len(losses) or None
                    raise TrainingError(f"non-finite loss in epoch {epoch + 1}", last, losses)
                grads = net.backward(dpred)
                adamw_step(net.params, grads, opt)
                total += loss * idx.size
            losses.append(total / n)
            if on_epoch is not None:
                on_epoch(epoch + 1, losses[-1])
    finally:
        net.eval()
    return losses


@dataclass
class GinnModel:
    net: LstmNetwork
    scaler: Standardizer
    lam: float
    seed: int
    epochs: int
    losses: list = field(default_factory=list)

    @property
    def window_len(self) -> int:
        return self.net.config.input_window

    def predict(self, windows) -> np.ndarray:
        """Variance-unit predictions for windows of variance-unit inputs."""
        self.net.eval()
        z = self.net.forward(np.atleast_2d(self.scaler.transform(windows)))
        return self.scaler.inverse(z)

    def save(self, path, extra: dict | None = None) -> None:
        payload = {"format": CHECKPOINT_FORMAT, "lambda": self.lam, "seed": self.seed,
                   "epochs": self.epochs, "normalization": self.scaler.to_dict(),
                   "network": self.net.state_dict(), "losses": list(self.losses)}
        if extra:
            payload["run"] = extra
        Path(path).write_text(json.dumps(payload, sort_keys=True), encoding="utf-8")

    @classmethod
    def load(cls, path, input_window: int | None = None) -> "GinnModel":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        if payload.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(f"{path}: not a GINN checkpoint")
        net = LstmNetwork.from_state_dict(payload["network"])
        if input_window is not None and net.config.input_window != input_window:
            raise ValueError(f"checkpoint input_window {net.config.input_window} != requested {input_window}")
        return cls(net, Standardizer(**payload["normalization"]), payload["lambda"],
                   payload["seed"], payload["epochs"], payload.get("losses", []))


def fit_model(dataset: GinnDataset, spec: LossSpec, net_config: NetworkConfig, *, epochs: int = 300,
              seed: int = 0, train_config: TrainConfig | None = None, log_scale: bool = False,
              on_epoch=None) -> GinnModel:
    """Fit normalisation on the training ground truth, initialise from ``seed`` and train.

    Inputs and both targets share one z-score (of log variance when
    ``log_scale``).
    """
    if dataset.windows.shape[1] != net_config.input_window:
        raise ValueError("dataset window length does not match the network input window")
    scaler = Standardizer.fit(dataset.sigma2_true, log=log_scale)
    init_rng, _, _ = _seed_streams(seed)
    net = LstmNetwork(net_config, init_rng)
    cfg = train_config or TrainConfig(epochs=epochs)
    losses = train(net, scaler.transform(dataset.windows), scaler.transform(dataset.sigma2_true),
                   scaler.transform(dataset.sigma2_garch), spec, epochs, seed, config=cfg, on_epoch=on_epoch)
    return GinnModel(net, scaler, spec.lam, seed, epochs, losses)


def rolling_predict(model: GinnModel, variance_history: DatedSeries, window_len: int | None = None) -> VarianceSeries:
    """One prediction per day with ``window_len`` prior ground-truth variances."""
    window_len = window_len or model.window_len
    if window_len != model.window_len:
        raise ValueError("window_len must match the network input window")
    X, dates = rolling_windows(variance_history, window_len)
    return VarianceSeries(dates, model.predict(X))
