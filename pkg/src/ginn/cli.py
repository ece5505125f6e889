"""Command-line harness: ingest, simulate, forecast, train, evaluate, sweep, persistence.

Every command works inside an output directory (``--out``) and writes a
``manifest_<command>.json`` with the fully resolved configuration.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .evaluation import (AlignmentError, build_dataset, evaluate, fraction_boundary, lambda_sweep,
                         paper_lambda_grid, persistence_experiment, residual_spectrum, split_dataset)
from .evaluation.experiments import write_persistence_csv
from .garch import FitError, GarchVariant, rolling_backtest
from .market_data import DataError, ReturnSeries, load_csv, log_returns, read_series_csv, write_series_csv
from .mean_model import VarianceSeries, ground_truth_series
from .neural import (GinnModel, LossSpec, NetworkConfig, TrainConfig, TrainingError, fit_model,
                     rolling_predict)
from .simulator import SimulationSpec, persistence_grid, simulate_garch

log = logging.getLogger("ginn")

GARCH_MODELS = {"garch": GarchVariant.GARCH, "gjr": GarchVariant.GJR_GARCH, "tgarch": GarchVariant.TGARCH}
NN_MODELS = ("lstm", "ginn", "ginn0")

RETURNS = "returns.csv"
TRUTH = "sigma2_true.csv"
SIM_TRUTH = "sigma2_sim.csv"
GARCH_ALL = "garch_all.csv"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


# defaults per key; config files and flags override in that order
DEFAULTS = {
    "window": 90, "split_date": None, "train_fraction": 0.7, "model": None, "lambda": 0.01,
    "epochs": 300, "seed": "0", "out": ".", "date_format": None, "refit_every": 1,
    "residuals": "demeaned", "layers": 3, "width": 256, "dropout": 0.2, "batch_size": 64,
    "lr": 1e-3, "weight_decay": 1e-2, "log_scale": False,
    "alpha0": None, "alpha": 0.1, "beta": 0.8, "length": 2000, "burn_in": 500,
    "alphas": "0.05,0.1,0.2", "betas": "0.5,0.7,0.85", "lambdas": None, "truth": None, "pred": None,
}
_INT = {"window", "epochs", "refit_every", "layers", "width", "batch_size", "length", "burn_in"}
_FLOAT = {"train_fraction", "lambda", "dropout", "lr", "weight_decay", "alpha0", "alpha", "beta"}
_BOOL = {"log_scale"}


def read_config_file(path) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"config file not found: {p}")
    for n, raw in enumerate(p.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{p}:{n}: expected 'key = value'")
        k, v = (s.strip() for s in line.split("=", 1))
        k = k.replace("-", "_")
        if k not in DEFAULTS:
            raise UsageError(f"{p}:{n}: unknown key {k!r}")
        out[k] = v
    return out


def _coerce(key, value):
    if value is None:
        return None
    try:
        if key in _INT:
            return int(value)
        if key in _FLOAT:
            return float(value)
        if key in _BOOL:
            return value if isinstance(value, bool) else str(value).lower() in ("1", "true", "yes", "on")
    except ValueError:
        raise UsageError(f"invalid value for {key}: {value!r}") from None
    return value


def _floats(text, key):
    try:
        return [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"invalid list for {key}: {text!r}") from None


def _ints(text, key):
    try:
        return [int(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"invalid list for {key}: {text!r}") from None


@dataclass
class RunConfig:
    command: str
    values: dict

    def __getitem__(self, key):
        return self.values[key]

    @property
    def out(self) -> Path:
        return Path(self.values["out"])

    @property
    def seeds(self) -> list[int]:
        return _ints(self.values["seed"], "seed")

    def net_config(self) -> NetworkConfig:
        return NetworkConfig(num_lstm_layers=self["layers"], hidden_width=self["width"],
                             dropout_rate=self["dropout"], input_window=self["window"])

    def train_config(self) -> TrainConfig:
        return TrainConfig(epochs=self["epochs"], batch_size=self["batch_size"], learning_rate=self["lr"],
                           weight_decay=self["weight_decay"])

    def validate(self) -> None:
        v = self.values
        if v["window"] < 3:
            raise UsageError("--window must be at least 3")
        if not 0 < v["train_fraction"] < 1:
            raise UsageError("train_fraction must be in (0, 1)")
        if v["split_date"] is not None:
            try:
                np.datetime64(v["split_date"], "D")
            except ValueError:
                raise UsageError(f"invalid --split-date {v['split_date']!r}") from None
        if not 0 <= v["lambda"] <= 1:
            raise UsageError("--lambda must be in [0, 1]")
        if v["epochs"] < 1 or v["refit_every"] < 1 or v["batch_size"] < 2:
            raise UsageError("epochs and refit_every must be >= 1, batch_size >= 2")
        if not self.seeds:
            raise UsageError("at least one seed is required")
        if v["residuals"] not in ("demeaned", "ar"):
            raise UsageError("--residuals must be 'demeaned' or 'ar'")
        try:
            self.net_config()
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        for key in ("alphas", "betas", "lambdas"):
            if v[key] is not None:
                _floats(v[key], key)

    def manifest(self) -> dict:
        vals = {k: (str(x) if isinstance(x, Path) else x) for k, x in sorted(self.values.items())}
        return {"command": self.command, "version": __version__, "config": vals, "seeds": self.seeds}


def resolve(command: str, args: argparse.Namespace) -> RunConfig:
    values = dict(DEFAULTS)
    if getattr(args, "config", None):
        values.update(read_config_file(args.config))
    for k in DEFAULTS:
        flag = getattr(args, k, None)
        if flag is not None:
            values[k] = flag
    values = {k: _coerce(k, v) for k, v in values.items()}
    if command == "train" and values["model"] == "ginn0":
        values["lambda"] = 0.0
    if command == "train" and values["model"] == "lstm":
        values["lambda"] = 1.0
    cfg = RunConfig(command, values)
    cfg.validate()
    return cfg


def write_manifest(cfg: RunConfig, extra: dict | None = None) -> None:
    data = cfg.manifest()
    if extra:
        data.update(extra)
    (cfg.out / f"manifest_{cfg.command}.json").write_text(json.dumps(data, indent=2, sort_keys=True) + "\n",
                                                           encoding="utf-8")


def _write_json(path, data) -> None:
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _load_returns(cfg) -> ReturnSeries:
    return read_series_csv(cfg.out / RETURNS, ReturnSeries)


def _load_variance(path) -> VarianceSeries:
    return read_series_csv(path, VarianceSeries)


def _boundary(cfg) -> np.datetime64:
    """First test day: ``--split-date`` or the train fraction of the forecastable days."""
    if cfg["split_date"] is not None:
        return np.datetime64(cfg["split_date"], "D")
    truth = _load_variance(cfg.out / TRUTH)
    return fraction_boundary(truth.dates[cfg["window"]:], cfg["train_fraction"])


def _write_ingested(cfg, returns: ReturnSeries) -> int:
    gt = ground_truth_series(returns, cfg["window"])
    write_series_csv(returns, cfg.out / RETURNS, "log_return")
    write_series_csv(gt, cfg.out / TRUTH, "sigma2")
    return len(gt)


def cmd_ingest(cfg: RunConfig, path) -> dict:
    prices = load_csv(path, date_format=cfg["date_format"])
    returns = log_returns(prices)
    n_var = _write_ingested(cfg, returns)
    log.info("ingested %d prices -> %d returns, %d variances", len(prices), len(returns), n_var)
    return {"input": str(path), "prices": len(prices), "returns": len(returns), "variances": n_var}


def cmd_simulate(cfg: RunConfig) -> dict:
    alpha, beta = cfg["alpha"], cfg["beta"]
    alpha0 = cfg["alpha0"] if cfg["alpha0"] is not None else 1.0 - alpha - beta
    try:
        spec = SimulationSpec(alpha0, alpha, beta, cfg["length"], cfg["burn_in"], cfg.seeds[0])
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    returns, true_var = simulate_garch(spec)
    write_series_csv(true_var, cfg.out / SIM_TRUTH, "sigma2")
    _write_ingested(cfg, returns)
    return {"simulation": {"alpha0": alpha0, "alpha": alpha, "beta": beta, "length": spec.length,
                           "burn_in": spec.burn_in, "seed": spec.seed, "persistence": spec.persistence}}


def _garch_backtest(cfg, variant, returns, start=None):
    return rolling_backtest(returns, variant, cfg["window"], refit_every=cfg["refit_every"],
                            residual_source=cfg["residuals"], start=start)


def _garch_all(cfg, returns) -> VarianceSeries:
    """GARCH(1,1) rolling forecasts for every day; cached next to the returns."""
    path = cfg.out / GARCH_ALL
    if path.is_file():
        return _load_variance(path)
    res = _garch_backtest(cfg, GarchVariant.GARCH, returns)
    write_series_csv(res.forecasts, path, "sigma2_pred")
    return res.forecasts


def _checkpoint(cfg, model, seed) -> Path:
    return cfg.out / f"model_{model}_seed{seed}.json"


def cmd_forecast(cfg: RunConfig) -> dict:
    model = cfg["model"]
    if model in GARCH_MODELS:
        returns = _load_returns(cfg)
        start = _boundary(cfg)
        res = _garch_backtest(cfg, GARCH_MODELS[model], returns, start)
        write_series_csv(res.forecasts, cfg.out / f"pred_{model}.csv", "sigma2_pred")
        _write_json(cfg.out / f"fits_{model}.json",
                    [{"date": str(d), **f.to_dict()} for d, f in res.fits])
        return {"forecasts": len(res.forecasts), "split_date": str(start),
                "skipped": [[str(d), why] for d, why in res.skipped]}

    missing = [s for s in cfg.seeds if not _checkpoint(cfg, model, s).is_file()]
    if missing:
        raise UsageError(f"no trained checkpoint for model {model!r} seed(s) {missing}; "
                         f"run `ginn train --model {model}` first")
    truth = _load_variance(cfg.out / TRUTH)
    boundary = _boundary(cfg)
    preds = []
    for seed in cfg.seeds:
        m = GinnModel.load(_checkpoint(cfg, model, seed), input_window=cfg["window"])
        pred = rolling_predict(m, truth).between(start=boundary)
        write_series_csv(pred, cfg.out / f"pred_{model}_seed{seed}.csv", "sigma2_pred")
        preds.append(pred)
    mean = VarianceSeries(preds[0].dates, np.mean([p.values for p in preds], axis=0))
    write_series_csv(mean, cfg.out / f"pred_{model}.csv", "sigma2_pred")
    return {"forecasts": len(mean), "split_date": str(boundary)}


def cmd_train(cfg: RunConfig) -> dict:
    model = cfg["model"]
    truth = _load_variance(cfg.out / TRUTH)
    if model == "lstm":
        garch = truth  # unused at lambda = 1
    else:
        garch = _garch_all(cfg, _load_returns(cfg))
    ds = build_dataset(truth, garch, cfg["window"])
    boundary = _boundary(cfg)
    train, _ = split_dataset(ds, boundary)
    spec = LossSpec(cfg["lambda"])
    written = []
    for seed in cfg.seeds:
        m = fit_model(train, spec, cfg.net_config(), epochs=cfg["epochs"], seed=seed,
                      train_config=cfg.train_config(), log_scale=cfg["log_scale"])
        ckpt = _checkpoint(cfg, model, seed)
        m.save(ckpt, extra={"model": model, "split_date": str(boundary), **cfg.manifest()["config"]})
        with (cfg.out / f"loss_{model}_seed{seed}.csv").open("w", encoding="utf-8", newline="") as f:
            f.write("epoch,loss\n")
            for i, loss in enumerate(m.losses, 1):
                f.write(f"{i},{loss!r}\n")
        written.append(ckpt.name)
    return {"checkpoints": written, "split_date": str(boundary), "train_samples": len(train)}


def _pred_path(cfg, name) -> Path:
    return cfg.out / f"pred_{name}.csv"


def cmd_evaluate(cfg: RunConfig) -> dict:
    truth_path = Path(cfg["truth"]) if cfg["truth"] else cfg.out / TRUTH
    truth = _load_variance(truth_path)
    preds = {}
    for item in (cfg["pred"] or "").split(","):
        if item.strip():
            p = Path(item.strip())
            preds[p.stem.removeprefix("pred_")] = _load_variance(p)
    for name in (cfg["model"] or "").split(","):
        if name.strip():
            preds[name.strip()] = _load_variance(_pred_path(cfg, name.strip()))
    if not preds:
        raise UsageError("nothing to evaluate: pass --model or --pred")
    common = truth.dates
    for p in preds.values():
        common = np.intersect1d(common, p.dates)
    if cfg["split_date"]:
        common = common[common >= np.datetime64(cfg["split_date"], "D")]
    if common.size < 2:
        raise AlignmentError("fewer than 2 common dates between truth and predictions")
    t = truth.select(np.isin(truth.dates, common))
    reports = {}
    for name, p in preds.items():
        p = p.select(np.isin(p.dates, common))
        rep = evaluate(name, t, p)
        _write_json(cfg.out / f"metrics_{name}.json", rep.to_dict())
        if len(t) >= 8:
            spec = residual_spectrum(t, p)
            with (cfg.out / f"spectrum_{name}.csv").open("w", encoding="utf-8", newline="") as f:
                f.write("frequency,amplitude\n")
                for fr, a in zip(spec.frequencies.tolist(), spec.amplitudes.tolist()):
                    f.write(f"{fr!r},{a!r}\n")
        reports[name] = rep.to_dict()
    return {"truth": str(truth_path), "n": int(common.size), "reports": reports}


def cmd_sweep(cfg: RunConfig) -> dict:
    lambdas = _floats(cfg["lambdas"], "lambdas") if cfg["lambdas"] else paper_lambda_grid()
    truth = _load_variance(cfg.out / TRUTH)
    garch = _garch_all(cfg, _load_returns(cfg))
    ds = build_dataset(truth, garch, cfg["window"])
    boundary = _boundary(cfg)
    train, test = split_dataset(ds, boundary)
    res = lambda_sweep(train, test, lambdas, cfg.seeds, net_config=cfg.net_config(),
                       epochs=cfg["epochs"], train_config=cfg.train_config())
    res.write_csv(cfg.out / "sweep.csv")
    summary = {repr(k): v for k, v in res.summary().items()}
    _write_json(cfg.out / "sweep_summary.json", {"per_lambda": summary, "selected_lambda": res.select()})
    return {"lambdas": lambdas, "selected_lambda": res.select(), "split_date": str(boundary)}


def cmd_persistence(cfg: RunConfig) -> dict:
    seeds = cfg.seeds
    try:
        grid = persistence_grid(_floats(cfg["alphas"], "alphas"), _floats(cfg["betas"], "betas"),
                                cfg["length"], seed_base=seeds[0], alpha0=cfg["alpha0"], burn_in=cfg["burn_in"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    rows = persistence_experiment(grid, seeds, net_config=cfg.net_config(), lam=cfg["lambda"],
                                  epochs=cfg["epochs"], window_len=cfg["window"],
                                  train_fraction=cfg["train_fraction"], refit_every=cfg["refit_every"],
                                  train_config=cfg.train_config())
    write_persistence_csv(rows, cfg.out / "persistence.csv")
    return {"cells": len(grid), "rows": len(rows)}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value file; flags override it")
    common.add_argument("--out", help="working/output directory")
    common.add_argument("--window", type=int)
    common.add_argument("--split-date", dest="split_date", help="first test day, YYYY-MM-DD")
    common.add_argument("--train-fraction", dest="train_fraction", type=float)
    common.add_argument("--seed", help="seed or comma-separated seeds")
    common.add_argument("-v", "--verbose", action="store_true")

    nn = argparse.ArgumentParser(add_help=False)
    nn.add_argument("--lambda", dest="lambda", type=float)
    nn.add_argument("--epochs", type=int)
    nn.add_argument("--layers", type=int)
    nn.add_argument("--width", type=int)
    nn.add_argument("--dropout", type=float)
    nn.add_argument("--batch-size", dest="batch_size", type=int)
    nn.add_argument("--lr", type=float)
    nn.add_argument("--weight-decay", dest="weight_decay", type=float)
    nn.add_argument("--log-scale", dest="log_scale", action="store_const", const=True)

    garch = argparse.ArgumentParser(add_help=False)
    garch.add_argument("--refit-every", dest="refit_every", type=int)
    garch.add_argument("--residuals", choices=("demeaned", "ar"))

    sim = argparse.ArgumentParser(add_help=False)
    sim.add_argument("--alpha0", type=float)
    sim.add_argument("--length", type=int)
    sim.add_argument("--burn-in", dest="burn_in", type=int)

    parser = _Parser(prog="ginn", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"ginn {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", parents=[common], help="prices CSV -> returns and ground-truth variance")
    p.add_argument("path")
    p.add_argument("--date-format", dest="date_format", help="strptime format when dates are not ISO")

    p = sub.add_parser("simulate", parents=[common, sim], help="simulate a GARCH(1,1) series")
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)

    p = sub.add_parser("forecast", parents=[common, garch], help="rolling forecasts for one model")
    p.add_argument("--model", choices=[*GARCH_MODELS, *NN_MODELS])

    p = sub.add_parser("train", parents=[common, nn, garch], help="train LSTM/GINN networks")
    p.add_argument("--model", choices=NN_MODELS)

    p = sub.add_parser("evaluate", parents=[common], help="R2/MSE/MAE and residual spectra")
    p.add_argument("--model", help="comma-separated model names (pred_<model>.csv in --out)")
    p.add_argument("--pred", help="comma-separated prediction files")
    p.add_argument("--truth", help="truth variance CSV (default: sigma2_true.csv in --out)")

    p = sub.add_parser("sweep", parents=[common, nn, garch], help="lambda parametric study")
    p.add_argument("--lambdas", help="comma-separated lambdas (default: 0..0.2 by 0.01, then by 0.05)")

    p = sub.add_parser("persistence", parents=[common, nn, garch, sim], help="GINN vs GARCH over persistence")
    p.add_argument("--alphas")
    p.add_argument("--betas")
    return parser


COMMANDS = {"ingest": cmd_ingest, "simulate": cmd_simulate, "forecast": cmd_forecast, "train": cmd_train,
            "evaluate": cmd_evaluate, "sweep": cmd_sweep, "persistence": cmd_persistence}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve(args.command, args)
        if args.command in ("forecast", "train") and not cfg["model"]:
            raise UsageError(f"{args.command} needs --model")
        cfg.out.mkdir(parents=True, exist_ok=True)
        if args.command == "ingest":
            extra = cmd_ingest(cfg, args.path)
        else:
            extra = COMMANDS[args.command](cfg)
        write_manifest(cfg, {"result": extra})
    except UsageError as exc:
        print(f"ginn: error: {exc}", file=sys.stderr)
        return 1
    except (DataError, AlignmentError, FileNotFoundError) as exc:
        print(f"ginn: data error: {exc}", file=sys.stderr)
        return 2
    except (TrainingError, FitError, FloatingPointError) as exc:
        print(f"ginn: numerical failure: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"ginn: data error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
