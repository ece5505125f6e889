"""GARCH(1,1), GJR-GARCH(1,1,1) and TGARCH(1,1,1) volatility models.

All three recursions are first-order linear filters in their state
(variance for GARCH/GJR, volatility for TGARCH), so paths are computed with
``scipy.signal.lfilter`` and the log-likelihood gradient with a reverse
(adjoint) filter. Fitting maximises the Gaussian log-likelihood with a
BFGS ascent in unconstrained coordinates:

* ``alpha0 = exp(a)``
* ``alpha + gamma/2 + beta = P_MAX * logistic(u)`` (covariance stationarity)
* shares of that sum via a softmax, keeping ``alpha >= 0``, ``beta >= 0``
  and ``alpha + gamma >= 0``.

Units: ``alpha0`` is a variance for GARCH/GJR and a volatility for TGARCH,
whose recursion runs on sigma and is squared on output.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from .market_data import ReturnSeries, windows
from .mean_model import VarianceSeries, fit_ar

log = logging.getLogger(__name__)

LOG_2PI = math.log(2.0 * math.pi)
P_MAX = 1.0 - 1e-6
SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)

# (alpha-like share, beta) pairs for the fixed multi-start schedule
_START_WEIGHTS = ((0.05, 0.90), (0.10, 0.80), (0.15, 0.60))


class GarchVariant(str, enum.Enum):
    GARCH = "GARCH"
    GJR_GARCH = "GJR_GARCH"
    TGARCH = "TGARCH"

    @classmethod
    def parse(cls, name) -> "GarchVariant":
        if isinstance(name, cls):
            return name
        key = str(name).strip().upper().replace("-", "_")
        aliases = {"GJR": "GJR_GARCH", "GJRGARCH": "GJR_GARCH", "TARCH": "TGARCH"}
        try:
            return cls(aliases.get(key, key))
        except ValueError:
            raise ValueError(f"unknown GARCH variant {name!r}") from None

    @property
    def asymmetric(self) -> bool:
        return self is not GarchVariant.GARCH


class FitError(RuntimeError):
    pass


@dataclass(frozen=True)
class GarchParams:
    alpha0: float
    alpha: float
    beta: float
    gamma: float = 0.0
    mean: float = 0.0
    variant: GarchVariant = GarchVariant.GARCH

    def __post_init__(self):
        object.__setattr__(self, "variant", GarchVariant.parse(self.variant))
        vals = (self.alpha0, self.alpha, self.beta, self.gamma, self.mean)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("GARCH parameters must be finite")
        if self.alpha0 <= 0:
            raise ValueError("alpha0 must be positive")
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be non-negative")
        if self.variant is GarchVariant.GARCH and self.gamma != 0:
            raise ValueError("plain GARCH has no asymmetry term")
        if self.alpha + self.gamma < 0:
            raise ValueError("alpha + gamma must be non-negative")

    @property
    def stationarity_sum(self) -> float:
        return self.alpha + 0.5 * self.gamma + self.beta

    def with_values(self, **kw) -> "GarchParams":
        d = dict(alpha0=self.alpha0, alpha=self.alpha, beta=self.beta, gamma=self.gamma,
                 mean=self.mean, variant=self.variant)
        d.update(kw)
        return GarchParams(**d)

    def to_dict(self) -> dict:
        return {"variant": self.variant.value, "alpha0": self.alpha0, "alpha": self.alpha,
                "gamma": self.gamma, "beta": self.beta, "mean": self.mean}


@dataclass(frozen=True)
class GarchFit:
    params: GarchParams
    log_likelihood: float
    converged: bool
    iterations: int
    grad_norm: float = float("nan")  # sup-norm, transformed coordinates, per observation

    def to_dict(self) -> dict:
        return {**self.params.to_dict(), "log_likelihood": self.log_likelihood,
                "converged": self.converged, "iterations": self.iterations,
                "grad_norm": self.grad_norm}


def _state_inputs(variant: GarchVariant, e: np.ndarray):
    if variant is GarchVariant.TGARCH:
        a = np.abs(e)
    else:
        a = e * e
    return a, a * (e < 0)


def _filter(variant, alpha0, alpha, gamma, beta, e, h0):
    """State path h (variance or volatility) of length len(e) with h[0] = h0."""
    a, an = _state_inputs(variant, e)
    h = np.empty(e.size)
    h[0] = h0
    if e.size > 1:
        x = alpha0 + alpha * a[:-1] + gamma * an[:-1]
        h[1:] = lfilter([1.0], [1.0, -beta], x, zi=[beta * h0])[0]
    return h, a, an


def _initial_state(variant, sigma0_sq: float) -> float:
    return math.sqrt(sigma0_sq) if variant is GarchVariant.TGARCH else sigma0_sq


def default_sigma0_sq(residuals) -> float:
    """Recursion seed: sample second moment of the (demeaned) residuals."""
    e = np.asarray(residuals, dtype=np.float64)
    return float(np.mean(e * e))


def variance_path(params: GarchParams, residuals, sigma0_sq: float) -> np.ndarray:
    """Conditional variances sigma_t^2 for t = 0..T-1, with sigma_0^2 = ``sigma0_sq``."""
    if not sigma0_sq > 0:
        raise ValueError("sigma0_sq must be positive")
    e = np.asarray(residuals, dtype=np.float64)
    if not np.all(np.isfinite(e)):
        raise ValueError("residuals must be finite")
    p = params
    h, _, _ = _filter(p.variant, p.alpha0, p.alpha, p.gamma, p.beta, e,
                      _initial_state(p.variant, sigma0_sq))
    return h * h if p.variant is GarchVariant.TGARCH else h


def _loglik_terms(variant, h, e):
    if variant is GarchVariant.TGARCH:
        s2 = h * h
    else:
        s2 = h
    return -0.5 * (LOG_2PI + np.log(s2) + e * e / s2)


def log_likelihood(params: GarchParams, residuals, sigma0_sq: float | None = None) -> float:
    """Gaussian conditional log-likelihood of ``residuals``.

    ``sigma0_sq`` defaults to the residuals' sample second moment, the same
    seed ``fit_mle`` uses.
    """
    e = np.asarray(residuals, dtype=np.float64)
    if sigma0_sq is None:
        sigma0_sq = default_sigma0_sq(e)
    s2 = variance_path(params, e, sigma0_sq)
    if not np.all(s2 > 0):
        raise ValueError("non-positive variance along the path; invalid parameters")
    return float(np.sum(-0.5 * (LOG_2PI + np.log(s2) + e * e / s2)))


def _loglik_and_grad(variant, P, e, h0):
    """Log-likelihood and its gradient w.r.t. (alpha0, alpha, gamma, beta)."""
    alpha0, alpha, gamma, beta = P
    h, a, an = _filter(variant, alpha0, alpha, gamma, beta, e, h0)
    if not np.all(h > 0):
        return -np.inf, np.zeros(4)
    e2 = e * e
    if variant is GarchVariant.TGARCH:
        s2 = h * h
        q = -1.0 / h + e2 / (h * s2)
    else:
        s2 = h
        q = (e2 - h) / (2.0 * h * h)
    ll = float(np.sum(-0.5 * (LOG_2PI + np.log(s2) + e2 / s2)))
    # adjoint: lam_t = q_t + beta * lam_{t+1}
    lam = lfilter([1.0], [1.0, -beta], q[:0:-1])[::-1]
    grad = np.array([lam.sum(), lam @ a[:-1], lam @ an[:-1], lam @ h[:-1]])
    return ll, grad


def _sigmoid(x):
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    z = math.exp(x)
    return z / (1.0 + z)


def _to_natural(variant, theta):
    """Unconstrained theta -> (alpha0, alpha, gamma, beta) and the Jacobian."""
    a, u = theta[0], theta[1]
    alpha0 = math.exp(min(a, 700.0))
    sg = _sigmoid(u)
    p = P_MAX * sg
    dp = p * (1.0 - sg)
    J = np.zeros((4, theta.size))
    J[0, 0] = alpha0
    if variant is GarchVariant.GARCH:
        s = _sigmoid(theta[2])
        P = np.array([alpha0, p * s, 0.0, p * (1.0 - s)])
        J[1, 1], J[3, 1] = dp * s, dp * (1.0 - s)
        ds = p * s * (1.0 - s)
        J[1, 2], J[3, 2] = ds, -ds
        return P, J
    z = np.array([theta[2], theta[3], 0.0])
    w = np.exp(z - z.max())
    w /= w.sum()
    # alpha = 2 p w1, gamma = 2 p (w2 - w1), beta = p w3
    P = np.array([alpha0, 2 * p * w[0], 2 * p * (w[1] - w[0]), p * w[2]])
    J[1, 1], J[2, 1], J[3, 1] = 2 * dp * w[0], 2 * dp * (w[1] - w[0]), dp * w[2]
    dw = np.diag(w) - np.outer(w, w)  # dw_i/dz_j
    for j in range(2):
        J[1, 2 + j] = 2 * p * dw[0, j]
        J[2, 2 + j] = 2 * p * (dw[1, j] - dw[0, j])
        J[3, 2 + j] = p * dw[2, j]
    return P, J


def _logit(x):
    return math.log(x / (1.0 - x))


def _to_unconstrained(variant, alpha0, alpha, gamma, beta):
    p = alpha + 0.5 * gamma + beta
    u = _logit(p / P_MAX)
    if variant is GarchVariant.GARCH:
        return np.array([math.log(alpha0), u, _logit(alpha / p)])
    w1, w2, w3 = alpha / (2 * p), (alpha + gamma) / (2 * p), beta / p
    return np.array([math.log(alpha0), u, math.log(w1 / w3), math.log(w2 / w3)])


def _start_points(variant):
    pts = []
    for shock, beta in _START_WEIGHTS:
        if variant is GarchVariant.GARCH:
            alpha, gamma = shock, 0.0
        else:
            alpha, gamma = 0.5 * shock, shock
        p = alpha + 0.5 * gamma + beta
        if variant is GarchVariant.TGARCH:
            alpha0 = 1.0 - (alpha + 0.5 * gamma) * SQRT_2_OVER_PI - beta
        else:
            alpha0 = 1.0 - p
        pts.append(_to_unconstrained(variant, alpha0, alpha, gamma, beta))
    return pts


@dataclass
class _BfgsResult:
    x: np.ndarray
    f: float
    grad_norm: float
    iterations: int
    converged: bool


def bfgs_minimize(fun, x0, max_iter=500, gtol=1e-6, ftol=1e-8, accept_gtol=1e-3,
                  max_step=5.0) -> _BfgsResult:
    """Minimise ``fun(x) -> (f, grad)`` with BFGS and Armijo backtracking.

    Stops when the gradient sup-norm drops below ``gtol`` or the relative
    decrease of ``f`` falls below ``ftol``. The second stop only counts as
    converged when the gradient sup-norm is also under ``accept_gtol``.
    """
    x = np.array(x0, dtype=np.float64)
    n = x.size
    f, g = fun(x)
    if not math.isfinite(f):
        return _BfgsResult(x, f, float("inf"), 0, False)
    H = np.eye(n)
    fresh = True
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        gmax = float(np.max(np.abs(g)))
        if gmax < gtol:
            converged = True
            it -= 1
            break
        d = -H @ g
        slope = float(g @ d)
        if slope >= 0:
            H = np.eye(n)
            fresh = True
            d = -g
            slope = float(g @ d)
        dn = float(np.linalg.norm(d))
        if dn > max_step:
            d *= max_step / dn
            slope *= max_step / dn
        t = 1.0
        while True:
            xn = x + t * d
            fn, gn = fun(xn)
            if math.isfinite(fn) and fn <= f + 1e-4 * t * slope:
                break
            t *= 0.5
            if t < 1e-14:
                return _BfgsResult(x, f, gmax, it, gmax < accept_gtol)
        s, y = xn - x, gn - g
        df = f - fn
        x, f, g = xn, fn, gn
        if df <= ftol * max(abs(f), 1.0):
            gmax = float(np.max(np.abs(g)))
            converged = gmax < accept_gtol
            break
        sy = float(s @ y)
        if sy > 1e-12 * float(np.linalg.norm(s) * np.linalg.norm(y)):
            if fresh:
                H = np.eye(n) * (sy / float(y @ y))
                fresh = False
            rho = 1.0 / sy
            Hy = H @ y
            H = H - rho * (np.outer(s, Hy) + np.outer(Hy, s)) + (rho * rho * float(y @ Hy) + rho) * np.outer(s, s)
    return _BfgsResult(x, f, float(np.max(np.abs(g))), it, converged)


def fit_mle(residuals, variant=GarchVariant.GARCH, sigma0_sq: float | None = None, *,
            mean: float = 0.0, max_iter: int = 500, gtol: float = 1e-6,
            ftol: float = 1e-8) -> GarchFit:
    """Maximum-likelihood fit from three fixed starting points.

    Residuals are standardised internally; ``alpha0`` is mapped back to the
    residuals' units. Deterministic for a given input.
    """
    variant = GarchVariant.parse(variant)
    e = np.asarray(residuals, dtype=np.float64)
    if e.ndim != 1 or e.size < 30:
        raise ValueError("fit_mle needs at least 30 residuals")
    if not np.all(np.isfinite(e)):
        raise ValueError("residuals must be finite")
    if sigma0_sq is None:
        sigma0_sq = default_sigma0_sq(e)
    if not sigma0_sq > 0:
        raise FitError("degenerate residuals (zero second moment)")
    scale = math.sqrt(sigma0_sq)
    z = e / scale
    h0 = 1.0
    T = z.size

    def objective(theta):
        P, J = _to_natural(variant, theta)
        ll, g = _loglik_and_grad(variant, P, z, h0)
        if not math.isfinite(ll):
            return math.inf, np.zeros_like(theta)
        return -ll / T, -(J.T @ g) / T

    best = None
    for x0 in _start_points(variant):
        res = bfgs_minimize(objective, x0, max_iter=max_iter, gtol=gtol, ftol=ftol)
        if math.isfinite(res.f) and (best is None or res.f < best.f):
            best = res
    if best is None:
        raise FitError("likelihood not finite at any starting point")

    P, _ = _to_natural(variant, best.x)
    alpha0_scale = scale if variant is GarchVariant.TGARCH else sigma0_sq
    gamma = float(P[2]) if variant.asymmetric else 0.0
    params = GarchParams(alpha0=float(P[0]) * alpha0_scale, alpha=float(P[1]),
                         beta=float(P[3]), gamma=gamma, mean=mean, variant=variant)
    ll = log_likelihood(params, e, sigma0_sq)
    return GarchFit(params, ll, best.converged, best.iterations, best.grad_norm)


def _one_step(params: GarchParams, e_last: float, s2_last: float) -> float:
    p = params
    neg = 1.0 if e_last < 0 else 0.0
    if p.variant is GarchVariant.TGARCH:
        s = p.alpha0 + (p.alpha + p.gamma * neg) * abs(e_last) + p.beta * math.sqrt(s2_last)
        return s * s
    return p.alpha0 + (p.alpha + p.gamma * neg) * e_last * e_last + p.beta * s2_last


def forecast_one_step(fit: GarchFit | GarchParams, residuals, sigma0_sq: float | None = None) -> float:
    """Next-day variance after running the recursion over ``residuals``."""
    params = fit.params if isinstance(fit, GarchFit) else fit
    e = np.asarray(residuals, dtype=np.float64)
    if sigma0_sq is None:
        sigma0_sq = default_sigma0_sq(e)
    s2 = variance_path(params, e, sigma0_sq)
    return _one_step(params, float(e[-1]), float(s2[-1]))


def persistence(params: GarchParams) -> float:
    """pi = alpha + beta for plain GARCH(1,1)."""
    if params.variant is not GarchVariant.GARCH:
        raise ValueError("persistence is defined here for plain GARCH only")
    return params.alpha + params.beta


def window_residuals(window, source: str = "demeaned"):
    """Residuals fed to the variance model and the mean that produced them."""
    w = np.asarray(window, dtype=np.float64)
    if source == "demeaned":
        m = float(w.mean())
        return w - m, m
    if source == "ar":
        ar = fit_ar(w)
        resid = w[1:] - (ar.intercept + ar.coefficient * w[:-1])
        return resid, ar.intercept
    raise ValueError(f"unknown residual source {source!r}")


@dataclass
class RollingResult:
    forecasts: VarianceSeries
    fits: list = field(default_factory=list)      # (target_date, GarchFit)
    skipped: list = field(default_factory=list)   # (target_date, reason)


def rolling_backtest(series: ReturnSeries, variant=GarchVariant.GARCH, window_len: int = 90, *,
                     refit_every: int = 1, residual_source: str = "demeaned",
                     start=None, end=None) -> RollingResult:
    """Rolling one-step forecasts with per-window refits.

    Windows whose fit does not converge (or fails outright) are skipped and
    listed in ``skipped``. ``start``/``end`` restrict the target dates.
    """
    variant = GarchVariant.parse(variant)
    if refit_every < 1:
        raise ValueError("refit_every must be >= 1")
    X, target_dates = windows(series, window_len)
    keep = np.ones(len(target_dates), dtype=bool)
    if start is not None:
        keep &= target_dates >= np.datetime64(start, "D")
    if end is not None:
        keep &= target_dates < np.datetime64(end, "D")

    out_dates, out_vals, fits, skipped = [], [], [], []
    current = None
    since_refit = 0
    for i in np.flatnonzero(keep):
        day = target_dates[i]
        resid, m = window_residuals(X[i], residual_source)
        if current is None or since_refit >= refit_every:
            since_refit = 0
            try:
                fit = fit_mle(resid, variant, mean=m)
            except (FitError, ValueError) as exc:
                skipped.append((day, str(exc)))
                current = None
                continue
            fits.append((day, fit))
            if not fit.converged:
                skipped.append((day, f"not converged after {fit.iterations} iterations"))
                log.debug("GARCH fit for %s did not converge", day)
                current = None
                continue
            current = fit
        since_refit += 1
        s2 = forecast_one_step(current, resid)
        if not (math.isfinite(s2) and s2 > 0):
            skipped.append((day, f"invalid forecast {s2!r}"))
            continue
        out_dates.append(day)
        out_vals.append(s2)
    if skipped:
        log.info("%s rolling forecast skipped %d of %d windows", variant.value, len(skipped), int(keep.sum()))
    return RollingResult(VarianceSeries(np.array(out_dates, dtype="datetime64[D]"), out_vals), fits, skipped)


def rolling_forecast(series: ReturnSeries, variant=GarchVariant.GARCH, window_len: int = 90, **kw) -> VarianceSeries:
    return rolling_backtest(series, variant, window_len, **kw).forecasts
