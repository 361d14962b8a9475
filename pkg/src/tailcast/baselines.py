"""Statistical reference forecasters.

An Ornstein-Uhlenbeck process (moment/ACF estimation, Euler-Maruyama
simulation, recursive ensemble forecasting) and an AR(p) model (PACF
order selection, conditional least squares, recursive prediction).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import Forecaster
from .diagnostics import Z_95, AcfResult, acf
from .errors import NoBandCrossing, SingularSystem, ZeroVariance


@dataclass(frozen=True)
class OuParams:
    """Mean-reverting diffusion dx = (mu - x)/tau dt + sqrt(2 sigma2/tau) dW.

    mu : long-run mean (channel units)
    sigma2 : stationary variance (units^2)
    tau : correlation time scale (hours)
    """

    mu: float
    sigma2: float
    tau: float

    def __post_init__(self):
        if self.sigma2 <= 0 or self.tau <= 0:
            raise ValueError("sigma2 and tau must be positive")

    def to_dict(self) -> dict:
        return {"mu": self.mu, "sigma2": self.sigma2, "tau": self.tau}

    @classmethod
    def from_dict(cls, d: dict) -> "OuParams":
        return cls(mu=d["mu"], sigma2=d["sigma2"], tau=d["tau"])


@dataclass(frozen=True)
class ArModel:
    """Y_t = c + phi_1 Y_{t-1} + ... + phi_p Y_{t-p} on stationary residuals."""

    coefficients: np.ndarray
    intercept: float
    noise_variance: float

    @property
    def order(self) -> int:
        return len(self.coefficients)

    def to_dict(self) -> dict:
        return {
            "order": self.order,
            "coefficients": np.asarray(self.coefficients).tolist(),
            "intercept": self.intercept,
            "noise_variance": self.noise_variance,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ArModel":
        return cls(
            coefficients=np.asarray(d["coefficients"], dtype=float),
            intercept=d["intercept"],
            noise_variance=d["noise_variance"],
        )


# --- Ornstein-Uhlenbeck ----------------------------------------------------

def estimate_ou(series, acf_result: AcfResult) -> OuParams:
    """Moment estimates plus the ACF-integral time scale.

    mu and sigma2 are the sample mean and variance; tau is the trapezoidal
    integral of C(r) from lag 0 to the decorrelation time (in hours).

    Raises
    ------
    NoBandCrossing
        The ACF never enters the confidence band within max_lag.
    """
    x = np.asarray(series, dtype=float)
    cutoff = acf_result.decorrelation_time
    if cutoff is None:
        raise NoBandCrossing("ACF never enters the confidence band")
    tau = float(np.trapezoid(acf_result.values[: cutoff + 1], dx=1.0))
    return OuParams(mu=float(x.mean()), sigma2=float(x.var()), tau=tau)


def simulate_ou(params: OuParams, x0: float, steps: int, dt: float, seed: int) -> np.ndarray:
    """One Euler-Maruyama path of `steps` points after x0.

    x_{k+1} = x_k + (mu - x_k)/tau dt + sqrt(2 sigma2/tau) sqrt(dt) xi_k
    with xi_k standard normal from the seeded generator.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(steps)
    diffusion = np.sqrt(2.0 * params.sigma2 / params.tau) * np.sqrt(dt)
    path = np.empty(steps)
    x = x0
    for k in range(steps):
        x = x + (params.mu - x) / params.tau * dt + diffusion * noise[k]
        path[k] = x
    return path


def simulate_ou_ensemble(params: OuParams, x0: float, steps: int, dt: float,
                         seed: int, n_paths: int) -> np.ndarray:
    """(n_paths, steps) matrix of paths; path i uses the derived seed seed+i,
    so the ensemble is reproducible under any parallel schedule."""
    noise = np.empty((n_paths, steps))
    for i in range(n_paths):
        noise[i] = np.random.default_rng(seed + i).standard_normal(steps)
    diffusion = np.sqrt(2.0 * params.sigma2 / params.tau) * np.sqrt(dt)
    paths = np.empty((n_paths, steps))
    x = np.full(n_paths, float(x0))
    for k in range(steps):
        x = x + (params.mu - x) / params.tau * dt + diffusion * noise[:, k]
        paths[:, k] = x
    return paths


def forecast_ou(params: OuParams, x0: float, horizon: int, n_paths: int = 1000,
                seed: int = 0, dt: float = 1.0) -> np.ndarray:
    """Per-step ensemble-mean forecast over the horizon (dt = 1 h grid).

    With n_paths -> inf this converges to the conditional mean
    mu + (x0 - mu) exp(-t/tau).
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    paths = simulate_ou_ensemble(params, x0, horizon, dt, seed, n_paths)
    return paths.mean(axis=0)


def ou_conditional_mean(params: OuParams, x0: float, horizon: int) -> np.ndarray:
    """Closed-form conditional mean, the n_paths -> inf limit of forecast_ou."""
    t = np.arange(1, horizon + 1, dtype=float)
    return params.mu + (x0 - params.mu) * np.exp(-t / params.tau)


# --- AR(p) ------------------------------------------------------------------

def pacf(series, max_lag: int) -> np.ndarray:
    """Partial autocorrelations at lags 1..max_lag via Durbin-Levinson."""
    x = np.asarray(series, dtype=float)
    n = x.size
    x = x - x.mean()
    denom = np.dot(x, x)
    if denom == 0:
        raise ZeroVariance("constant series has no partial autocorrelation")
    rho = np.empty(max_lag + 1)
    rho[0] = 1.0
    for r in range(1, max_lag + 1):
        rho[r] = np.dot(x[:-r], x[r:]) / denom
    out = np.empty(max_lag)
    phi_prev = np.empty(0)
    for k in range(1, max_lag + 1):
        if k == 1:
            phi_kk = rho[1]
            phi = np.array([phi_kk])
        else:
            num = rho[k] - np.dot(phi_prev, rho[k - 1:0:-1])
            den = 1.0 - np.dot(phi_prev, rho[1:k])
            phi_kk = num / den if den != 0 else 0.0
            phi = np.empty(k)
            phi[:-1] = phi_prev - phi_kk * phi_prev[::-1]
            phi[-1] = phi_kk
        out[k - 1] = phi_kk
        phi_prev = phi
    return out


def select_ar_order(series, max_p: int = 10) -> int:
    """Order at which the PACF cuts off.

    Lags are scanned upward; the order is the length of the initial
    contiguous run of partial autocorrelations outside the +/-1.96/sqrt(N)
    band, floored at 1 (white noise has no significant lag).
    """
    x = np.asarray(series, dtype=float)
    values = pacf(x, max_p)
    band = Z_95 / np.sqrt(x.size)
    p = 0
    for k in range(max_p):
        if abs(values[k]) > band:
            p = k + 1
        else:
            break
    return max(p, 1)


def fit_ar(series, p: int) -> ArModel:
    """Conditional least-squares AR(p) fit via the normal equations.

    noise_variance is the residual mean square.

    Raises
    ------
    SingularSystem
        The least-squares solve fails.
    """
    y = np.asarray(series, dtype=float)
    n = y.size
    if p < 1:
        raise ValueError("order must be >= 1")
    if n <= 10 * p:
        raise ValueError(f"series length {n} must exceed 10*p={10 * p}")
    design = np.column_stack(
        [np.ones(n - p)] + [y[p - i - 1: n - i - 1] for i in range(p)]
    )
    target = y[p:]
    try:
        coeffs, _, _, _ = np.linalg.lstsq(design, target, rcond=None)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem("AR normal equations failed") from exc
    residuals = target - design @ coeffs
    return ArModel(
        coefficients=coeffs[1:],
        intercept=float(coeffs[0]),
        noise_variance=float(np.mean(residuals ** 2)),
    )


def forecast_ar(model: ArModel, history, horizon: int) -> np.ndarray:
    """Recursive AR prediction, feeding forecasts back as lagged inputs."""
    p = model.order
    hist = np.asarray(history, dtype=float)
    if hist.size < p:
        raise ValueError(f"history length {hist.size} < order {p}")
    window = hist[-p:].tolist()
    out = np.empty(horizon)
    for t in range(horizon):
        value = model.intercept + float(np.dot(model.coefficients, window[::-1]))
        out[t] = value
        window = window[1:] + [value]
    return out


# --- estimator wrappers ------------------------------------------------------

class OrnsteinUhlenbeckForecaster(Forecaster):
    """OU baseline: fit moments + ACF time scale, forecast by ensemble mean."""

    def __init__(self, max_lag: int = 200, n_paths: int = 1000, seed: int = 0):
        self.max_lag = max_lag
        self.n_paths = n_paths
        self.seed = seed

    def fit(self, X, y=None):
        series = np.asarray(X, dtype=float).ravel()
        self.params_ = estimate_ou(series, acf(series, self.max_lag))
        self.last_value_ = float(series[-1])
        return self

    def predict(self, horizon: int, history=None) -> np.ndarray:
        x0 = self.last_value_ if history is None else float(np.ravel(history)[-1])
        return forecast_ou(self.params_, x0, horizon, self.n_paths, self.seed)

    def context_length(self) -> int:
        return 1


class AutoregressiveForecaster(Forecaster):
    """AR(p) baseline; the order comes from the PACF cutoff when not given."""

    def __init__(self, order: int | None = None, max_order: int = 10):
        self.order = order
        self.max_order = max_order

    def fit(self, X, y=None):
        series = np.asarray(X, dtype=float).ravel()
        p = self.order if self.order is not None else select_ar_order(series, self.max_order)
        self.model_ = fit_ar(series, p)
        self.history_ = series[-p:].copy()
        return self

    def predict(self, horizon: int, history=None) -> np.ndarray:
        hist = self.history_ if history is None else np.ravel(history)
        return forecast_ar(self.model_, hist, horizon)

    def context_length(self) -> int:
        return self.model_.order
