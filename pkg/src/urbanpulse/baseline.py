"""ARMA(p, q) baseline fitted by the Hannan-Rissanen two-stage procedure.

History-only forecasting is the yardstick the feature models are compared
against. Hannan-Rissanen needs nothing beyond two least-squares solves:

1. fit a long autoregression (order ``max(p, min(20, n // 4))``) and keep
   its residuals as innovation estimates;
2. regress the series on its own lags and on the lagged residual
   estimates, giving the AR coefficients phi, the MA coefficients theta,
   and the intercept c.

Multi-step forecasts run the recursion with future innovations set to 0,
so they decay toward the process mean ``c / (1 - sum(phi))``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class ArmaModel:
    p: int
    q: int
    phi: np.ndarray
    theta: np.ndarray
    c: float
    sigma2: float

    def process_mean(self) -> float:
        denominator = 1.0 - float(self.phi.sum())
        if denominator == 0.0:
            raise ValueError("AR polynomial has a unit root; process mean undefined")
        return self.c / denominator


def fit_arma(series: np.ndarray, p: int = 24, q: int = 1) -> ArmaModel:
    """Estimate an ARMA(p, q) model by Hannan-Rissanen least squares."""
    y = np.asarray(series, dtype=float)
    if p < 0 or q < 0 or p + q < 1:
        raise ValueError("need p >= 0, q >= 0 and p + q >= 1")
    if not np.all(np.isfinite(y)):
        raise ValueError("series contains non-finite values")
    n = len(y)
    if n < 3 * (p + q) + 1:
        raise ValueError(f"series too short: {n} < {3 * (p + q) + 1}")
    if np.std(y) == 0.0:
        raise ValueError("constant series has zero variance after demeaning")

    # stage 1: long AR for innovation estimates
    m = max(p, min(20, n // 4))
    rows = n - m
    design = np.column_stack([np.ones(rows)] + [y[m - k : n - k] for k in range(1, m + 1)])
    coef, _, _, _ = np.linalg.lstsq(design, y[m:], rcond=None)
    resid = np.concatenate([np.zeros(m), y[m:] - design @ coef])

    # stage 2: regress on p value lags and q residual lags
    start = m + q
    rows = n - start
    columns = [np.ones(rows)]
    columns += [y[start - k : n - k] for k in range(1, p + 1)]
    columns += [resid[start - k : n - k] for k in range(1, q + 1)]
    design = np.column_stack(columns)
    coef, _, _, _ = np.linalg.lstsq(design, y[start:], rcond=None)
    final_resid = y[start:] - design @ coef
    return ArmaModel(
        p=p,
        q=q,
        phi=coef[1 : 1 + p],
        theta=coef[1 + p : 1 + p + q],
        c=float(coef[0]),
        sigma2=float(np.mean(final_resid**2)),
    )


def forecast_arma(model: ArmaModel, history: np.ndarray, horizon: int) -> np.ndarray:
    """Recursive multi-step forecast with future innovations set to 0.

    In-sample innovations for the MA terms are reconstructed by filtering
    the history through the model (zero-initialized for the first ``p``
    steps).
    """
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    y = np.asarray(history, dtype=float)
    if len(y) < model.p:
        raise ValueError(f"history shorter than AR order: {len(y)} < {model.p}")

    values = list(y)
    innovations = [0.0] * len(y)
    for t in range(model.p, len(y)):
        pred = model.c
        for k in range(model.p):
            pred += model.phi[k] * values[t - 1 - k]
        for k in range(min(model.q, t)):
            pred += model.theta[k] * innovations[t - 1 - k]
        innovations[t] = values[t] - pred

    out = np.empty(horizon)
    for h in range(horizon):
        t = len(y) + h
        pred = model.c
        for k in range(model.p):
            pred += model.phi[k] * values[t - 1 - k]
        for k in range(model.q):
            j = t - 1 - k
            if j < len(y):  # future innovations are 0
                pred += model.theta[k] * innovations[j]
        values.append(pred)
        out[h] = pred
    return out
