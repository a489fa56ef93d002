"""Regression core: OLS, ridge, and polynomial-kernel kernel ridge.

The kernel is ``k(x, x') = (gamma * <x, x'> + coef0) ** degree``; degree 2
captures multiplicative interactions between feature groups (a storm
damping a POI-driven rhythm, for instance) that a linear model cannot.

Conventions, chosen so the dual and primal routes agree exactly:

* ridge minimizes ``sum((y - w0 - w.x)^2) + lam * ||w||^2`` with the bias
  left unpenalized (features and targets are centered before solving);
* KRR standardizes features, centers targets, and solves
  ``(K + lam*I) alpha = y_centered`` by Cholesky factorization, retrying
  once with a diagonal jitter of ``1e-8 * trace(K)/n``;
* with a degree-1 kernel (gamma 1, coef0 0) on standardized inputs, KRR
  predictions equal ridge predictions for the same ``lam``.

Standard deviations follow the population convention (ddof=0) everywhere.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ConfigError, FactorizationError, SingularSystemError

MODEL_FORMAT = "urbanpulse-krr"
MODEL_VERSION = 1


@dataclass
class StandardizeStats:
    """Per-column training mean and population standard deviation."""

    mean: np.ndarray
    std: np.ndarray


@dataclass
class KernelParams:
    """Polynomial kernel parameters; ``gamma=None`` resolves to 1/D at fit."""

    degree: int = 2
    gamma: float | None = None
    coef0: float = 1.0

    def __post_init__(self) -> None:
        if self.degree < 1:
            raise ConfigError("kernel degree must be >= 1")
        if self.gamma is not None and self.gamma <= 0:
            raise ConfigError("kernel gamma must be > 0")
        if self.coef0 < 0:
            raise ConfigError("kernel coef0 must be >= 0")

    def resolve_gamma(self, n_features: int) -> float:
        return self.gamma if self.gamma is not None else 1.0 / n_features


@dataclass
class LinearModel:
    w: np.ndarray
    w0: float
    lam: float | None = None

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return X @ self.w + self.w0


@dataclass
class KrrModel:
    """Fitted kernel ridge model; prediction needs the stored training rows."""

    stats: StandardizeStats
    params: KernelParams
    lam: float
    x_train: np.ndarray  # standardized training rows
    dual_alpha: np.ndarray
    y_mean: float
    gamma: float  # concrete value (params.gamma resolved against D)

    def predict(self, X_new: np.ndarray) -> np.ndarray:
        return predict(self, X_new)


def standardize_fit(X: np.ndarray) -> StandardizeStats:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 1:
        raise ValueError("standardize_fit needs a non-empty 2-D matrix")
    return StandardizeStats(mean=X.mean(axis=0), std=X.std(axis=0))


def standardize_apply(stats: StandardizeStats, X: np.ndarray) -> np.ndarray:
    """(x - mean)/std per column; zero-std columns use divisor 1, so a
    constant column maps to all zeros."""
    X = np.asarray(X, dtype=float)
    if X.shape[1] != stats.mean.shape[0]:
        raise ValueError(f"feature dimension mismatch: {X.shape[1]} vs {stats.mean.shape[0]}")
    divisor = np.where(stats.std == 0.0, 1.0, stats.std)
    return (X - stats.mean) / divisor


def fit_ols(X: np.ndarray, y: np.ndarray) -> LinearModel:
    """Least squares fit of ``y = w.x + w0``.

    Requires more rows than columns and a full-rank augmented system;
    otherwise raises :class:`SingularSystemError` suggesting ridge.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, d = X.shape
    if n < d + 1:
        raise SingularSystemError(f"need at least {d + 1} rows for {d} features, got {n}")
    A = np.column_stack([np.ones(n), X])
    solution, _, rank, _ = np.linalg.lstsq(A, y, rcond=None)
    if rank < d + 1:
        raise SingularSystemError(
            f"design matrix is rank-deficient (rank {rank} < {d + 1}); use fit_ridge with lam > 0"
        )
    return LinearModel(w=solution[1:], w0=float(solution[0]), lam=None)


def fit_ridge(X: np.ndarray, y: np.ndarray, lam: float) -> LinearModel:
    """Ridge fit with unpenalized bias (centered features and targets)."""
    if lam < 0:
        raise ConfigError("ridge lam must be >= 0")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    x_mean = X.mean(axis=0)
    y_mean = float(y.mean())
    Xc = X - x_mean
    yc = y - y_mean
    d = X.shape[1]
    w = np.linalg.solve(Xc.T @ Xc + lam * np.eye(d), Xc.T @ yc)
    return LinearModel(w=w, w0=y_mean - float(x_mean @ w), lam=lam)


def poly_kernel(x: np.ndarray, x_other: np.ndarray, params: KernelParams, gamma: float | None = None) -> float:
    """Kernel value for a single pair of equal-length vectors."""
    x = np.asarray(x, dtype=float)
    x_other = np.asarray(x_other, dtype=float)
    if x.shape != x_other.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {x_other.shape}")
    g = gamma if gamma is not None else params.resolve_gamma(x.shape[-1])
    return float((g * float(x @ x_other) + params.coef0) ** params.degree)


def kernel_matrix(A: np.ndarray, B: np.ndarray, params: KernelParams, gamma: float) -> np.ndarray:
    """Gram matrix between row sets ``A`` and ``B``."""
    if A.shape[1] != B.shape[1]:
        raise ValueError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]}")
    return (gamma * (A @ B.T) + params.coef0) ** params.degree


def _solve_spd(K: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve a symmetric positive-definite system by Cholesky, retrying once
    with a trace-scaled jitter; raise FactorizationError with the smallest
    pivot when that also fails."""
    try:
        factor = scipy.linalg.cho_factor(K, lower=True, check_finite=False)
        return scipy.linalg.cho_solve(factor, rhs, check_finite=False)
    except np.linalg.LinAlgError:
        pass
    jitter = 1e-8 * np.trace(K) / K.shape[0]
    try:
        factor = scipy.linalg.cho_factor(K + jitter * np.eye(K.shape[0]), lower=True, check_finite=False)
        return scipy.linalg.cho_solve(factor, rhs, check_finite=False)
    except np.linalg.LinAlgError:
        smallest = float(np.linalg.eigvalsh(K).min())
        raise FactorizationError(
            f"kernel system not positive definite even with jitter; smallest pivot {smallest:.6e}"
        ) from None


def fit_krr(X: np.ndarray, y: np.ndarray, lam: float, params: KernelParams | None = None) -> KrrModel:
    """Fit kernel ridge regression in the dual.

    Standardizes features, centers targets, and solves
    ``(K + lam*I) alpha = y_centered``.
    """
    if params is None:
        params = KernelParams()
    if lam <= 0:
        raise ConfigError("krr lam must be > 0")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError("X and y must have matching row counts")
    stats = standardize_fit(X)
    Xs = standardize_apply(stats, X)
    gamma = params.resolve_gamma(X.shape[1])
    y_mean = float(y.mean())
    K = kernel_matrix(Xs, Xs, params, gamma)
    alpha = _solve_spd(K + lam * np.eye(K.shape[0]), y - y_mean)
    return KrrModel(
        stats=stats,
        params=params,
        lam=lam,
        x_train=Xs,
        dual_alpha=alpha,
        y_mean=y_mean,
        gamma=gamma,
    )


def predict(model: KrrModel, X_new: np.ndarray) -> np.ndarray:
    """Dual prediction: ``K(new, train) @ alpha + y_mean``."""
    X_new = np.asarray(X_new, dtype=float)
    if X_new.ndim != 2 or X_new.shape[1] != model.x_train.shape[1]:
        raise ValueError(
            f"feature dimension mismatch: {X_new.shape} vs {model.x_train.shape[1]} training features"
        )
    Xs = standardize_apply(model.stats, X_new)
    K = kernel_matrix(Xs, model.x_train, model.params, model.gamma)
    return K @ model.dual_alpha + model.y_mean


# --- serialization ----------------------------------------------------------
#
# Versioned flat text format. Floats are written as C99 hex literals so a
# load reproduces every value (and therefore every prediction) bit for bit.

def _hex_row(values: np.ndarray) -> str:
    return " ".join(float(v).hex() for v in values)


def _parse_row(text: str) -> np.ndarray:
    parts = text.split()
    return np.array([float.fromhex(p) for p in parts]) if parts else np.zeros(0)


def save_model(model: KrrModel, path) -> None:
    with open(path, "w", encoding="ascii") as out:
        _write_model(model, out)


def _write_model(model: KrrModel, out: io.TextIOBase) -> None:
    n, d = model.x_train.shape
    out.write(f"{MODEL_FORMAT} {MODEL_VERSION}\n")
    out.write(f"degree {model.params.degree}\n")
    out.write(f"gamma {float(model.gamma).hex()}\n")
    out.write(f"coef0 {float(model.params.coef0).hex()}\n")
    out.write(f"lambda {float(model.lam).hex()}\n")
    out.write(f"y_mean {float(model.y_mean).hex()}\n")
    out.write(f"n_train {n}\n")
    out.write(f"n_features {d}\n")
    out.write(f"mean {_hex_row(model.stats.mean)}\n")
    out.write(f"std {_hex_row(model.stats.std)}\n")
    out.write(f"alpha {_hex_row(model.dual_alpha)}\n")
    for i in range(n):
        out.write(f"row {_hex_row(model.x_train[i])}\n")


def load_model(path) -> KrrModel:
    with open(path, "r", encoding="ascii") as src:
        return _read_model(src)


def _read_model(src: io.TextIOBase) -> KrrModel:
    def fields(line: str, key: str) -> str:
        tag, _, rest = line.rstrip("\n").partition(" ")
        if tag != key:
            raise ValueError(f"bad model file: expected {key!r}, got {tag!r}")
        return rest

    magic = src.readline().split()
    if magic[:1] != [MODEL_FORMAT] or int(magic[1]) != MODEL_VERSION:
        raise ValueError(f"unsupported model format: {' '.join(magic)!r}")
    degree = int(fields(src.readline(), "degree"))
    gamma = float.fromhex(fields(src.readline(), "gamma"))
    coef0 = float.fromhex(fields(src.readline(), "coef0"))
    lam = float.fromhex(fields(src.readline(), "lambda"))
    y_mean = float.fromhex(fields(src.readline(), "y_mean"))
    n = int(fields(src.readline(), "n_train"))
    d = int(fields(src.readline(), "n_features"))
    mean = _parse_row(fields(src.readline(), "mean"))
    std = _parse_row(fields(src.readline(), "std"))
    alpha = _parse_row(fields(src.readline(), "alpha"))
    rows = np.zeros((n, d))
    for i in range(n):
        rows[i] = _parse_row(fields(src.readline(), "row"))
    if mean.shape[0] != d or std.shape[0] != d or alpha.shape[0] != n:
        raise ValueError("bad model file: inconsistent dimensions")
    return KrrModel(
        stats=StandardizeStats(mean=mean, std=std),
        params=KernelParams(degree=degree, gamma=gamma, coef0=coef0),
        lam=lam,
        x_train=rows,
        dual_alpha=alpha,
        y_mean=y_mean,
        gamma=gamma,
    )
