"""Fit metrics and the leave-one-feature-group-out ablation harness.

Metrics:

* ``RMSE = sqrt(mean((y - yhat)^2))``
* ``MRE  = mean(|y - yhat| / y)`` over nonzero targets; zero targets are
  skipped and counted, never silently dropped
* ``R^2  = 1 - Var(y - yhat) / Var(y)`` (variance form: a constant
  predictor at any level scores exactly 0, and values below 0 mean the
  residuals vary more than the data)

The ablation refits the same KRR on five column subsets: all groups, and
each of P/T/W/C left out in turn, reporting train and test metrics per
subset. The kernel's auto gamma is resolved once against the full feature
dimension so that subsets are compared under the same kernel scale (and
dropping an all-zero column provably changes nothing).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .features import FeatureMatrix
from .model import KernelParams, fit_krr, predict

# Table layout: full model first, then each group left out (P, W, T, C order
# of exclusion mirrors the feature-effectiveness table).
ABLATION_SETS: tuple[tuple[str, str], ...] = (
    ("all", "PTWC"),
    ("T+W+C", "TWC"),
    ("P+T+C", "PTC"),
    ("P+W+C", "PWC"),
    ("P+W+T", "PWT"),
)


@dataclass
class MetricsReport:
    rmse: float
    mre: float
    r2: float | None  # None when y is constant (variance ratio undefined)
    n_used: int
    n_skipped_mre: int


@dataclass
class TrainTestSplit:
    """Contiguous split: the first ``train_days`` of data train the model,
    the following ``test_days`` evaluate it."""

    train_days: int = 14
    test_days: int = 7

    @property
    def train_hours(self) -> int:
        return self.train_days * 24

    @property
    def test_hours(self) -> int:
        return self.test_days * 24


@dataclass
class AblationRow:
    label: str
    groups: str
    train: MetricsReport
    test: MetricsReport


@dataclass
class AblationReport:
    rows: list[AblationRow]

    def row(self, label: str) -> AblationRow:
        for row in self.rows:
            if row.label == label:
                return row
        raise KeyError(label)


def metrics(y: np.ndarray, y_hat: np.ndarray) -> MetricsReport:
    """Compute RMSE, MRE and the variance-form R^2."""
    y = np.asarray(y, dtype=float)
    y_hat = np.asarray(y_hat, dtype=float)
    if y.shape != y_hat.shape:
        raise ValueError(f"length mismatch: {y.shape} vs {y_hat.shape}")
    if y.size < 2:
        raise ValueError("need at least 2 samples")
    err = y - y_hat
    rmse = float(np.sqrt(np.mean(err**2)))
    nonzero = y != 0
    n_skipped = int(np.sum(~nonzero))
    if n_skipped == y.size:
        mre = 0.0
    else:
        mre = float(np.mean(np.abs(err[nonzero] / y[nonzero])))
    var_y = float(np.var(y))
    r2 = None if var_y == 0.0 else 1.0 - float(np.var(err)) / var_y
    return MetricsReport(rmse=rmse, mre=mre, r2=r2, n_used=int(y.size), n_skipped_mre=n_skipped)


def _split_rows(fm: FeatureMatrix, split: TrainTestSplit) -> tuple[slice, slice]:
    needed = split.train_hours + split.test_hours
    if fm.X.shape[0] < needed:
        raise ValueError(f"matrix covers {fm.X.shape[0]} hours, split needs {needed}")
    return slice(0, split.train_hours), slice(split.train_hours, needed)


def _subset_predictions(
    matrices: list[FeatureMatrix],
    groups: str,
    split: TrainTestSplit,
    target: str,
    lam: float,
    params: KernelParams,
    gamma: float,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Fit per-cell KRR on a column subset; return pooled (y, yhat) pairs
    for train and test rows across all cells."""
    concrete = KernelParams(degree=params.degree, gamma=gamma, coef0=params.coef0)
    y_train_all, p_train_all, y_test_all, p_test_all = [], [], [], []
    for fm in matrices:
        train_rows, test_rows = _split_rows(fm, split)
        cols = fm.group_columns(groups)
        if cols.size == 0:
            raise ValueError(f"feature subset {groups!r} selects no columns")
        X = fm.X[:, cols]
        y = fm.y(target).astype(float)
        model = fit_krr(X[train_rows], y[train_rows], lam, concrete)
        y_train_all.append(y[train_rows])
        p_train_all.append(predict(model, X[train_rows]))
        y_test_all.append(y[test_rows])
        p_test_all.append(predict(model, X[test_rows]))
    return (
        np.concatenate(y_train_all),
        np.concatenate(p_train_all),
        np.concatenate(y_test_all),
        np.concatenate(p_test_all),
    )


def ablation(
    matrices: FeatureMatrix | list[FeatureMatrix],
    split: TrainTestSplit,
    lam: float = 1.0,
    params: KernelParams | None = None,
    target: str = "pickup",
) -> AblationReport:
    """Leave-one-group-out ablation over one cell or a pooled list of cells.

    For each of the five feature sets, per-cell KRR models are refitted on
    the training rows and scored on train and test rows; with several cells
    the (y, yhat) pairs are pooled before computing metrics.
    """
    if isinstance(matrices, FeatureMatrix):
        matrices = [matrices]
    if params is None:
        params = KernelParams()
    gamma = params.resolve_gamma(matrices[0].X.shape[1])
    rows = []
    for label, groups in ABLATION_SETS:
        y_tr, p_tr, y_te, p_te = _subset_predictions(
            matrices, groups, split, target, lam, params, gamma
        )
        rows.append(
            AblationRow(label=label, groups=groups, train=metrics(y_tr, p_tr), test=metrics(y_te, p_te))
        )
    return AblationReport(rows=rows)


# --- report rendering -------------------------------------------------------

def _fmt_r2(value: float | None) -> str:
    return "undefined" if value is None else f"{value:.4f}"


def ablation_csv_lines(report: AblationReport) -> list[str]:
    """Canonical CSV rows: label, training-fit R^2, test RMSE, test MRE."""
    lines = ["feature_set,r2_train,rmse_test,mre_test"]
    for row in report.rows:
        r2 = "" if row.train.r2 is None else repr(row.train.r2)
        lines.append(f"{row.label},{r2},{row.test.rmse!r},{row.test.mre!r}")
    return lines


def format_ablation_table(report: AblationReport) -> str:
    """Aligned plain-text table, one column per feature set.

    Both train and test values are shown because the source protocol is
    ambiguous about which split its error columns used.
    """
    labels = [row.label for row in report.rows]
    col_width = max(12, *(len(label) + 2 for label in labels))
    header = "".join(label.rjust(col_width) for label in labels)
    lines = [" " * 14 + header]

    def add(name: str, values: list[str]) -> None:
        lines.append(name.ljust(14) + "".join(v.rjust(col_width) for v in values))

    add("R2 (train)", [_fmt_r2(r.train.r2) for r in report.rows])
    add("R2 (test)", [_fmt_r2(r.test.r2) for r in report.rows])
    add("RMSE (train)", [f"{r.train.rmse:.4f}" for r in report.rows])
    add("RMSE (test)", [f"{r.test.rmse:.4f}" for r in report.rows])
    add("MRE (train)", [f"{r.train.mre:.4f}" for r in report.rows])
    add("MRE (test)", [f"{r.test.mre:.4f}" for r in report.rows])
    return "\n".join(lines)
