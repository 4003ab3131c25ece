"""L2-regularised logistic regression trained by full-batch gradient descent.

Stands in for a tuned gradient-boosting model: what matters downstream is
that the same fixed hyperparameters are used with and without sanitization.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.special import expit
from scipy.stats import rankdata

CLASSIFIER_NAME = "logistic-regression"


@dataclass(frozen=True)
class Hyperparameters:
    learning_rate: float = 0.1
    l2_penalty: float = 1e-4
    epochs: int = 300
    decision_threshold: float = 0.5

    def __post_init__(self):
        for name in ("learning_rate", "l2_penalty"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be finite and positive, got {value}")
        if int(self.epochs) != self.epochs or self.epochs < 1:
            raise ValueError(f"epochs must be a positive integer, got {self.epochs}")
        if not 0 < self.decision_threshold < 1:
            raise ValueError(f"decision_threshold must lie in (0, 1), got {self.decision_threshold}")


@dataclass
class ClassifierParams:
    weights: np.ndarray
    bias: float
    hyper: Hyperparameters
    loss_history: list[float] = field(default_factory=list, repr=False)

    @property
    def m(self) -> int:
        return len(self.weights)


def _as_matrix(features):
    # Encoded features are 0/1 and mostly zero; CSR keeps epochs cheap.
    if sp.issparse(features):
        return features.tocsr().astype(float)
    x = np.asarray(features, dtype=float)
    if x.ndim != 2:
        raise ValueError(f"features must be two-dimensional, got shape {x.shape}")
    return sp.csr_matrix(x)


def _check_xy(features, labels):
    x = _as_matrix(features)
    y = np.asarray(labels, dtype=float)
    if y.ndim != 1 or x.shape[0] != y.shape[0]:
        raise ValueError(f"shape mismatch: features {x.shape}, labels {y.shape}")
    if x.shape[0] < 2:
        raise ValueError("need at least two samples")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0/1")
    if y.min() == y.max():
        raise ValueError("labels contain a single class")
    return x, y


def loss_and_gradient(weights, bias, features, labels, l2_penalty):
    """Mean logistic loss plus ``l2/2 * ||w||^2`` and its gradient (w, b)."""
    scores = features @ weights + bias
    loss = np.mean(np.logaddexp(0.0, scores) - labels * scores) + 0.5 * l2_penalty * weights @ weights
    residual = expit(scores) - labels
    grad_w = features.T @ residual / len(labels) + l2_penalty * weights
    if sp.issparse(features):
        grad_w = np.asarray(grad_w).ravel()
    grad_b = residual.mean()
    return float(loss), grad_w, float(grad_b)


def train(features, labels, hyper: Hyperparameters | None = None) -> ClassifierParams:
    hyper = hyper or Hyperparameters()
    x, y = _check_xy(features, labels)
    w = np.zeros(x.shape[1])
    xt = x.T.tocsr()
    b = 0.0
    history = []
    n = len(y)
    lam = hyper.l2_penalty
    for epoch in range(hyper.epochs + 1):
        scores = x @ w + b
        loss = float(np.mean(np.logaddexp(0.0, scores) - y * scores) + 0.5 * lam * w @ w)
        if not math.isfinite(loss):
            raise FloatingPointError(f"training loss became non-finite at epoch {epoch}")
        history.append(loss)
        if epoch == hyper.epochs:
            break
        residual = expit(scores) - y
        w -= hyper.learning_rate * (xt @ residual / n + lam * w)
        b -= hyper.learning_rate * residual.mean()
    return ClassifierParams(w, float(b), hyper, history)


def decision_function(params: ClassifierParams, features) -> np.ndarray:
    x = _as_matrix(features)
    if x.shape[1] != params.m:
        raise ValueError(f"expected {params.m} feature columns, got shape {x.shape}")
    return x @ params.weights + params.bias


def predict_proba(params: ClassifierParams, features) -> np.ndarray:
    return expit(decision_function(params, features))


def predict(params: ClassifierParams, features) -> np.ndarray:
    t = params.hyper.decision_threshold
    # Compare in logit space: exact at the default threshold (logit 0.5 = 0).
    return (decision_function(params, features) > math.log(t / (1 - t))).astype(np.int8)


@dataclass(frozen=True)
class UtilityReport:
    acc: float
    f1: float
    auc: float
    recall: float

    def as_row(self) -> dict[str, float]:
        return asdict(self)


def roc_auc(proba, labels) -> float:
    """Mann-Whitney rank-sum AUC with average ranks for tied scores; nan for a single class."""
    proba = np.asarray(proba, dtype=float)
    labels = np.asarray(labels).astype(bool)
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        return math.nan
    ranks = rankdata(proba)
    return (ranks[labels].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg)


def utility_metrics(pred, proba, labels) -> UtilityReport:
    pred = np.asarray(pred).astype(bool)
    labels = np.asarray(labels).astype(bool)
    if not (len(pred) == len(labels) == len(proba)):
        raise ValueError("pred, proba and labels must have equal lengths")
    tp = int((pred & labels).sum())
    fp = int((pred & ~labels).sum())
    fn = int((~pred & labels).sum())
    acc = float((pred == labels).mean())
    recall = tp / (tp + fn) if tp + fn else math.nan
    f1 = 2 * tp / (2 * tp + fp + fn) if tp + fp + fn else math.nan
    return UtilityReport(acc=acc, f1=f1, auc=roc_auc(proba, labels), recall=recall)


def save_params(params: ClassifierParams, path: str | Path, column_map=None) -> None:
    """Write weights one per line, aligned with ``column_map`` when given."""
    column_map = column_map or [("", "")] * params.m
    if len(column_map) != params.m:
        raise ValueError("column_map length does not match the weight vector")
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        for key, value in asdict(params.hyper).items():
            writer.writerow(["#hyper", key, repr(value)])
        writer.writerow(["#bias", "", repr(float(params.bias))])
        for (attr, cat), w in zip(column_map, params.weights):
            writer.writerow([attr, cat, repr(float(w))])


def load_params(path: str | Path) -> tuple[ClassifierParams, list[tuple[str, str]]]:
    hyper, bias, weights, cmap = {}, 0.0, [], []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for row in csv.reader(fh):
            if row[0] == "#hyper":
                hyper[row[1]] = int(row[2]) if row[1] == "epochs" else float(row[2])
            elif row[0] == "#bias":
                bias = float(row[2])
            else:
                cmap.append((row[0], row[1]))
                weights.append(float(row[2]))
    return ClassifierParams(np.array(weights), bias, Hyperparameters(**hyper)), cmap
