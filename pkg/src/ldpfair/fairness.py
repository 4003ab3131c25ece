"""Group-fairness metrics for a binary predictor and a binary protected group.

``group == 1`` marks the privileged group. Undefined values (a ratio with a
zero denominator, a true-positive rate over no positives) are returned as
``nan``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

UNDEFINED = math.nan
METRIC_NAMES = ("DI", "SPD", "EOD", "OAD")


def _as_binary(x, name: str) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    if x.size and not np.isin(x, (0, 1)).all():
        raise ValueError(f"{name} must be 0/1 valued")
    return x.astype(bool)


def _split(pred, group, label=None):
    pred = _as_binary(pred, "pred")
    group = _as_binary(group, "group")
    if len(pred) != len(group):
        raise ValueError("pred and group lengths differ")
    if label is not None:
        label = _as_binary(label, "label")
        if len(label) != len(pred):
            raise ValueError("label and pred lengths differ")
    if group.all() or not group.any():
        raise ValueError("both the privileged and the unprivileged group must be non-empty")
    return pred, group, label


def _rate(hits: np.ndarray, mask: np.ndarray) -> float:
    total = int(mask.sum())
    if total == 0:
        return UNDEFINED
    return int(hits[mask].sum()) / total


def disparate_impact(pred, group) -> float:
    """Positive-prediction rate of the unprivileged group over that of the privileged group."""
    pred, group, _ = _split(pred, group)
    unpriv = _rate(pred, ~group)
    priv = _rate(pred, group)
    if priv == 0:
        return 1.0 if unpriv == 0 else UNDEFINED
    return unpriv / priv


def statistical_parity_difference(pred, group) -> float:
    pred, group, _ = _split(pred, group)
    return _rate(pred, group) - _rate(pred, ~group)


def equal_opportunity_difference(pred, label, group) -> float:
    """TPR(privileged) - TPR(unprivileged); undefined if a group has no positives."""
    pred, group, label = _split(pred, group, label)
    return _rate(pred, group & label) - _rate(pred, ~group & label)


def overall_accuracy_difference(pred, label, group) -> float:
    pred, group, label = _split(pred, group, label)
    correct = pred == label
    return _rate(correct, group) - _rate(correct, ~group)


@dataclass(frozen=True)
class FairnessReport:
    di: float
    spd: float
    eod: float
    oad: float

    def as_row(self) -> dict[str, float]:
        return {name: value for name, value in zip(METRIC_NAMES, asdict(self).values())}


def fairness_report(pred, label, group) -> FairnessReport:
    return FairnessReport(
        di=disparate_impact(pred, group),
        spd=statistical_parity_difference(pred, group),
        eod=equal_opportunity_difference(pred, label, group),
        oad=overall_accuracy_difference(pred, label, group),
    )
