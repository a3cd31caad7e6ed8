"""Classification metrics: confusion matrix, accuracy, macro specificity,
macro one-vs-rest AUC.

Specificity and AUC are macro-averaged over one-vs-rest binarizations, the
symmetric multiclass extension of their binary definitions. AUC uses the
rank (Mann-Whitney) formulation with ties credited 0.5, which is exactly
equivalent to exhaustive positive/negative pair counting.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "N_CLASSES",
    "UndefinedMetricError",
    "confusion",
    "accuracy",
    "specificity",
    "auc_ovr",
]

N_CLASSES = 4


class UndefinedMetricError(ValueError):
    """No class contributes to the requested metric."""


def _as_class_vector(v, name: str) -> np.ndarray:
    v = np.asarray(v, dtype=np.int64)
    if v.ndim != 1:
        raise ValueError(f"{name} must be a 1-D class vector")
    if v.size and (v.min() < 0 or v.max() >= N_CLASSES):
        raise ValueError(f"{name} entries must lie in 0..{N_CLASSES - 1}")
    return v


def confusion(preds, labels) -> np.ndarray:
    """4x4 count matrix, rows = true class, columns = predicted class."""
    preds = _as_class_vector(preds, "preds")
    labels = _as_class_vector(labels, "labels")
    if preds.shape != labels.shape:
        raise ValueError(
            f"length mismatch: {preds.shape[0]} preds vs {labels.shape[0]} labels"
        )
    cm = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    np.add.at(cm, (labels, preds), 1)
    return cm


def accuracy(cm: np.ndarray) -> float:
    total = int(cm.sum())
    if total == 0:
        raise ValueError("empty confusion matrix")
    return float(np.trace(cm)) / total


def specificity(cm: np.ndarray) -> float:
    """Macro-averaged one-vs-rest TN / (TN + FP).

    A class contributes only if it is active (appears in the truth or the
    predictions) and has at least one negative sample; inactive classes
    would otherwise inject vacuous 1.0 terms into the mean.
    """
    cm = np.asarray(cm, dtype=np.int64)
    total = int(cm.sum())
    if total == 0:
        raise ValueError("empty confusion matrix")
    row = cm.sum(axis=1)
    col = cm.sum(axis=0)
    values = []
    for c in range(cm.shape[0]):
        if row[c] + col[c] == 0:
            continue
        tn = total - row[c] - col[c] + cm[c, c]
        fp = col[c] - cm[c, c]
        if tn + fp == 0:
            continue
        values.append(tn / (tn + fp))
    if not values:
        raise UndefinedMetricError("specificity undefined: every class excluded")
    return float(np.mean(values))


def auc_ovr(scores, labels) -> float:
    """Macro one-vs-rest AUC from an (N, 4) matrix of class probabilities.

    Per class, the Mann-Whitney statistic of that class's scores with the
    class's samples as positives; ties count 0.5. Classes without at least
    one positive and one negative are skipped.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = _as_class_vector(labels, "labels")
    if scores.ndim != 2 or scores.shape[1] != N_CLASSES:
        raise ValueError(f"scores must be (N, {N_CLASSES}), got {scores.shape}")
    if scores.shape[0] != labels.shape[0]:
        raise ValueError(
            f"length mismatch: {scores.shape[0]} score rows vs {labels.shape[0]} labels"
        )
    n = labels.shape[0]
    aucs = []
    for c in range(N_CLASSES):
        pos = labels == c
        n_pos = int(pos.sum())
        n_neg = n - n_pos
        if n_pos == 0 or n_neg == 0:
            continue
        ranks = _average_ranks(scores[:, c])
        u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
        aucs.append(u / (n_pos * n_neg))
    if not aucs:
        raise UndefinedMetricError("auc undefined: no class has both positives and negatives")
    return float(np.mean(aucs))


def _average_ranks(x: np.ndarray) -> np.ndarray:
    """1-based ranks with ties replaced by the mean rank of the tie group."""
    order = np.argsort(x, kind="stable")
    ranks = np.empty(x.shape[0], dtype=np.float64)
    i = 0
    while i < x.shape[0]:
        j = i
        while j + 1 < x.shape[0] and x[order[j + 1]] == x[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks
