"""Evaluation metrics: accuracy, macro F1, binary AUC, RMSE, R2."""

from __future__ import annotations

import numpy as np


def accuracy(pred_classes, labels) -> float:
    pred_classes = np.asarray(pred_classes)
    labels = np.asarray(labels)
    if pred_classes.shape != labels.shape or pred_classes.size == 0:
        raise ValueError("predictions and labels must be equal-length and non-empty")
    return float(np.mean(pred_classes == labels))


def f1_macro(pred_classes, labels, n_classes: int) -> float:
    """Unweighted mean of per-class F1; a class with no predictions and no
    instances contributes 0."""
    pred_classes = np.asarray(pred_classes, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    if pred_classes.size == 0:
        raise ValueError("empty input")
    if pred_classes.shape != labels.shape:
        raise ValueError("length mismatch")
    scores = []
    for c in range(n_classes):
        tp = np.sum((pred_classes == c) & (labels == c))
        fp = np.sum((pred_classes == c) & (labels != c))
        fn = np.sum((pred_classes != c) & (labels == c))
        denom = 2 * tp + fp + fn
        scores.append(0.0 if denom == 0 else 2 * tp / denom)
    return float(np.mean(scores))


def _midranks(values: np.ndarray) -> np.ndarray:
    """Average ranks (1-based) with ties sharing their mid-rank."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.shape[0], dtype=np.float64)
    sorted_vals = values[order]
    i = 0
    while i < sorted_vals.shape[0]:
        j = i
        while j + 1 < sorted_vals.shape[0] and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def auc_binary(scores, labels) -> float:
    """P(random positive outranks random negative), ties counted half
    (rank-sum formulation)."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape:
        raise ValueError("length mismatch")
    pos = labels == 1
    n_pos = int(np.sum(pos))
    n_neg = int(labels.shape[0] - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise ValueError("auc needs both classes present")
    ranks = _midranks(scores)
    rank_sum = float(np.sum(ranks[pos]))
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def rmse(preds, labels) -> float:
    preds = np.asarray(preds, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if preds.shape != labels.shape or preds.size == 0:
        raise ValueError("predictions and labels must be equal-length and non-empty")
    return float(np.sqrt(np.mean((preds - labels) ** 2)))


def r2(preds, labels) -> float:
    preds = np.asarray(preds, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if preds.shape != labels.shape or preds.size == 0:
        raise ValueError("predictions and labels must be equal-length and non-empty")
    ss_tot = float(np.sum((labels - labels.mean()) ** 2))
    if ss_tot == 0.0:
        raise ValueError("labels have zero variance")
    ss_res = float(np.sum((labels - preds) ** 2))
    return 1.0 - ss_res / ss_tot


def compute_metrics(task: str, labels, raw_output) -> dict[str, float]:
    """Task-appropriate metric record.

    ``raw_output`` is the predict_output result: values for regression, a
    (proba, classes) pair for classification.
    """
    record: dict[str, float] = {"n": int(np.asarray(labels).shape[0])}
    if task == "regression":
        record["rmse"] = rmse(raw_output, labels)
        record["r2"] = r2(raw_output, labels)
        return record
    proba, classes = raw_output
    record["accuracy"] = accuracy(classes, labels)
    n_classes = proba.shape[1] if proba.ndim == 2 else 2
    record["f1_macro"] = f1_macro(classes, labels, n_classes)
    if task == "binary":
        labels_arr = np.asarray(labels)
        if np.any(labels_arr == 1) and np.any(labels_arr == 0):
            record["auc"] = auc_binary(proba, labels)
    return record


def primary_metric(task: str) -> tuple[str, bool]:
    """(metric name, higher_is_better) used for early stopping, best-round
    extraction, and sweep ranking."""
    if task == "regression":
        return "rmse", False
    return "accuracy", True
