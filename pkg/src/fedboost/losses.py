"""Losses and their first/second derivatives w.r.t. raw scores.

Raw scores are pre-link model outputs: logits for binary, per-class logits
for multiclass, plain values for regression. Squared error carries the 1/2
factor so its hessian is exactly 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class GradHess:
    """Per-instance gradient/hessian pairs, one column per model output."""

    g: np.ndarray  # (n, n_outputs)
    h: np.ndarray


def sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softmax(raw: np.ndarray) -> np.ndarray:
    shifted = raw - raw.max(axis=1, keepdims=True)
    ex = np.exp(shifted)
    return ex / ex.sum(axis=1, keepdims=True)


def _as_2d(raw: np.ndarray) -> np.ndarray:
    raw = np.asarray(raw, dtype=np.float64)
    return raw[:, None] if raw.ndim == 1 else raw


def compute_grad_hess(task: str, labels: np.ndarray, raw_scores: np.ndarray) -> GradHess:
    """Gradient and hessian of the task loss at the given raw scores.

    Shapes: (n,) raw for binary/regression, (n, n_classes) for multiclass
    (diagonal hessian approximation). 1-D inputs come back as (n, 1) columns.
    """
    raw = _as_2d(raw_scores)
    labels = np.asarray(labels)
    if labels.shape[0] != raw.shape[0]:
        raise ValueError("labels and raw_scores disagree on instance count")
    if task == "regression":
        if raw.shape[1] != 1:
            raise ValueError("regression expects a single raw score per instance")
        g = raw - labels.astype(np.float64)[:, None]
        h = np.ones_like(g)
    elif task == "binary":
        if raw.shape[1] != 1:
            raise ValueError("binary expects a single raw score per instance")
        p = sigmoid(raw)
        g = p - labels.astype(np.float64)[:, None]
        h = p * (1.0 - p)
    elif task == "multiclass":
        if raw.shape[1] < 2:
            raise ValueError("multiclass expects one raw score per class")
        p = softmax(raw)
        g = p.copy()
        g[np.arange(raw.shape[0]), labels.astype(np.int64)] -= 1.0
        h = p * (1.0 - p)
    else:
        raise ValueError(f"unknown task {task!r}")
    return GradHess(g=g, h=h)


def total_loss(task: str, labels: np.ndarray, raw_scores: np.ndarray) -> float:
    """Sum of the per-instance training loss (no regularization term)."""
    raw = _as_2d(raw_scores)
    labels = np.asarray(labels)
    if task == "regression":
        return float(0.5 * np.sum((labels.astype(np.float64) - raw[:, 0]) ** 2))
    if task == "binary":
        x = raw[:, 0]
        y = labels.astype(np.float64)
        # log(1 + e^x) - y*x, computed stably
        return float(np.sum(np.logaddexp(0.0, x) - y * x))
    if task == "multiclass":
        lse = np.log(np.sum(np.exp(raw - raw.max(axis=1, keepdims=True)), axis=1))
        lse += raw.max(axis=1)
        picked = raw[np.arange(raw.shape[0]), labels.astype(np.int64)]
        return float(np.sum(lse - picked))
    raise ValueError(f"unknown task {task!r}")
