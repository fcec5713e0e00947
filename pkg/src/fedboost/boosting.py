"""Pooled (non-federated) trainer over one binned dataset.

Same losses, sampling, and tree grower as the federated path, but driven
directly: no sketch merging, no message folding. Serves as the centralized
baseline the federated protocol is checked against — a single-client
federation with the same seeds must reproduce its trees exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from fedboost.binning import BinnedDataset, GlobalBins, build_sketch
from fedboost.gbdt import Ensemble, HistLayout, HyperParams, NodeRouter, TreeGrower, output_from_raw
from fedboost.losses import compute_grad_hess
from fedboost.metrics import compute_metrics, primary_metric
from fedboost.sampling import SamplingConfig, select_for_round


def bins_from_matrix(x: np.ndarray, max_bin: int) -> GlobalBins:
    """Global bin edges straight from a pooled feature matrix."""
    edges = []
    for f in range(x.shape[1]):
        col = x[:, f]
        finite = col[np.isfinite(col)]
        if finite.size == 0:
            raise ValueError(f"feature {f} has no finite values")
        edges.append(build_sketch(finite, max_bin, feature_id=f).edges())
    return GlobalBins(per_feature_edges=edges, bin_count=max_bin)


def base_score_from_labels(task: str, labels: np.ndarray, n_classes: int) -> np.ndarray:
    if task == "regression":
        return np.array([float(np.sum(labels)) / labels.shape[0]], dtype=np.float64)
    if task == "binary":
        pos = int(np.sum(labels == 1))
        if pos == 0 or pos == labels.shape[0]:
            raise ValueError("binary labels must contain both classes")
        p = pos / labels.shape[0]
        return np.array([np.log(p / (1.0 - p))], dtype=np.float64)
    if task == "multiclass":
        seen = np.bincount(labels.astype(np.int64), minlength=n_classes)
        if np.any(seen == 0):
            raise ValueError(f"classes {np.flatnonzero(seen == 0).tolist()} have no instances")
        return np.zeros(n_classes, dtype=np.float64)
    raise ValueError(f"unknown task {task!r}")


@dataclass
class TrainResult:
    model: Ensemble
    global_bins: GlobalBins
    eval_history: list[dict] = field(default_factory=list)
    primary_history: list[float] = field(default_factory=list)
    best_round: int = 0
    best_metric: float = float("nan")
    rounds_completed: int = 0


def train_pooled(
    train: BinnedDataset,
    valid: BinnedDataset | None,
    global_bins: GlobalBins,
    base_score: np.ndarray,
    params: HyperParams,
    sampling: SamplingConfig,
    on_round=None,
) -> TrainResult:
    """Boosting loop on pooled data with per-round validation metrics and
    the same early-stopping rule as the federated trainer."""
    task = train.task
    model = Ensemble(
        task=task,
        n_classes=train.n_classes,
        n_features=train.n_features,
        eta=params.eta,
        base_score=np.asarray(base_score, dtype=np.float64),
    )
    result = TrainResult(model=model, global_bins=global_bins)
    raw_train = np.tile(model.base_score, (train.n_rows, 1))
    raw_valid = np.tile(model.base_score, (valid.n_rows, 1)) if valid is not None else None
    layout = HistLayout.from_bins(global_bins.bins_per_feature)
    metric_name, higher = primary_metric(task)
    stall = 0
    for round_index in range(1, params.rounds + 1):
        gh = compute_grad_hess(task, train.labels, raw_train)
        rows = select_for_round(sampling, train.n_rows, round_index, gh, params.reg_lambda)
        for output in range(model.n_outputs):
            grower = TreeGrower(params, layout, class_id=output)
            router = NodeRouter(train, rows)
            while not grower.done:
                stats = router.level_histograms(
                    grower.active_nodes, gh.g[:, output], gh.h[:, output], layout
                )
                plan = grower.advance(stats)
                router.apply(plan)
            tree = grower.finish()
            model.trees.append(tree)
            raw_train[:, output] += params.eta * tree.predict(train.bins)
            if raw_valid is not None:
                raw_valid[:, output] += params.eta * tree.predict(valid.bins)
        result.rounds_completed = round_index
        if valid is None:
            continue
        record = compute_metrics(task, valid.labels, output_from_raw(task, raw_valid))
        value = record[metric_name]
        result.eval_history.append(record)
        result.primary_history.append(value)
        improved = (
            np.isnan(result.best_metric)
            or (value > result.best_metric if higher else value < result.best_metric)
        )
        if improved:
            result.best_metric = value
            result.best_round = round_index
            stall = 0
        else:
            stall += 1
        if on_round is not None:
            on_round(result, record, [rows.shape[0]])
        if params.early_stop_rounds and stall >= params.early_stop_rounds:
            break
    return result
