"""Feature quantization: per-client quantile sketches, merged global bin edges.

Clients summarize each feature column as the sorted distinct values with
instance counts (exact at this scale), send the summaries to the aggregator,
and the aggregator merges them into one set of equal-frequency cut values per
feature. Cut positions are decided with integer arithmetic, so merging is
order-invariant and immune to duplicated counts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

TASKS = ("binary", "multiclass", "regression")


@dataclass(frozen=True)
class FeatureSketch:
    """Exact distribution summary of one feature column.

    ``values`` are the sorted distinct finite values, ``counts`` the number of
    instances per value; ``sum(counts) == total_count``.
    """

    feature_id: int
    values: np.ndarray
    counts: np.ndarray
    total_count: int
    max_bins: int

    def edges(self, max_bins: int | None = None) -> np.ndarray:
        """Equal-frequency cut values (at most ``max_bins - 1`` of them)."""
        b = self.max_bins if max_bins is None else max_bins
        return _weighted_quantile_edges(self.values, self.counts, b)


def _weighted_quantile_edges(values: np.ndarray, counts: np.ndarray, max_bins: int) -> np.ndarray:
    """Cut values splitting a weighted distribution into ~equal-count bins.

    Cut k (k = 1..max_bins-1) lands after the first distinct value whose
    cumulative count W satisfies W * max_bins >= k * total, and the edge is
    the midpoint to the next distinct value. Pure integer comparisons: the
    result is invariant under scaling all counts by a common factor.
    """
    m = values.shape[0]
    if m <= 1:
        return np.empty(0, dtype=np.float64)
    cum = np.cumsum(counts.astype(np.int64))
    total = int(cum[-1])
    targets = np.arange(1, max_bins, dtype=np.int64) * total
    cut_idx = np.searchsorted(cum * np.int64(max_bins), targets, side="left")
    cut_idx = np.unique(cut_idx[cut_idx <= m - 2])
    edges = (values[cut_idx] + values[cut_idx + 1]) / 2.0
    return np.unique(edges)


def build_sketch(column: np.ndarray, max_bins: int, feature_id: int = 0) -> FeatureSketch:
    """Summarize one feature column for bin-edge construction.

    Raises on empty or non-finite input; missing values must be filtered by
    the caller (they are binned to bin 0 later, not sketched).
    """
    column = np.asarray(column, dtype=np.float64)
    if column.size == 0:
        raise ValueError("empty feature")
    if not np.all(np.isfinite(column)):
        raise ValueError("non-finite feature value")
    if max_bins < 2:
        raise ValueError(f"max_bins must be >= 2, got {max_bins}")
    values, counts = np.unique(column, return_counts=True)
    return FeatureSketch(
        feature_id=feature_id,
        values=values,
        counts=counts.astype(np.int64),
        total_count=int(column.size),
        max_bins=max_bins,
    )


def merge_sketches(sketches: list[FeatureSketch], max_bins: int) -> np.ndarray:
    """Merge per-client sketches of one feature into global cut values.

    Concatenates the distinct (value, count) pairs, combines duplicates and
    re-derives exact weighted quantile cuts; the result does not depend on
    the order of ``sketches``.
    """
    if not sketches:
        raise ValueError("no sketches to merge")
    ids = {s.feature_id for s in sketches}
    if len(ids) != 1:
        raise ValueError(f"sketches refer to different features: {sorted(ids)}")
    pooled: dict[float, int] = {}
    for sketch in sketches:
        for v, c in zip(sketch.values.tolist(), sketch.counts.tolist()):
            pooled[v] = pooled.get(v, 0) + c
    values = np.array(sorted(pooled), dtype=np.float64)
    counts = np.array([pooled[v] for v in values.tolist()], dtype=np.int64)
    return _weighted_quantile_edges(values, counts, max_bins)


@dataclass(frozen=True)
class GlobalBins:
    """Merged per-feature cut values shared by every participant."""

    per_feature_edges: list[np.ndarray]
    bin_count: int

    def __post_init__(self):
        for f, edges in enumerate(self.per_feature_edges):
            if edges.size and np.any(np.diff(edges) <= 0):
                raise ValueError(f"edges for feature {f} not strictly increasing")
            if edges.size + 1 > self.bin_count:
                raise ValueError(f"feature {f} has more than {self.bin_count} bins")

    @property
    def n_features(self) -> int:
        return len(self.per_feature_edges)

    def n_bins(self, feature: int) -> int:
        return self.per_feature_edges[feature].size + 1

    @property
    def bins_per_feature(self) -> np.ndarray:
        return np.array([e.size + 1 for e in self.per_feature_edges], dtype=np.int64)


def bin_value(x: float, edges: np.ndarray) -> int:
    """Bin index of a raw value: the count of edges strictly below it.

    ``x <= edges[i]`` lands in bin i; missing (NaN) values go to bin 0.
    """
    if np.isnan(x):
        return 0
    return int(np.searchsorted(edges, x, side="left"))


def bin_column(column: np.ndarray, edges: np.ndarray) -> np.ndarray:
    out = np.searchsorted(edges, column, side="left")
    out[np.isnan(column)] = 0
    return out


@dataclass
class BinnedDataset:
    """Quantized feature matrix plus labels; the unit all training runs on."""

    bins: np.ndarray  # (n_rows, n_features) uint16, C-contiguous
    labels: np.ndarray
    task: str
    n_classes: int

    @property
    def n_rows(self) -> int:
        return self.bins.shape[0]

    @property
    def n_features(self) -> int:
        return self.bins.shape[1]


def bin_dataset(
    features: np.ndarray,
    labels: np.ndarray,
    global_bins: GlobalBins,
    task: str,
    n_classes: int = 0,
) -> BinnedDataset:
    """Quantize a raw numeric matrix against global bin edges."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2:
        raise ValueError(f"feature matrix must be 2-D, got {features.ndim}-D")
    if features.shape[1] != global_bins.n_features:
        raise ValueError(
            f"feature count mismatch: data has {features.shape[1]}, "
            f"bins have {global_bins.n_features}"
        )
    labels = np.asarray(labels)
    if labels.shape[0] != features.shape[0]:
        raise ValueError("labels length must match row count")
    if task not in TASKS:
        raise ValueError(f"unknown task {task!r}")
    bins = np.empty(features.shape, dtype=np.uint16)
    for f in range(features.shape[1]):
        bins[:, f] = bin_column(features[:, f], global_bins.per_feature_edges[f])
    if task == "regression":
        labels = labels.astype(np.float64)
    else:
        labels = labels.astype(np.int64)
        if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
            raise ValueError("class index out of range")
    return BinnedDataset(bins=np.ascontiguousarray(bins), labels=labels, task=task, n_classes=n_classes)
