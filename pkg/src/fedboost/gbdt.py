"""Histogram-driven tree growth and ensemble prediction.

Trees split on bin indices, never raw values; growth is level-wise and driven
purely by per-(node, feature, bin) gradient/hessian sums, so the same grower
serves both the pooled trainer and the federated aggregator. All tie-breaking
is deterministic (lowest feature index, then lowest threshold).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from fedboost import kernels
from fedboost.binning import BinnedDataset
from fedboost.losses import GradHess, sigmoid, softmax


@dataclass(frozen=True)
class HyperParams:
    """Training knobs shared by pooled and federated runs.

    ``reg_lambda`` is the L2 term used in split gains, leaf weights, and the
    regularized gradients that drive minimal-variance sampling.
    """

    eta: float = 0.1
    reg_lambda: float = 0.1
    max_depth: int = 6
    max_bin: int = 256
    rounds: int = 200
    early_stop_rounds: int = 0  # 0 disables early stopping
    min_gain: float = 0.0
    min_child: int = 1

    def __post_init__(self):
        if self.eta <= 0:
            raise ValueError("eta must be > 0")
        if self.reg_lambda < 0:
            raise ValueError("reg_lambda must be >= 0")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.max_bin < 2:
            raise ValueError("max_bin must be >= 2")
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if self.early_stop_rounds < 0:
            raise ValueError("early_stop_rounds must be >= 0")
        if self.min_gain < 0:
            raise ValueError("min_gain must be >= 0")
        if self.min_child < 1:
            raise ValueError("min_child must be >= 1")


# ---------------------------------------------------------------------------
# gradient histograms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HistLayout:
    """Ragged per-feature histogram layout: feature f owns cells
    offsets[f] .. offsets[f] + bins_per_feature[f]."""

    bins_per_feature: np.ndarray  # int64 (n_features,)
    offsets: np.ndarray  # int64 (n_features,)
    total_cells: int

    @classmethod
    def from_bins(cls, bins_per_feature) -> "HistLayout":
        bpf = np.asarray(bins_per_feature, dtype=np.int64)
        offsets = np.zeros(bpf.shape[0], dtype=np.int64)
        np.cumsum(bpf[:-1], out=offsets[1:])
        return cls(bins_per_feature=bpf, offsets=offsets, total_cells=int(bpf.sum()))

    @property
    def max_bins(self) -> int:
        return int(self.bins_per_feature.max())


@dataclass
class GradHessHistogram:
    """Per-(feature, bin) gradient sums for one tree node (rectangular view;
    bins beyond a feature's own bin count stay zero)."""

    node_id: int
    sum_g: np.ndarray  # (n_features, max_bins)
    sum_h: np.ndarray
    count: np.ndarray  # int64


def accumulate_level(
    data: BinnedDataset,
    g: np.ndarray,
    h: np.ndarray,
    rows: np.ndarray,
    slots: np.ndarray,
    n_slots: int,
    layout: HistLayout,
) -> np.ndarray:
    """Kernel wrapper: packed (g/h/count, slot, cell) sums for one level."""
    stats = np.zeros((3, n_slots, layout.total_cells), dtype=np.float64)
    kernels.hist_accumulate(
        data.bins,
        np.ascontiguousarray(rows, dtype=np.int64),
        np.ascontiguousarray(slots, dtype=np.int32),
        np.ascontiguousarray(g, dtype=np.float64),
        np.ascontiguousarray(h, dtype=np.float64),
        layout.offsets,
        stats,
    )
    return stats


def _unpack_hist(stats_row: np.ndarray, layout: HistLayout):
    """Ragged cell vector -> rectangular (n_features, max_bins) arrays."""
    n_features = layout.bins_per_feature.shape[0]
    width = layout.max_bins
    sum_g = np.zeros((n_features, width), dtype=np.float64)
    sum_h = np.zeros((n_features, width), dtype=np.float64)
    count = np.zeros((n_features, width), dtype=np.int64)
    for f in range(n_features):
        start = layout.offsets[f]
        nb = layout.bins_per_feature[f]
        sum_g[f, :nb] = stats_row[0, start : start + nb]
        sum_h[f, :nb] = stats_row[1, start : start + nb]
        count[f, :nb] = stats_row[2, start : start + nb].astype(np.int64)
    return sum_g, sum_h, count


def _pack_hist(hist: GradHessHistogram, layout: HistLayout) -> np.ndarray:
    stats = np.zeros((3, 1, layout.total_cells), dtype=np.float64)
    for f in range(layout.bins_per_feature.shape[0]):
        start = layout.offsets[f]
        nb = layout.bins_per_feature[f]
        stats[0, 0, start : start + nb] = hist.sum_g[f, :nb]
        stats[1, 0, start : start + nb] = hist.sum_h[f, :nb]
        stats[2, 0, start : start + nb] = hist.count[f, :nb]
    return stats


def build_grad_histogram(
    data: BinnedDataset,
    gh: GradHess,
    node_assignment: np.ndarray,
    sample_mask: np.ndarray,
    max_bins: int,
    output: int = 0,
) -> dict[int, GradHessHistogram]:
    """Histograms of every node that holds at least one sampled instance.

    ``node_assignment`` maps each instance to a node id (negative = none);
    ``sample_mask`` is the index set of selected instances. For multiclass,
    ``output`` picks the gradient column.
    """
    rows = np.asarray(sample_mask, dtype=np.int64)
    assignment = np.asarray(node_assignment, dtype=np.int64)
    if rows.size and assignment.shape[0] < data.n_rows:
        raise ValueError("node_assignment must cover every instance")
    if np.any(data.bins >= max_bins):
        raise ValueError("bin index out of range")
    layout = HistLayout.from_bins(np.full(data.n_features, max_bins, dtype=np.int64))
    node_of_sample = assignment[rows] if rows.size else np.empty(0, dtype=np.int64)
    node_ids = np.unique(node_of_sample[node_of_sample >= 0])
    id_to_slot = {int(n): i for i, n in enumerate(node_ids)}
    slots = np.full(rows.shape[0], -1, dtype=np.int32)
    for pos, node in enumerate(node_of_sample.tolist()):
        if node >= 0:
            slots[pos] = id_to_slot[node]
    stats = accumulate_level(
        data, gh.g[:, output], gh.h[:, output], rows, slots, max(len(node_ids), 1), layout
    )
    out = {}
    for i, node in enumerate(node_ids):
        sum_g, sum_h, count = _unpack_hist(stats[:, i], layout)
        out[int(node)] = GradHessHistogram(int(node), sum_g, sum_h, count)
    return out


# ---------------------------------------------------------------------------
# split finding and leaf weights
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SplitCandidate:
    feature: int
    bin_threshold: int
    gain: float
    left_stats: tuple[float, float, int]  # (G, H, count)
    right_stats: tuple[float, float, int]


def leaf_weight(g_sum: float, h_sum: float, reg_lambda: float) -> float:
    """Optimal leaf output -G/(H + lambda)."""
    denom = h_sum + reg_lambda
    if denom <= 0:
        raise ValueError(f"h_sum + reg_lambda must be > 0, got {denom}")
    return -g_sum / denom


def best_splits_batch(
    stats: np.ndarray,
    layout: HistLayout,
    reg_lambda: float,
    min_gain: float,
    min_child: int,
):
    """Best split per node over packed level histograms.

    Scans every feature left to right; the candidate score is the standard
    second-order gain 0.5*(GL^2/(HL+lam) + GR^2/(HR+lam) - G^2/(H+lam)) minus
    ``min_gain``. Returns a list with a SplitCandidate or None per node;
    ties resolve to the lowest (feature, threshold).
    """
    feature, threshold, gain, left, right = kernels.best_splits(
        stats,
        layout.offsets,
        layout.bins_per_feature,
        float(reg_lambda),
        float(min_gain),
        float(min_child),
    )
    results = []
    for i in range(stats.shape[1]):
        if feature[i] < 0:
            results.append(None)
            continue
        results.append(
            SplitCandidate(
                feature=int(feature[i]),
                bin_threshold=int(threshold[i]),
                gain=float(gain[i]),
                left_stats=(float(left[i, 0]), float(left[i, 1]), int(left[i, 2])),
                right_stats=(float(right[i, 0]), float(right[i, 1]), int(right[i, 2])),
            )
        )
    return results


def best_split(
    hist: GradHessHistogram,
    reg_lambda: float,
    min_gain: float = 0.0,
    min_child: int = 1,
    bins_per_feature: np.ndarray | None = None,
) -> SplitCandidate | None:
    """Best positive-gain split of a single node, or None."""
    if bins_per_feature is None:
        bins_per_feature = np.full(hist.sum_g.shape[0], hist.sum_g.shape[1], dtype=np.int64)
    layout = HistLayout.from_bins(bins_per_feature)
    return best_splits_batch(
        _pack_hist(hist, layout), layout, reg_lambda, min_gain, min_child
    )[0]


# ---------------------------------------------------------------------------
# trees
# ---------------------------------------------------------------------------


@dataclass
class Tree:
    """Flat-array regression tree over bin indices.

    ``feature[i] < 0`` marks a leaf; internal nodes route ``bin <= threshold``
    to ``left``. ``class_id`` names the output column this tree adjusts.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    weight: np.ndarray
    class_id: int = 0

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.feature < 0))

    def depth(self) -> int:
        depths = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):
            if self.feature[i] >= 0:
                depths[self.left[i]] = depths[i] + 1
                depths[self.right[i]] = depths[i] + 1
        return int(depths.max())

    def predict(self, bins: np.ndarray) -> np.ndarray:
        out = np.empty(bins.shape[0], dtype=np.float64)
        kernels.predict_rows(bins, self.feature, self.threshold, self.left, self.right, self.weight, out)
        return out


@dataclass(frozen=True)
class SplitDecision:
    node_id: int
    feature: int
    bin_threshold: int
    left_id: int
    right_id: int


@dataclass
class LevelPlan:
    """What one growth level decided: nodes leafed out and nodes split."""

    new_leaves: list[int]
    splits: list[SplitDecision]
    next_active: list[int]


class TreeGrower:
    """Level-wise tree assembly from aggregated node histograms.

    Call ``advance`` once per level with the stacked histograms of
    ``active_nodes`` (same order); it finalizes leaves, decides splits, and
    returns the plan instance routers must apply. ``finish`` emits the tree.
    """

    def __init__(self, params: HyperParams, layout: HistLayout, class_id: int = 0):
        self.params = params
        self.layout = layout
        self.class_id = class_id
        self.depth = 0
        self.active_nodes: list[int] = [0]
        self._stats: dict[int, tuple[float, float, int]] = {}
        self._feature = [-1]
        self._threshold = [0]
        self._left = [-1]
        self._right = [-1]
        self._weight = [0.0]

    @property
    def done(self) -> bool:
        return not self.active_nodes

    def _new_node(self) -> int:
        self._feature.append(-1)
        self._threshold.append(0)
        self._left.append(-1)
        self._right.append(-1)
        self._weight.append(0.0)
        return len(self._feature) - 1

    def _make_leaf(self, node_id: int):
        g_sum, h_sum, _ = self._stats[node_id]
        self._weight[node_id] = leaf_weight(g_sum, h_sum, self.params.reg_lambda)

    def advance(self, stats: np.ndarray) -> LevelPlan:
        if self.done:
            raise RuntimeError("tree is fully grown")
        if self.depth == 0:
            nb0 = int(self.layout.bins_per_feature[0])
            root_g = float(np.sum(stats[0, 0, :nb0]))
            root_h = float(np.sum(stats[1, 0, :nb0]))
            root_c = int(np.sum(stats[2, 0, :nb0]))
            self._stats[0] = (root_g, root_h, root_c)
        candidates = best_splits_batch(
            stats,
            self.layout,
            self.params.reg_lambda,
            self.params.min_gain,
            self.params.min_child,
        )
        plan = LevelPlan(new_leaves=[], splits=[], next_active=[])
        for slot, node_id in enumerate(self.active_nodes):
            cand = candidates[slot]
            if cand is None:
                self._make_leaf(node_id)
                plan.new_leaves.append(node_id)
                continue
            left_id = self._new_node()
            right_id = self._new_node()
            self._feature[node_id] = cand.feature
            self._threshold[node_id] = cand.bin_threshold
            self._left[node_id] = left_id
            self._right[node_id] = right_id
            self._stats[left_id] = cand.left_stats
            self._stats[right_id] = cand.right_stats
            plan.splits.append(
                SplitDecision(node_id, cand.feature, cand.bin_threshold, left_id, right_id)
            )
            plan.next_active.extend((left_id, right_id))
        self.depth += 1
        if self.depth >= self.params.max_depth:
            # children sit at max depth: finalize them without another level
            for node_id in plan.next_active:
                self._make_leaf(node_id)
                plan.new_leaves.append(node_id)
            plan.next_active = []
        self.active_nodes = plan.next_active
        return plan

    def finish(self) -> Tree:
        if not self.done:
            raise RuntimeError("tree still has active nodes")
        return Tree(
            feature=np.asarray(self._feature, dtype=np.int32),
            threshold=np.asarray(self._threshold, dtype=np.int32),
            left=np.asarray(self._left, dtype=np.int32),
            right=np.asarray(self._right, dtype=np.int32),
            weight=np.asarray(self._weight, dtype=np.float64),
            class_id=self.class_id,
        )


class NodeRouter:
    """Tracks each sampled instance's current node while one tree grows."""

    def __init__(self, data: BinnedDataset, rows: np.ndarray):
        self.data = data
        self.rows = np.ascontiguousarray(rows, dtype=np.int64)
        self.node_of_row = np.full(data.n_rows, -1, dtype=np.int64)
        self.node_of_row[self.rows] = 0

    def slots_for(self, active_nodes: list[int]) -> np.ndarray:
        """Histogram slot per sampled row (-1 when its node is not active)."""
        nodes = self.node_of_row[self.rows]
        top = max(active_nodes) if active_nodes else 0
        slot_of_node = np.full(top + 1, -1, dtype=np.int32)
        slot_of_node[np.asarray(active_nodes, dtype=np.int64)] = np.arange(
            len(active_nodes), dtype=np.int32
        )
        clipped = np.clip(nodes, 0, top)
        slots = slot_of_node[clipped]
        slots[(nodes < 0) | (nodes > top)] = -1
        return slots

    def level_histograms(self, active_nodes: list[int], g: np.ndarray, h: np.ndarray, layout: HistLayout):
        slots = self.slots_for(active_nodes)
        return accumulate_level(self.data, g, h, self.rows, slots, len(active_nodes), layout)

    def apply(self, plan: LevelPlan):
        nodes = self.node_of_row[self.rows]
        touched = list(plan.new_leaves) + [s.node_id for s in plan.splits]
        if not touched:
            return
        top = max(max(touched), int(nodes.max(initial=0)))
        # per-node routing tables for this level; -2 = untouched, -1 = leafed out
        action = np.full(top + 1, -2, dtype=np.int64)
        feat = np.zeros(top + 1, dtype=np.int64)
        thr = np.zeros(top + 1, dtype=np.int64)
        go_l = np.zeros(top + 1, dtype=np.int64)
        go_r = np.zeros(top + 1, dtype=np.int64)
        for leaf in plan.new_leaves:
            if leaf <= top:
                action[leaf] = -1
        for split in plan.splits:
            action[split.node_id] = 1
            feat[split.node_id] = split.feature
            thr[split.node_id] = split.bin_threshold
            go_l[split.node_id] = split.left_id
            go_r[split.node_id] = split.right_id
        live = nodes >= 0
        nd = nodes[live]
        act = action[nd]
        new_nodes = nd.copy()
        new_nodes[act == -1] = -1
        split_mask = act == 1
        if np.any(split_mask):
            nd_s = nd[split_mask]
            row_s = self.rows[live][split_mask]
            bv = self.data.bins[row_s, feat[nd_s]]
            new_nodes[split_mask] = np.where(bv <= thr[nd_s], go_l[nd_s], go_r[nd_s])
        nodes[live] = new_nodes
        self.node_of_row[self.rows] = nodes


# ---------------------------------------------------------------------------
# ensembles
# ---------------------------------------------------------------------------


@dataclass
class Ensemble:
    """Additive model: base score plus eta-weighted trees."""

    task: str
    n_classes: int
    n_features: int
    eta: float
    base_score: np.ndarray  # (n_outputs,)
    trees: list[Tree] = field(default_factory=list)

    @property
    def n_outputs(self) -> int:
        return self.n_classes if self.task == "multiclass" else 1


def predict_raw(model: Ensemble, bins: np.ndarray) -> np.ndarray:
    """Raw scores (n, n_outputs): base plus eta-weighted tree outputs, summed
    tree by tree in training order."""
    bins = np.atleast_2d(bins)
    if bins.shape[1] != model.n_features:
        raise ValueError(
            f"row has {bins.shape[1]} features, model expects {model.n_features}"
        )
    scores = np.tile(model.base_score, (bins.shape[0], 1)).astype(np.float64)
    bins = np.ascontiguousarray(bins, dtype=np.uint16)
    for tree in model.trees:
        scores[:, tree.class_id] += model.eta * tree.predict(bins)
    return scores


def output_from_raw(task: str, raw: np.ndarray):
    """Apply the task link to raw scores.

    regression -> values; binary -> (p, class) with p = sigmoid(raw) and
    class 1 iff p >= 0.5; multiclass -> (probs, argmax class, lowest on ties).
    """
    raw = np.atleast_2d(np.asarray(raw, dtype=np.float64))
    if task == "regression":
        return raw[:, 0]
    if task == "binary":
        p = sigmoid(raw[:, 0])
        return p, (p >= 0.5).astype(np.int64)
    if task == "multiclass":
        probs = softmax(raw)
        return probs, np.argmax(probs, axis=1).astype(np.int64)
    raise ValueError(f"unknown task {task!r}")


def predict_output(model: Ensemble, bins: np.ndarray):
    """Task-level predictions for binned rows (see output_from_raw)."""
    return output_from_raw(model.task, predict_raw(model, bins))
