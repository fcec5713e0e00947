"""Aggregator/client protocol for simulated horizontal-federated training.

Setup merges client feature sketches into global bins and derives the base
score from label aggregates. Each round then broadcasts the model, lets every
client sample and compute gradients locally, and grows one tree (one per
class for multiclass) level by level from client histograms folded in
ascending client id order — the only payload clients ever send is
per-(node, feature, bin) gradient sums.

Messages are explicit value types so a wire transport could replace the
in-process calls without touching the protocol logic. A client failure
surfaces as an exception and aborts the round; there is no partial
aggregation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from fedboost.binning import BinnedDataset, GlobalBins, bin_dataset, build_sketch, merge_sketches
from fedboost.gbdt import (
    Ensemble,
    HistLayout,
    HyperParams,
    NodeRouter,
    TreeGrower,
    output_from_raw,
    predict_raw,
)
from fedboost.losses import GradHess, compute_grad_hess
from fedboost.metrics import compute_metrics, primary_metric
from fedboost.sampling import SamplingConfig, select_for_round
from fedboost.seeding import derive_seed


@dataclass
class ClientSplits:
    """One client's encoded (pre-binning) feature matrices and labels."""

    client_id: int
    train_x: np.ndarray
    train_y: np.ndarray
    valid_x: np.ndarray
    valid_y: np.ndarray
    test_x: np.ndarray | None = None
    test_y: np.ndarray | None = None


@dataclass
class RoundMessage:
    """One client's histogram payload for the current tree level: packed
    (g/h/count, active node, histogram cell) sums."""

    client_id: int
    stats: np.ndarray  # (3, n_active_nodes, total_cells)
    sampled_count: int


class ClientState:
    """Client-side training state: binned splits plus cached raw scores."""

    def __init__(
        self,
        client_id: int,
        train: BinnedDataset,
        valid: BinnedDataset,
        test: BinnedDataset | None,
        sampling: SamplingConfig,
    ):
        self.client_id = client_id
        self.train = train
        self.valid = valid
        self.test = test
        self.sampling = sampling
        self.raw_train: np.ndarray | None = None
        self.raw_valid: np.ndarray | None = None
        self.raw_test: np.ndarray | None = None
        self._gh: GradHess | None = None
        self._rows: np.ndarray | None = None
        self._router: NodeRouter | None = None

    def init_scores(self, base_score: np.ndarray):
        n_out = base_score.shape[0]
        self.raw_train = np.tile(base_score, (self.train.n_rows, 1))
        self.raw_valid = np.tile(base_score, (self.valid.n_rows, 1))
        if self.test is not None:
            self.raw_test = np.tile(base_score, (self.test.n_rows, 1))

    def round_begin(self, round_index: int, reg_lambda: float):
        """Sample this round's instances and compute gradients (model from
        the previous broadcast; round 1 falls back to the base score)."""
        self._gh = compute_grad_hess(self.train.task, self.train.labels, self.raw_train)
        self._rows = select_for_round(
            self.sampling, self.train.n_rows, round_index, self._gh, reg_lambda
        )

    @property
    def sampled_count(self) -> int:
        return int(self._rows.shape[0])

    def tree_begin(self):
        self._router = NodeRouter(self.train, self._rows)

    def level_histograms(self, active_nodes: list[int], output: int, layout: HistLayout) -> RoundMessage:
        stats = self._router.level_histograms(
            active_nodes, self._gh.g[:, output], self._gh.h[:, output], layout
        )
        return RoundMessage(self.client_id, stats, self.sampled_count)

    def apply_plan(self, plan):
        self._router.apply(plan)

    def receive_tree(self, tree, eta: float):
        """Model broadcast, incrementally: fold the new tree into the caches."""
        self.raw_train[:, tree.class_id] += eta * tree.predict(self.train.bins)
        self.raw_valid[:, tree.class_id] += eta * tree.predict(self.valid.bins)
        if self.test is not None:
            self.raw_test[:, tree.class_id] += eta * tree.predict(self.test.bins)


@dataclass
class FederationState:
    """Aggregator-side bookkeeping across rounds."""

    model: Ensemble
    global_bins: GlobalBins
    round: int = 0
    eval_history: list[dict] = field(default_factory=list)
    primary_history: list[float] = field(default_factory=list)
    best_round: int = 0
    best_metric: float = float("nan")
    stall_count: int = 0


def setup(splits: list[ClientSplits], max_bin: int, task: str, n_classes: int):
    """Merge client sketches into global bins and derive the base score.

    Base score: regression -> global label mean; binary -> log-odds of the
    global positive rate; multiclass -> zero vector (every class must appear
    somewhere in the federation).
    """
    if not splits:
        raise ValueError("need at least one client")
    n_features = splits[0].train_x.shape[1]
    for sp in splits:
        if sp.train_x.shape[1] != n_features:
            raise ValueError(
                f"client {sp.client_id} has {sp.train_x.shape[1]} features, expected {n_features}"
            )
    per_feature_edges = []
    for f in range(n_features):
        sketches = []
        for sp in splits:
            col = sp.train_x[:, f]
            finite = col[np.isfinite(col)]
            if finite.size:
                sketches.append(build_sketch(finite, max_bin, feature_id=f))
        if not sketches:
            raise ValueError(f"feature {f} has no finite values on any client")
        per_feature_edges.append(merge_sketches(sketches, max_bin))
    bins = GlobalBins(per_feature_edges=per_feature_edges, bin_count=max_bin)

    if task == "regression":
        total = sum(float(np.sum(sp.train_y)) for sp in splits)
        count = sum(sp.train_y.shape[0] for sp in splits)
        base = np.array([total / count], dtype=np.float64)
    elif task == "binary":
        pos = sum(int(np.sum(sp.train_y == 1)) for sp in splits)
        count = sum(sp.train_y.shape[0] for sp in splits)
        if pos == 0 or pos == count:
            raise ValueError("a class is present in zero clients")
        p = pos / count
        base = np.array([np.log(p / (1.0 - p))], dtype=np.float64)
    elif task == "multiclass":
        seen = np.zeros(n_classes, dtype=np.int64)
        for sp in splits:
            seen += np.bincount(sp.train_y.astype(np.int64), minlength=n_classes)
        if np.any(seen == 0):
            missing = np.flatnonzero(seen == 0).tolist()
            raise ValueError(f"classes {missing} are present in zero clients")
        base = np.zeros(n_classes, dtype=np.float64)
    else:
        raise ValueError(f"unknown task {task!r}")
    return bins, base


def make_clients(
    splits: list[ClientSplits],
    bins: GlobalBins,
    task: str,
    n_classes: int,
    sampling: SamplingConfig,
    sampling_seed: int = 0,
) -> list[ClientState]:
    """Bin every client's splits against the global edges (ascending id)."""
    clients = []
    for sp in sorted(splits, key=lambda s: s.client_id):
        seed = derive_seed(sampling_seed, "client", sp.client_id)
        cfg = SamplingConfig(sampling.method, sampling.fraction, seed)
        clients.append(
            ClientState(
                client_id=sp.client_id,
                train=bin_dataset(sp.train_x, sp.train_y, bins, task, n_classes),
                valid=bin_dataset(sp.valid_x, sp.valid_y, bins, task, n_classes),
                test=None
                if sp.test_x is None
                else bin_dataset(sp.test_x, sp.test_y, bins, task, n_classes),
                sampling=cfg,
            )
        )
    return clients


def _fold_messages(messages: list[RoundMessage]) -> np.ndarray:
    """Sum client payloads in ascending client id order (pinned so floating
    aggregation is reproducible)."""
    messages = sorted(messages, key=lambda m: m.client_id)
    stats = messages[0].stats.copy()
    for msg in messages[1:]:
        stats += msg.stats
    return stats


def run_round(state: FederationState, clients: list[ClientState], params: HyperParams):
    """One boosting round: broadcast, sample, grow one tree per output."""
    round_index = state.round + 1
    for client in clients:
        client.round_begin(round_index, params.reg_lambda)
    n_outputs = state.model.n_outputs
    layout = HistLayout.from_bins(state.global_bins.bins_per_feature)
    for output in range(n_outputs):
        grower = TreeGrower(params, layout, class_id=output)
        for client in clients:
            client.tree_begin()
        while not grower.done:
            messages = [
                client.level_histograms(grower.active_nodes, output, layout)
                for client in clients
            ]
            stats = _fold_messages(messages)
            plan = grower.advance(stats)
            for client in clients:
                client.apply_plan(plan)
        tree = grower.finish()
        state.model.trees.append(tree)
        for client in clients:
            client.receive_tree(tree, state.model.eta)
    state.round = round_index
    return state


def pooled_validation(clients: list[ClientState]):
    """Concatenated validation labels and cached raw scores, client order."""
    labels = np.concatenate([c.valid.labels for c in clients])
    raw = np.concatenate([c.raw_valid for c in clients], axis=0)
    return labels, raw


def evaluate_global(state: FederationState, clients: list[ClientState]) -> dict:
    """Task metrics over the union of every client's validation set."""
    labels, raw = pooled_validation(clients)
    if labels.shape[0] == 0:
        raise ValueError("empty validation union")
    task = state.model.task
    return compute_metrics(task, labels, output_from_raw(task, raw))


def early_stop_check(eval_history: list[float], patience: int, higher_is_better: bool) -> bool:
    """True iff the metric has not strictly improved for `patience`
    consecutive trailing rounds."""
    if patience < 1:
        raise ValueError("patience must be >= 1")
    if not eval_history:
        return False
    best = eval_history[0]
    stall = 0
    for value in eval_history[1:]:
        improved = value > best if higher_is_better else value < best
        if improved:
            best = value
            stall = 0
        else:
            stall += 1
    return stall >= patience


def train_federated(
    clients: list[ClientState],
    global_bins: GlobalBins,
    base_score: np.ndarray,
    task: str,
    n_classes: int,
    params: HyperParams,
    on_round=None,
):
    """Run the full round loop with early stopping; returns final state."""
    n_features = global_bins.n_features
    model = Ensemble(
        task=task,
        n_classes=n_classes,
        n_features=n_features,
        eta=params.eta,
        base_score=np.asarray(base_score, dtype=np.float64),
    )
    state = FederationState(model=model, global_bins=global_bins)
    for client in clients:
        client.init_scores(model.base_score)
    metric_name, higher = primary_metric(task)
    for _ in range(params.rounds):
        run_round(state, clients, params)
        record = evaluate_global(state, clients)
        value = record[metric_name]
        state.eval_history.append(record)
        state.primary_history.append(value)
        improved = (
            np.isnan(state.best_metric)
            or (value > state.best_metric if higher else value < state.best_metric)
        )
        if improved:
            state.best_metric = value
            state.best_round = state.round
            state.stall_count = 0
        else:
            state.stall_count += 1
        if on_round is not None:
            on_round(state, record, [c.sampled_count for c in clients])
        if params.early_stop_rounds and early_stop_check(
            state.primary_history, params.early_stop_rounds, higher
        ):
            break
    return state


def evaluate_local_vs_global(state: FederationState, clients: list[ClientState]) -> list[dict]:
    """Per-client primary metric on the local test set minus the global
    evaluation score; RMSE deltas are negated so positive means improvement."""
    task = state.model.task
    metric_name, higher = primary_metric(task)
    global_record = evaluate_global(state, clients)
    global_value = global_record[metric_name]
    out = []
    for client in clients:
        if client.test is None:
            raise ValueError(f"client {client.client_id} has no local test split")
        local_record = compute_metrics(
            task, client.test.labels, output_from_raw(task, client.raw_test)
        )
        local_value = local_record[metric_name]
        delta = (local_value - global_value) if higher else (global_value - local_value)
        out.append(
            {
                "client_id": client.client_id,
                "local": local_value,
                "global": global_value,
                "delta": delta,
            }
        )
    return out
