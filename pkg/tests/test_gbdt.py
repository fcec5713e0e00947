import numpy as np
import pytest

from conftest import dyadic
from fedboost.binning import BinnedDataset, GlobalBins, bin_dataset
from fedboost.boosting import base_score_from_labels, bins_from_matrix, train_pooled
from fedboost.gbdt import (
    Ensemble,
    GradHessHistogram,
    HistLayout,
    HyperParams,
    NodeRouter,
    Tree,
    TreeGrower,
    best_split,
    build_grad_histogram,
    leaf_weight,
    predict_output,
    predict_raw,
)
from fedboost.losses import GradHess, compute_grad_hess, total_loss
from fedboost.sampling import SamplingConfig


def hist_from_arrays(g_bins, h_bins, c_bins):
    """(n_features, n_bins) arrays -> single-node histogram."""
    return GradHessHistogram(
        0,
        np.asarray(g_bins, dtype=np.float64),
        np.asarray(h_bins, dtype=np.float64),
        np.asarray(c_bins, dtype=np.int64),
    )


def brute_force_best_split(hist, reg_lambda, min_gain=0.0, min_child=1, bins_per_feature=None):
    """Exhaustive enumeration of every (feature, threshold) with the same
    gain formula; first strict improvement wins."""
    n_features, n_bins = hist.sum_g.shape
    if bins_per_feature is None:
        bins_per_feature = [n_bins] * n_features
    best = None
    best_gain = 0.0
    for f in range(n_features):
        g_tot = float(np.sum(hist.sum_g[f, : bins_per_feature[f]]))
        h_tot = float(np.sum(hist.sum_h[f, : bins_per_feature[f]]))
        c_tot = int(np.sum(hist.count[f, : bins_per_feature[f]]))
        parent = g_tot * g_tot / (h_tot + reg_lambda)
        for t in range(bins_per_feature[f] - 1):
            gl = float(np.sum(hist.sum_g[f, : t + 1]))
            hl = float(np.sum(hist.sum_h[f, : t + 1]))
            cl = int(np.sum(hist.count[f, : t + 1]))
            cr = c_tot - cl
            if cl < min_child or cr < min_child:
                continue
            gr = g_tot - gl
            hr = h_tot - hl
            gain = 0.5 * (gl * gl / (hl + reg_lambda) + gr * gr / (hr + reg_lambda) - parent)
            gain -= min_gain
            if np.isfinite(gain) and gain > best_gain:
                best_gain = gain
                best = (f, t, gain)
    return best


class TestBestSplit:
    def test_symmetric_split_is_worthless(self):
        hist = hist_from_arrays([[1.0, 1.0]], [[1.0, 1.0]], [[1, 1]])
        assert best_split(hist, reg_lambda=0.0) is None

    def test_stated_gain_arithmetic(self):
        hist = hist_from_arrays([[2.0, -2.0]], [[1.0, 1.0]], [[1, 1]])
        cand = best_split(hist, reg_lambda=0.0)
        assert cand is not None
        assert cand.gain == pytest.approx(4.0)
        assert (cand.feature, cand.bin_threshold) == (0, 0)

    def test_matches_brute_force_on_random_histograms(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            n_features = int(rng.integers(1, 5))
            n_bins = int(rng.integers(2, 9))
            g = dyadic(rng, (n_features, n_bins))
            h = np.abs(dyadic(rng, (n_features, n_bins)))
            c = rng.integers(0, 5, (n_features, n_bins))
            h[c == 0] = 0.0
            g[c == 0] = 0.0
            hist = hist_from_arrays(g, h, c)
            lam = float(rng.choice([0.001, 0.01, 0.1, 1.0]))
            got = best_split(hist, reg_lambda=lam)
            want = brute_force_best_split(hist, reg_lambda=lam)
            if want is None:
                assert got is None
            else:
                assert got is not None
                assert (got.feature, got.bin_threshold) == want[:2]
                assert got.gain == want[2]

    def test_tie_prefers_lowest_feature(self):
        g = [[2.0, -2.0], [2.0, -2.0]]
        h = [[1.0, 1.0], [1.0, 1.0]]
        c = [[1, 1], [1, 1]]
        cand = best_split(hist_from_arrays(g, h, c), reg_lambda=0.0)
        assert cand.feature == 0

    def test_tie_prefers_lowest_threshold(self):
        # thresholds 0 and 1 score identically: 4/1 + 4/2 == 4/2 + 4/1
        hist = hist_from_arrays([[2.0, -4.0, 2.0]], [[1.0, 1.0, 1.0]], [[1, 1, 1]])
        cand = best_split(hist, reg_lambda=0.0)
        assert cand.bin_threshold == 0

    def test_min_child_excludes_small_sides(self):
        hist = hist_from_arrays([[2.0, -2.0]], [[1.0, 1.0]], [[1, 1]])
        assert best_split(hist, reg_lambda=0.0, min_child=2) is None


class TestLeafWeight:
    def test_zero_gradient(self):
        assert leaf_weight(0.0, 5.0, 1.0) == 0.0

    def test_stated_value(self):
        assert leaf_weight(2.0, 3.0, 1.0) == pytest.approx(-0.5)

    def test_error_on_nonpositive_denominator(self):
        with pytest.raises(ValueError):
            leaf_weight(1.0, 0.0, 0.0)

    def test_grid_scan_argmin(self):
        rng = np.random.default_rng(6)
        for _ in range(200):
            g = float(rng.normal(scale=3))
            h = float(np.abs(rng.normal(scale=2)) + 0.05)
            lam = float(rng.uniform(0.001, 1.0))
            w_star = leaf_weight(g, h, lam)
            span = abs(w_star) * 2 + 1.0
            grid = np.linspace(-span, span, 20001)
            objective = g * grid + 0.5 * (h + lam) * grid**2
            w_grid = grid[int(np.argmin(objective))]
            assert abs(w_star - w_grid) <= (grid[1] - grid[0])


def direct_recursive_tree(bins, g, h, params, bins_per_feature):
    """Independent reference: recursive partitioning with the same gain
    formula, no histogram machinery."""
    nodes = []

    def leaf(g_sum, h_sum):
        nodes.append({"feature": -1, "weight": -g_sum / (h_sum + params.reg_lambda)})
        return len(nodes) - 1

    def grow(rows, depth):
        g_sum = float(np.sum(g[rows]))
        h_sum = float(np.sum(h[rows]))
        if depth >= params.max_depth:
            return leaf(g_sum, h_sum)
        best = None
        best_gain = 0.0
        parent_scores = {}
        for f in range(bins.shape[1]):
            parent_scores[f] = g_sum * g_sum / (h_sum + params.reg_lambda)
        for f in range(bins.shape[1]):
            for t in range(bins_per_feature[f] - 1):
                left = rows[bins[rows, f] <= t]
                right = rows[bins[rows, f] > t]
                if left.size < params.min_child or right.size < params.min_child:
                    continue
                gl, hl = float(np.sum(g[left])), float(np.sum(h[left]))
                gr, hr = float(np.sum(g[right])), float(np.sum(h[right]))
                gain = 0.5 * (
                    gl * gl / (hl + params.reg_lambda)
                    + gr * gr / (hr + params.reg_lambda)
                    - parent_scores[f]
                ) - params.min_gain
                if np.isfinite(gain) and gain > best_gain:
                    best_gain = gain
                    best = (f, t)
        if best is None:
            return leaf(g_sum, h_sum)
        f, t = best
        me = len(nodes)
        nodes.append({"feature": f, "threshold": t})
        nodes[me]["left"] = grow(rows[bins[rows, f] <= t], depth + 1)
        nodes[me]["right"] = grow(rows[bins[rows, f] > t], depth + 1)
        return me

    grow(np.arange(bins.shape[0]), 0)
    return nodes

    # NOTE: node numbering differs from the level-wise grower; compare by routing


def reference_predict(nodes, bins):
    out = np.empty(bins.shape[0])
    for i in range(bins.shape[0]):
        node = 0
        while nodes[node]["feature"] >= 0:
            f, t = nodes[node]["feature"], nodes[node]["threshold"]
            node = nodes[node]["left"] if bins[i, f] <= t else nodes[node]["right"]
        out[i] = nodes[node]["weight"]
    return out


def grow_via_router(data, g, h, params, layout):
    grower = TreeGrower(params, layout)
    router = NodeRouter(data, np.arange(data.n_rows))
    while not grower.done:
        stats = router.level_histograms(grower.active_nodes, g, h, layout)
        plan = grower.advance(stats)
        router.apply(plan)
    return grower.finish()


class TestGrowTree:
    def _data(self, bins_matrix):
        bins_matrix = np.ascontiguousarray(bins_matrix, dtype=np.uint16)
        return BinnedDataset(bins_matrix, np.zeros(bins_matrix.shape[0]), "regression", 0)

    def test_identical_rows_yield_single_leaf(self):
        rng = np.random.default_rng(8)
        data = self._data(np.full((10, 3), 2))
        g = dyadic(rng, 10)
        h = np.abs(dyadic(rng, 10)) + 1.0
        params = HyperParams(eta=0.1, reg_lambda=0.5, max_depth=4, max_bin=8, rounds=1)
        layout = HistLayout.from_bins([8, 8, 8])
        tree = grow_via_router(data, g, h, params, layout)
        assert tree.n_nodes == 1
        assert tree.weight[0] == pytest.approx(-np.sum(g) / (np.sum(h) + 0.5))

    def test_depth_one_perfect_split(self):
        data = self._data(np.array([[0], [0], [1], [1]]))
        g = np.array([1.0, 1.0, -1.0, -1.0])
        h = np.ones(4)
        params = HyperParams(eta=0.1, reg_lambda=0.0, max_depth=1, max_bin=2, rounds=1)
        tree = grow_via_router(data, g, h, params, HistLayout.from_bins([2]))
        assert tree.n_nodes == 3
        assert tree.feature[0] == 0 and tree.threshold[0] == 0
        left, right = tree.left[0], tree.right[0]
        assert tree.weight[left] == pytest.approx(-1.0)
        assert tree.weight[right] == pytest.approx(1.0)

    def test_matches_direct_recursive_reference(self):
        rng = np.random.default_rng(9)
        for trial in range(20):
            n, n_features = 50, 3
            bpf = [int(rng.integers(2, 6)) for _ in range(n_features)]
            bins_matrix = np.column_stack([rng.integers(0, b, n) for b in bpf])
            data = self._data(bins_matrix)
            g = dyadic(rng, n)
            h = np.abs(dyadic(rng, n)) + 0.5
            params = HyperParams(eta=0.1, reg_lambda=0.25, max_depth=2, max_bin=8, rounds=1)
            layout = HistLayout.from_bins(bpf)
            tree = grow_via_router(data, g, h, params, layout)
            reference = direct_recursive_tree(
                data.bins, g, h, params, bpf
            )
            got = tree.predict(data.bins)
            want = reference_predict(reference, data.bins)
            assert np.array_equal(got, want), f"trial {trial}"

    def test_depth_never_exceeds_max(self):
        rng = np.random.default_rng(10)
        bins_matrix = rng.integers(0, 8, (200, 4))
        data = self._data(bins_matrix)
        g = rng.normal(size=200)
        h = np.ones(200)
        for max_depth in (1, 2, 3, 5):
            params = HyperParams(eta=0.1, reg_lambda=0.1, max_depth=max_depth, max_bin=8, rounds=1)
            tree = grow_via_router(data, g, h, params, HistLayout.from_bins([8] * 4))
            assert tree.depth() <= max_depth


class TestBuildGradHistogram:
    def _data(self, bins_matrix):
        return BinnedDataset(
            np.ascontiguousarray(bins_matrix, dtype=np.uint16),
            np.zeros(bins_matrix.shape[0]),
            "regression",
            0,
        )

    def test_empty_sample_mask(self):
        data = self._data(np.array([[0], [1]]))
        gh = GradHess(np.ones((2, 1)), np.ones((2, 1)))
        hists = build_grad_histogram(data, gh, np.zeros(2), np.array([], dtype=np.int64), 4)
        assert hists == {}

    def test_single_instance_single_cell(self):
        data = self._data(np.array([[1, 3, 0]]))
        gh = GradHess(np.array([[2.0]]), np.array([[3.0]]))
        hists = build_grad_histogram(data, gh, np.zeros(1), np.array([0]), 4)
        hist = hists[0]
        for f, b in [(0, 1), (1, 3), (2, 0)]:
            assert hist.sum_g[f, b] == 2.0
            assert hist.sum_h[f, b] == 3.0
            assert hist.count[f, b] == 1
            assert hist.sum_g[f].sum() == 2.0

    def test_node_totals_match_direct_sums(self):
        rng = np.random.default_rng(12)
        n = 200
        data = self._data(rng.integers(0, 16, (n, 4)))
        g = dyadic(rng, n)
        h = np.abs(dyadic(rng, n))
        gh = GradHess(g[:, None], h[:, None])
        assignment = rng.integers(0, 3, n)
        mask = np.flatnonzero(rng.random(n) < 0.7)
        hists = build_grad_histogram(data, gh, assignment, mask, 16)
        for node, hist in hists.items():
            members = mask[assignment[mask] == node]
            for f in range(4):
                assert hist.sum_g[f].sum() == np.sum(g[members])
                assert hist.sum_h[f].sum() == np.sum(h[members])
                assert hist.count[f].sum() == members.size

    def test_out_of_range_bin_rejected(self):
        data = self._data(np.array([[7]]))
        gh = GradHess(np.ones((1, 1)), np.ones((1, 1)))
        with pytest.raises(ValueError, match="bin index out of range"):
            build_grad_histogram(data, gh, np.zeros(1), np.array([0]), 4)


def single_leaf_tree(weight, class_id=0):
    return Tree(
        feature=np.array([-1], dtype=np.int32),
        threshold=np.array([0], dtype=np.int32),
        left=np.array([-1], dtype=np.int32),
        right=np.array([-1], dtype=np.int32),
        weight=np.array([weight], dtype=np.float64),
        class_id=class_id,
    )


class TestPrediction:
    def test_zero_trees_is_base_score(self):
        model = Ensemble("regression", 0, 2, 0.1, np.array([3.0]))
        raw = predict_raw(model, np.zeros((4, 2), dtype=np.uint16))
        assert np.all(raw == 3.0)

    def test_single_leaf_scaling(self):
        model = Ensemble("regression", 0, 1, 0.1, np.array([0.0]), [single_leaf_tree(5.0)])
        raw = predict_raw(model, np.zeros((1, 1), dtype=np.uint16))
        assert raw[0, 0] == pytest.approx(0.5)

    def test_incremental_equals_batch(self):
        rng = np.random.default_rng(13)
        trees = [single_leaf_tree(float(rng.normal())) for _ in range(10)]
        model = Ensemble("regression", 0, 1, 0.1, np.array([0.25]), trees)
        bins = np.zeros((5, 1), dtype=np.uint16)
        batch = predict_raw(model, bins)
        incremental = np.full((5, 1), 0.25)
        for tree in trees:
            incremental[:, 0] += 0.1 * tree.predict(bins)
        assert np.array_equal(batch, incremental)

    def test_shape_mismatch(self):
        model = Ensemble("regression", 0, 3, 0.1, np.array([0.0]))
        with pytest.raises(ValueError):
            predict_raw(model, np.zeros((2, 2), dtype=np.uint16))

    def test_binary_tie_rule(self):
        model = Ensemble("binary", 2, 1, 0.1, np.array([0.0]))
        p, classes = predict_output(model, np.zeros((1, 1), dtype=np.uint16))
        assert p[0] == 0.5
        assert classes[0] == 1

    def test_multiclass_tie_rule(self):
        model = Ensemble("multiclass", 3, 1, 0.1, np.array([1.0, 1.0, 1.0]))
        probs, classes = predict_output(model, np.zeros((1, 1), dtype=np.uint16))
        assert np.allclose(probs, 1 / 3)
        assert classes[0] == 0


class TestMonotoneTrainingLoss:
    def test_loss_non_increasing_without_sampling(self):
        rng = np.random.default_rng(14)
        x = rng.normal(size=(120, 4))
        for task in ("regression", "binary"):
            if task == "regression":
                y = x[:, 0] * 2 + rng.normal(scale=0.1, size=120)
            else:
                y = (x[:, 0] + 0.3 * rng.normal(size=120) > 0).astype(np.int64)
            params = HyperParams(eta=0.1, reg_lambda=0.01, max_depth=3, max_bin=32, rounds=15)
            bins = bins_from_matrix(x, 32)
            base = base_score_from_labels(task, y, 2)
            train = bin_dataset(x, y, bins, task, 2)
            result = train_pooled(train, None, bins, base, params, SamplingConfig())
            model = result.model
            raw = np.tile(model.base_score, (train.n_rows, 1))
            losses = []
            reg_total = 0.0
            for tree in model.trees:
                raw[:, tree.class_id] += params.eta * tree.predict(train.bins)
                reg_total += 0.5 * params.reg_lambda * float(
                    np.sum(tree.weight[tree.feature < 0] ** 2)
                )
                losses.append(total_loss(task, train.labels, raw) + reg_total)
            diffs = np.diff(losses)
            assert np.all(diffs <= 1e-9), f"{task}: loss increased by {diffs.max()}"
