import numpy as np
import pytest

from fedboost.metrics import accuracy, auc_binary, compute_metrics, f1_macro, primary_metric, r2, rmse


def pair_count_auc(scores, labels):
    """O(n^2) oracle: P(pos outranks neg), ties half."""
    pos = np.flatnonzero(labels == 1)
    neg = np.flatnonzero(labels == 0)
    total = 0.0
    for i in pos:
        for j in neg:
            if scores[i] > scores[j]:
                total += 1.0
            elif scores[i] == scores[j]:
                total += 0.5
    return total / (len(pos) * len(neg))


def confusion_f1_macro(pred, labels, n_classes):
    scores = []
    for c in range(n_classes):
        matrix = np.zeros((2, 2), dtype=np.int64)
        for p, y in zip(pred, labels):
            matrix[int(p == c), int(y == c)] += 1
        tp = matrix[1, 1]
        precision = tp / max(matrix[1, :].sum(), 1) if matrix[1, :].sum() else 0.0
        recall = tp / max(matrix[:, 1].sum(), 1) if matrix[:, 1].sum() else 0.0
        scores.append(0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall))
    return float(np.mean(scores))


class TestAccuracy:
    def test_all_correct(self):
        assert accuracy([0, 1, 1], [0, 1, 1]) == 1.0

    def test_all_wrong(self):
        assert accuracy([0, 1], [1, 0]) == 0.0

    def test_count_oracle(self):
        rng = np.random.default_rng(0)
        pred = rng.integers(0, 3, 500)
        labels = rng.integers(0, 3, 500)
        want = sum(int(p == y) for p, y in zip(pred, labels)) / 500
        assert accuracy(pred, labels) == pytest.approx(want)

    def test_empty_or_mismatched(self):
        with pytest.raises(ValueError):
            accuracy([], [])
        with pytest.raises(ValueError):
            accuracy([0], [0, 1])

    def test_joint_permutation_invariance(self):
        rng = np.random.default_rng(1)
        pred = rng.integers(0, 2, 100)
        labels = rng.integers(0, 2, 100)
        perm = rng.permutation(100)
        assert accuracy(pred, labels) == accuracy(pred[perm], labels[perm])


class TestF1Macro:
    def test_perfect(self):
        assert f1_macro([0, 1, 2], [0, 1, 2], 3) == 1.0

    def test_closed_form_for_all_negative_predictions(self):
        pred = np.zeros(100, dtype=np.int64)
        labels = np.concatenate([np.zeros(50, dtype=np.int64), np.ones(50, dtype=np.int64)])
        assert f1_macro(pred, labels, 2) == pytest.approx(1 / 3)

    def test_confusion_matrix_oracle(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            pred = rng.integers(0, 3, 200)
            labels = rng.integers(0, 3, 200)
            assert f1_macro(pred, labels, 3) == pytest.approx(confusion_f1_macro(pred, labels, 3))

    def test_empty(self):
        with pytest.raises(ValueError):
            f1_macro([], [], 2)


class TestAucBinary:
    def test_perfect_separation(self):
        assert auc_binary([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0

    def test_all_ties(self):
        assert auc_binary([0.5, 0.5, 0.5, 0.5], [0, 1, 0, 1]) == 0.5

    def test_single_class_rejected(self):
        with pytest.raises(ValueError):
            auc_binary([0.1, 0.9], [1, 1])

    def test_pair_count_oracle_with_ties(self):
        rng = np.random.default_rng(3)
        for _ in range(30):
            n = 200
            labels = rng.integers(0, 2, n)
            if labels.min() == labels.max():
                labels[0] = 1 - labels[0]
            scores = np.round(rng.random(n), 1)  # coarse grid forces ties
            assert auc_binary(scores, labels) == pytest.approx(
                pair_count_auc(scores, labels), abs=1e-12
            )

    def test_invariant_under_monotone_transform(self):
        rng = np.random.default_rng(4)
        labels = rng.integers(0, 2, 300)
        labels[0], labels[1] = 0, 1
        scores = rng.normal(size=300)
        base = auc_binary(scores, labels)
        assert auc_binary(np.exp(scores), labels) == pytest.approx(base, abs=1e-12)
        assert auc_binary(3 * scores + 7, labels) == pytest.approx(base, abs=1e-12)


class TestRegressionMetrics:
    def test_rmse_zero_on_equality(self):
        assert rmse([1.0, 2.0], [1.0, 2.0]) == 0.0

    def test_rmse_detects_offset(self):
        labels = np.array([1.0, 2.0, 3.0])
        assert rmse(labels + 2.5, labels) == pytest.approx(2.5)

    def test_rmse_direct_formula(self):
        rng = np.random.default_rng(5)
        preds = rng.normal(size=100)
        labels = rng.normal(size=100)
        want = np.sqrt(np.mean((preds - labels) ** 2))
        assert rmse(preds, labels) == pytest.approx(want, abs=1e-12)

    def test_r2_perfect(self):
        assert r2([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == 1.0

    def test_r2_mean_prediction_is_zero(self):
        labels = np.array([1.0, 2.0, 3.0, 6.0])
        preds = np.full(4, labels.mean())
        assert r2(preds, labels) == pytest.approx(0.0)

    def test_r2_direct_formula(self):
        rng = np.random.default_rng(6)
        preds = rng.normal(size=100)
        labels = rng.normal(size=100)
        want = 1 - np.sum((labels - preds) ** 2) / np.sum((labels - labels.mean()) ** 2)
        assert r2(preds, labels) == pytest.approx(want, abs=1e-12)

    def test_r2_zero_variance_rejected(self):
        with pytest.raises(ValueError):
            r2([1.0, 2.0], [3.0, 3.0])


class TestRecords:
    def test_regression_record(self):
        record = compute_metrics("regression", np.array([1.0, 2.0]), np.array([1.0, 2.0]))
        assert record["rmse"] == 0.0 and record["r2"] == 1.0 and record["n"] == 2

    def test_binary_record_has_auc(self):
        proba = np.array([0.2, 0.8])
        classes = np.array([0, 1])
        record = compute_metrics("binary", np.array([0, 1]), (proba, classes))
        assert record["accuracy"] == 1.0 and record["auc"] == 1.0

    def test_primary_metric_orientation(self):
        assert primary_metric("regression") == ("rmse", False)
        assert primary_metric("binary") == ("accuracy", True)
        assert primary_metric("multiclass") == ("accuracy", True)
