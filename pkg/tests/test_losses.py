import numpy as np
import pytest

from fedboost.losses import compute_grad_hess, sigmoid, softmax, total_loss


# independent loss-value implementations for the finite-difference oracle
def loss_regression(y, raw):
    return 0.5 * (y - raw) ** 2


def loss_binary(y, raw):
    return np.logaddexp(0.0, raw) - y * raw


def loss_multiclass(y, raw):
    shifted = raw - raw.max()
    return float(np.log(np.sum(np.exp(shifted))) + raw.max() - raw[int(y)])


def central_diff(f, x, eps):
    return (f(x + eps) - f(x - eps)) / (2 * eps)


class TestTrivialValues:
    def test_binary_at_zero(self):
        gh = compute_grad_hess("binary", np.array([1]), np.array([0.0]))
        assert gh.g[0, 0] == pytest.approx(-0.5)
        assert gh.h[0, 0] == pytest.approx(0.25)

    def test_regression_zero_residual(self):
        gh = compute_grad_hess("regression", np.array([2.0]), np.array([2.0]))
        assert gh.g[0, 0] == 0.0
        assert gh.h[0, 0] == 1.0

    def test_unknown_task(self):
        with pytest.raises(ValueError, match="unknown task"):
            compute_grad_hess("ordinal", np.array([0]), np.array([0.0]))

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            compute_grad_hess("binary", np.array([0, 1]), np.array([0.0]))


class TestFiniteDifferences:
    eps = 1e-5

    def test_regression(self):
        rng = np.random.default_rng(0)
        y = rng.normal(size=300)
        raw = rng.normal(size=300)
        gh = compute_grad_hess("regression", y, raw)
        for i in range(300):
            g_fd = central_diff(lambda r: loss_regression(y[i], r), raw[i], self.eps)
            h_fd = central_diff(
                lambda r: central_diff(lambda q: loss_regression(y[i], q), r, self.eps),
                raw[i],
                self.eps,
            )
            assert gh.g[i, 0] == pytest.approx(g_fd, rel=1e-6, abs=1e-9)
            assert gh.h[i, 0] == pytest.approx(h_fd, rel=1e-4, abs=1e-4)

    def test_binary(self):
        rng = np.random.default_rng(1)
        y = rng.integers(0, 2, 300)
        raw = rng.normal(scale=2.0, size=300)
        gh = compute_grad_hess("binary", y, raw)
        for i in range(300):
            g_fd = central_diff(lambda r: loss_binary(y[i], r), raw[i], self.eps)
            fd_of_g = central_diff(
                lambda r: compute_grad_hess("binary", y[i : i + 1], np.array([r])).g[0, 0],
                raw[i],
                self.eps,
            )
            assert gh.g[i, 0] == pytest.approx(g_fd, rel=1e-6, abs=1e-9)
            assert gh.h[i, 0] == pytest.approx(fd_of_g, rel=1e-6, abs=1e-9)

    def test_multiclass_diagonal(self):
        rng = np.random.default_rng(2)
        n, n_classes = 200, 4
        y = rng.integers(0, n_classes, n)
        raw = rng.normal(scale=1.5, size=(n, n_classes))
        gh = compute_grad_hess("multiclass", y, raw)
        for i in range(n):
            for c in range(n_classes):
                def f(v, c=c, i=i):
                    r = raw[i].copy()
                    r[c] = v
                    return loss_multiclass(y[i], r)

                g_fd = central_diff(f, raw[i, c], self.eps)
                h_fd = central_diff(lambda v: central_diff(f, v, self.eps), raw[i, c], self.eps)
                assert gh.g[i, c] == pytest.approx(g_fd, rel=1e-6, abs=1e-8)
                assert gh.h[i, c] == pytest.approx(h_fd, rel=1e-3, abs=1e-4)


class TestLinkFunctions:
    def test_sigmoid_stable_extremes(self):
        assert sigmoid(np.array([-800.0]))[0] == pytest.approx(0.0)
        assert sigmoid(np.array([800.0]))[0] == pytest.approx(1.0)

    def test_softmax_rows_sum_to_one(self):
        rng = np.random.default_rng(3)
        p = softmax(rng.normal(scale=30, size=(50, 6)))
        assert np.allclose(p.sum(axis=1), 1.0, atol=1e-12)

    def test_total_loss_matches_sum(self):
        rng = np.random.default_rng(4)
        y = rng.integers(0, 2, 50)
        raw = rng.normal(size=50)
        expected = sum(loss_binary(y[i], raw[i]) for i in range(50))
        assert total_loss("binary", y, raw) == pytest.approx(expected, rel=1e-12)
