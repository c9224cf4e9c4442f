import math

import numpy as np
import pytest

from dsgnn import autodiff as ad
from dsgnn.autodiff import Tensor
from dsgnn.errors import ConfigError, ShapeMismatchError
from dsgnn.nn import (
    MLP,
    OptimConfig,
    Parameter,
    adam_step,
    mae,
    mlp_forward,
    mse_loss,
    one_cycle_lr,
)


class TestMlpForward:
    def test_identity_weights_linear(self):
        w = Parameter("w", np.eye(3))
        b = Parameter("b", np.zeros(3))
        x = np.random.default_rng(0).normal(size=(4, 3))
        out = mlp_forward(Tensor(x), [(w, b, "linear")])
        assert np.array_equal(out.data, x)

    def test_zero_weights_yield_bias(self):
        w = Parameter("w", np.zeros((3, 2)))
        b = Parameter("b", np.array([0.5, -1.0]))
        out = mlp_forward(Tensor(np.ones((5, 3))), [(w, b, "linear")])
        assert np.allclose(out.data, np.tile([0.5, -1.0], (5, 1)))

    def test_one_by_one_affine(self):
        w = Parameter("w", np.array([[2.0]]))
        b = Parameter("b", np.array([1.0]))
        out = mlp_forward(Tensor(np.array([[3.0]])), [(w, b, "linear")])
        assert out.data.item() == pytest.approx(7.0)

    def test_shape_mismatch(self):
        w = Parameter("w", np.ones((3, 2)))
        b = Parameter("b", np.zeros(2))
        with pytest.raises(ShapeMismatchError):
            mlp_forward(Tensor(np.ones((4, 5))), [(w, b, "linear")])

    def test_default_depth_two(self):
        mlp = MLP("m", [4, 8, 2], np.random.default_rng(1))
        assert len(mlp.layers) == 2
        assert len(mlp.parameters()) == 4
        out = mlp(Tensor(np.zeros((3, 4))))
        assert out.data.shape == (3, 2)

    def test_deterministic_init(self):
        a = MLP("m", [4, 8, 2], np.random.default_rng(7))
        b = MLP("m", [4, 8, 2], np.random.default_rng(7))
        for pa, pb in zip(a.parameters(), b.parameters()):
            assert np.array_equal(pa.data, pb.data)


class TestLayerNorm:
    def test_constant_row_zero_before_affine(self):
        x = Tensor(np.full((2, 5), 3.7))
        out = ad.layer_norm(x, Tensor(np.ones(5)), Tensor(np.zeros(5)))
        assert np.abs(out.data).max() < 1e-12

    def test_two_point_row(self):
        x = Tensor(np.array([[1.0, -1.0]]))
        out = ad.layer_norm(x, Tensor(np.ones(2)), Tensor(np.zeros(2)))
        want = 1.0 / math.sqrt(1.0 + 1e-5)
        assert out.data[0, 0] == pytest.approx(want, abs=1e-12)
        assert out.data[0, 1] == pytest.approx(-want, abs=1e-12)

    def test_rows_standardized(self):
        rng = np.random.default_rng(2)
        x = Tensor(rng.normal(size=(10, 16)) * 4 + 2)
        out = ad.layer_norm(x, Tensor(np.ones(16)), Tensor(np.zeros(16)))
        assert np.abs(out.data.mean(axis=1)).max() < 1e-9
        assert np.abs(out.data.std(axis=1) - 1.0).max() < 1e-4  # eps shrinks slightly


class TestAdam:
    def test_zero_gradient_fixed_point(self):
        p = Parameter("p", np.array([1.0, 2.0]))
        p.tensor.grad = np.zeros(2)
        before = p.data.copy()
        adam_step([p], OptimConfig(), step=1)
        assert np.array_equal(p.data, before)

    def test_missing_gradient_fixed_point(self):
        p = Parameter("p", np.array([1.0]))
        adam_step([p], OptimConfig(), step=1)
        assert np.array_equal(p.data, [1.0])

    def test_first_step_magnitude(self):
        p = Parameter("p", np.array([0.0]))
        p.tensor.grad = np.array([1.0])
        adam_step([p], OptimConfig(learning_rate=0.001), step=1)
        assert p.data[0] == pytest.approx(-0.001, rel=1e-6)

    def test_step_counter_advances(self):
        p = Parameter("p", np.array([0.0]))
        for k in range(3):
            p.tensor.grad = np.array([1.0])
            adam_step([p], OptimConfig(), step=k + 1)
        assert p.step_count == 3


class TestOneCycle:
    CFG = OptimConfig(learning_rate=0.001)

    def test_starts_at_base(self):
        assert one_cycle_lr(self.CFG, 1, 100) == pytest.approx(0.001)

    def test_start_below_peak(self):
        peak_step = int(0.3 * 100) + 1
        assert one_cycle_lr(self.CFG, 1, 100) < one_cycle_lr(self.CFG, peak_step, 100)

    def test_peak_value(self):
        lrs = [one_cycle_lr(self.CFG, s, 200) for s in range(1, 201)]
        assert max(lrs) == pytest.approx(0.01, rel=1e-2)

    def test_decays_to_zero(self):
        assert one_cycle_lr(self.CFG, 100, 100) == pytest.approx(0.0, abs=1e-12)

    def test_monotone_warmup(self):
        lrs = [one_cycle_lr(self.CFG, s, 100) for s in range(1, 31)]
        assert all(a < b for a, b in zip(lrs, lrs[1:]))


class TestMse:
    def test_equal_is_zero(self):
        x = Tensor(np.array([1.0, 2.0]))
        assert mse_loss(x, Tensor(np.array([1.0, 2.0]))).data.item() == 0.0

    def test_unit_error(self):
        loss = mse_loss(Tensor(np.array([1.0, 1.0])), Tensor(np.zeros(2)))
        assert loss.data.item() == pytest.approx(1.0)

    def test_single_element(self):
        loss = mse_loss(Tensor(np.array([3.0])), Tensor(np.array([0.0])))
        assert loss.data.item() == pytest.approx(9.0)

    def test_nonnegative_random(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            a, b = rng.normal(size=(2, 6))
            assert mse_loss(Tensor(a), Tensor(b)).data.item() >= 0.0

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            mse_loss(Tensor(np.zeros(2)), Tensor(np.zeros(3)))

    def test_gradient(self):
        pred = Tensor(np.array([1.0, 2.0]), requires_grad=True)
        loss = mse_loss(pred, Tensor(np.array([0.0, 0.0])))
        ad.backward(loss)
        assert np.allclose(pred.grad, pred.data)  # d/dp mean(p^2) = 2p/B


class TestOptimConfigValidation:
    def test_bad_lr(self):
        with pytest.raises(ConfigError):
            OptimConfig(learning_rate=0.0)

    def test_bad_batch(self):
        with pytest.raises(ConfigError):
            OptimConfig(batch_size=0)

    def test_bad_epochs(self):
        with pytest.raises(ConfigError):
            OptimConfig(epochs=0)


def test_mae_helper():
    assert mae(np.array([1.0, 3.0]), np.array([0.0, 1.0])) == pytest.approx(1.5)


def test_mlp_finite_difference():
    rng = np.random.default_rng(11)
    mlp = MLP("m", [3, 6, 2], rng)
    x = rng.normal(size=(4, 3))

    def loss_value():
        out = mlp(Tensor(x))
        return ad.sum_all(ad.mul(out, out))

    loss = loss_value()
    ad.backward(loss)
    h = 1e-6
    worst = 0.0
    for p in mlp.parameters():
        flat = p.data.ravel()
        gflat = p.grad.ravel()
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + h
            fp = loss_value().data.item()
            flat[k] = orig - h
            fm = loss_value().data.item()
            flat[k] = orig
            fd = (fp - fm) / (2 * h)
            worst = max(worst, abs(fd - gflat[k]) / max(1.0, abs(fd), abs(gflat[k])))
    assert worst < 1e-7
