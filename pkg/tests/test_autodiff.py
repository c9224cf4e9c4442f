import numpy as np
import pytest

from dsgnn import autodiff as ad
from dsgnn.autodiff import Tensor, backward
from dsgnn.errors import GraphConsumedError, NonFiniteTensorError, ShapeMismatchError


def finite_difference(fn, arrays, h=1e-6):
    """Central-difference gradients of scalar fn w.r.t. each array."""
    grads = []
    for arr in arrays:
        g = np.zeros_like(arr)
        flat = arr.ravel()
        gflat = g.ravel()
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + h
            fp = fn()
            flat[k] = orig - h
            fm = fn()
            flat[k] = orig
            gflat[k] = (fp - fm) / (2 * h)
        grads.append(g)
    return grads


def check_op(build, *shapes, seed=0, tol=1e-7):
    """Compare analytic and finite-difference gradients of a scalar-valued
    function of leaf tensors with the given shapes."""
    rng = np.random.default_rng(seed)
    arrays = [rng.normal(size=s) for s in shapes]
    leaves = [Tensor(a, requires_grad=True) for a in arrays]
    for leaf, arr in zip(leaves, arrays):
        leaf.data = arr  # share storage so the FD loop perturbs the leaf

    loss = build(*leaves)
    backward(loss)
    fd = finite_difference(lambda: build(*leaves).data.item(), arrays)
    for leaf, want in zip(leaves, fd):
        got = leaf.grad if leaf.grad is not None else np.zeros_like(want)
        err = np.abs(got - want).max()
        assert err < tol, f"gradient mismatch {err:.3e}"


def scalarize(t):
    return ad.sum_all(ad.mul(t, t))


class TestOpGradients:
    def test_add_broadcast_bias(self):
        check_op(lambda a, b: scalarize(ad.add(a, b)), (4, 3), (3,))

    def test_sub(self):
        check_op(lambda a, b: scalarize(ad.sub(a, b)), (4, 3), (4, 3))

    def test_mul(self):
        check_op(lambda a, b: scalarize(ad.mul(a, b)), (5, 2), (5, 2))

    def test_matmul(self):
        check_op(lambda a, b: scalarize(ad.matmul(a, b)), (4, 3), (3, 5))

    def test_concat(self):
        check_op(lambda a, b: scalarize(ad.concat([a, b], axis=1)), (3, 2), (3, 4))

    def test_relu(self):
        check_op(lambda a: scalarize(ad.relu(a)), (13,), seed=3)

    def test_sigmoid(self):
        check_op(lambda a: scalarize(ad.sigmoid(a)), (9,))

    def test_silu(self):
        check_op(lambda a: scalarize(ad.silu(a)), (9,))

    def test_gather_rows(self):
        idx = np.array([0, 2, 2, 1])
        check_op(lambda a: scalarize(ad.gather_rows(a, idx)), (3, 4))

    def test_segment_sum(self):
        ids = np.array([0, 0, 2, 2, 2])
        check_op(lambda a: scalarize(ad.segment_sum(a, ids, 4)), (5, 3))

    def test_layer_norm(self):
        check_op(lambda x, g, b: scalarize(ad.layer_norm(x, g, b)), (4, 6), (6,), (6,),
                 tol=1e-6)

    def test_sorted_mean_rows(self):
        check_op(lambda a: scalarize(ad.sorted_mean_rows(a)), (5, 3))

    def test_scale_reshape_sum(self):
        check_op(lambda a: ad.scale(ad.sum_all(ad.reshape(a, (6,))), 0.5), (2, 3))


class TestBackwardSemantics:
    def test_sum_of_squares(self):
        t = Tensor(np.array([1.0, -2.0, 3.0]), requires_grad=True)
        backward(ad.sum_all(ad.mul(t, t)))
        assert np.allclose(t.grad, 2 * t.data)

    def test_unused_parameter_gets_no_grad(self):
        used = Tensor(np.ones(3), requires_grad=True)
        unused = Tensor(np.ones(3), requires_grad=True)
        backward(ad.sum_all(used))
        assert np.allclose(used.grad, 1.0)
        assert unused.grad is None

    def test_graph_consumed(self):
        t = Tensor(np.ones(2), requires_grad=True)
        loss = ad.sum_all(t)
        backward(loss)
        with pytest.raises(GraphConsumedError):
            backward(loss)

    def test_second_forward_allows_backward(self):
        t = Tensor(np.ones(2), requires_grad=True)
        backward(ad.sum_all(t))
        backward(ad.sum_all(t))  # fresh graph
        assert np.allclose(t.grad, 2.0)  # accumulates across passes

    def test_scalar_required(self):
        t = Tensor(np.ones(3), requires_grad=True)
        with pytest.raises(ShapeMismatchError):
            backward(ad.add(t, t))

    def test_shared_subexpression(self):
        t = Tensor(np.array([2.0]), requires_grad=True)
        y = ad.mul(t, t)  # t^2
        loss = ad.sum_all(ad.add(y, y))  # 2 t^2 -> d/dt = 4t
        backward(loss)
        assert np.allclose(t.grad, 8.0)

    def test_grad_off_tensors_record_nothing(self):
        t = Tensor(np.ones(3))
        out = ad.mul(t, t)
        assert not out.requires_grad
        assert out._parents == ()


class TestDiagnostics:
    def test_non_finite_trips(self):
        big = Tensor(np.array([1e308]), requires_grad=True)
        with np.errstate(over="ignore"), pytest.raises(NonFiniteTensorError):
            ad.mul(big, big)  # overflows to inf

    def test_matmul_shape_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            ad.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))

    def test_segment_ids_shape(self):
        with pytest.raises(ShapeMismatchError):
            ad.segment_sum(Tensor(np.ones((4, 2))), np.array([0, 1]), 2)


class TestSortedMeanRows:
    def test_value_is_column_mean(self):
        rng = np.random.default_rng(7)
        x = rng.normal(size=(6, 4))
        got = ad.sorted_mean_rows(Tensor(x)).data
        assert np.allclose(got, x.mean(axis=0, keepdims=True))

    def test_bitwise_permutation_invariance(self):
        rng = np.random.default_rng(8)
        x = rng.normal(size=(50, 8))
        base = ad.sorted_mean_rows(Tensor(x)).data
        for _ in range(5):
            perm = rng.permutation(50)
            assert np.array_equal(ad.sorted_mean_rows(Tensor(x[perm])).data, base)

def test_segment_sum_empty_bucket_zero():
    x = Tensor(np.ones((2, 3)))
    out = ad.segment_sum(x, np.array([0, 2]), 4)
    assert np.array_equal(out.data[1], np.zeros(3))
    assert np.array_equal(out.data[3], np.zeros(3))
