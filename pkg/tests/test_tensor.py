"""Autodiff engine checks: every op against central finite differences,
plus graph mechanics (accumulation, reuse, constants, error paths)."""

import numpy as np
import pytest

from turbotrain import tensor as T
from turbotrain.errors import DomainError, GraphError, ShapeMismatch
from turbotrain.gradcheck import check_tensor_input, run_op_suite

TOL = 1e-4


def test_every_op_matches_finite_differences():
    for name, err in run_op_suite(n_coords=32, seed=0):
        assert err <= TOL, f"{name}: max rel err {err:.3e}"


def test_broadcast_add_gradient(f64, rng):
    # bias broadcast against a (3, 5) activation
    b = rng.standard_normal(5)
    a = rng.standard_normal((3, 5))
    err = check_tensor_input(lambda x: (T.Tensor(a) + x).sum() * 2.0, b, n_coords=5)
    assert err <= TOL


def test_batched_matmul_gradient(f64, rng):
    a = rng.standard_normal((2, 3, 4))
    w = rng.standard_normal((4, 4))
    err = check_tensor_input(lambda x: T.matmul(x, T.Tensor(w)).sum(), a, n_coords=24)
    assert err <= TOL
    err = check_tensor_input(lambda x: T.matmul(T.Tensor(a), x).sum(), w, n_coords=16)
    assert err <= TOL


def test_gradient_accumulates_across_reuse(f64):
    x = T.Tensor(np.array([2.0, 3.0]), requires_grad=True)
    y = (x * x + x * 4.0).sum()
    y.backward()
    np.testing.assert_allclose(x.grad, 2.0 * x.data + 4.0)


def test_gradients_accumulate_until_zeroed(f64):
    x = T.Tensor(np.ones(3), requires_grad=True)
    (x * 2.0).sum().backward()
    (x * 3.0).sum().backward()
    np.testing.assert_allclose(x.grad, np.full(3, 5.0))
    x.grad = None
    (x * 3.0).sum().backward()
    np.testing.assert_allclose(x.grad, np.full(3, 3.0))


def test_shared_gradient_buffers_are_not_mutated(f64):
    # y = a + b hands the same incoming grad to both parents; scaling one
    # parent's grad afterwards must not corrupt the other's
    a = T.Tensor(np.ones(4), requires_grad=True)
    b = T.Tensor(np.ones(4), requires_grad=True)
    (a + b).sum().backward()
    a.grad *= 10.0
    np.testing.assert_allclose(b.grad, np.ones(4))


def test_constants_are_pruned_from_graph():
    c = T.Tensor(np.ones(3), requires_grad=False)
    x = T.Tensor(np.ones(3), requires_grad=True)
    out = x * c
    assert c.grad is None
    out.sum().backward()
    assert c.grad is None
    assert x.grad is not None


def test_backward_requires_scalar():
    x = T.Tensor(np.ones((2, 2)), requires_grad=True)
    with pytest.raises(GraphError):
        (x * 2.0).backward()


def test_log_rejects_nonpositive():
    with pytest.raises(DomainError):
        T.log(T.Tensor(np.array([1.0, -0.5])))


def test_sqrt_rejects_negative():
    with pytest.raises(DomainError):
        T.sqrt(T.Tensor(np.array([-1.0])))


def test_matmul_shape_errors():
    with pytest.raises(ShapeMismatch):
        T.matmul(T.Tensor(np.ones((2, 3))), T.Tensor(np.ones((4, 2))))
    with pytest.raises(ShapeMismatch):
        T.matmul(T.Tensor(np.ones(3)), T.Tensor(np.ones((3, 2))))


def test_precision_context_switches_dtype():
    # float arrays keep their dtype; other inputs take the active default
    assert T.Tensor([1, 2]).data.dtype == np.float32
    assert T.Tensor(np.ones(2, np.float64)).data.dtype == np.float64
    with T.precision(np.float64):
        assert T.Tensor([1, 2]).data.dtype == np.float64
    assert T.Tensor([1, 2]).data.dtype == np.float32


def test_softmax_rows_sum_to_one(rng):
    x = T.Tensor(rng.standard_normal((4, 7)).astype(np.float32))
    y = T.softmax(x, axis=-1)
    np.testing.assert_allclose(y.data.sum(-1), np.ones(4), rtol=1e-5)
    assert np.all(y.data >= 0)


def test_softmax_shift_invariance(rng):
    x = rng.standard_normal((3, 5))
    a = T.softmax(T.Tensor(x)).data
    b = T.softmax(T.Tensor(x + 1000.0)).data
    np.testing.assert_allclose(a, b, atol=1e-9)


def test_layernorm_output_statistics(rng):
    x = T.Tensor(rng.standard_normal((6, 32)).astype(np.float32) * 3 + 1)
    y = T.layernorm(x, T.Tensor(np.ones(32, np.float32)), T.Tensor(np.zeros(32, np.float32)))
    np.testing.assert_allclose(y.data.mean(-1), 0, atol=1e-5)
    np.testing.assert_allclose(y.data.var(-1), 1, atol=1e-3)


def test_gather_tokens_forward(rng):
    x = rng.standard_normal((2, 5, 3)).astype(np.float32)
    idx = np.array([[4, 0], [1, 1]])
    out = T.gather_tokens(T.Tensor(x), idx)
    np.testing.assert_array_equal(out.data[0], x[0, [4, 0]])
    np.testing.assert_array_equal(out.data[1], x[1, [1, 1]])


def test_finite_check_flags_nan():
    assert T.Tensor(np.array([1.0, 2.0])).finite_check()
    assert not T.Tensor(np.array([1.0, np.nan])).finite_check()
    assert not T.Tensor(np.array([np.inf, 1.0])).finite_check()
