"""Engine-level checks for the reverse-mode tensor core.

Forward values are compared against plain numpy; backward values against
hand-derived closed forms and a local central-difference oracle that is
independent of the package's own gradient checker.
"""

import numpy as np
import pytest

from screplay import autodiff as ad
from screplay.errors import (
    ContractError,
    DegenerateInputError,
    DtypeError,
    StateError,
)


# -- oracles ----------------------------------------------------------------


def fd_gradient(f, x, h=1e-6):
    """Central-difference gradient of scalar ``f`` at ``x``, entry by entry.

    ``f`` takes a float64 array and returns a Python float.  This is a
    plain numeric oracle with no knowledge of the tape.
    """
    x = np.array(x, dtype=np.float64)
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f(x)
        flat[i] = orig - h
        fm = f(x)
        flat[i] = orig
        gf[i] = (fp - fm) / (2.0 * h)
    return g


def leaf(arr):
    return ad.Tensor(np.asarray(arr, dtype=np.float64), requires_grad=True)


def assert_grad_close(tensor, expected, tol=1e-7):
    assert tensor.grad is not None
    np.testing.assert_allclose(tensor.grad, expected, rtol=tol, atol=tol)


# -- forward values ----------------------------------------------------------


def test_forward_values_match_numpy():
    rng = np.random.default_rng(0)
    a = rng.normal(size=(3, 4))
    b = rng.normal(size=(4, 2))
    ta, tb = leaf(a), leaf(b)
    np.testing.assert_allclose(ad.matmul(ta, tb).data, a @ b)
    np.testing.assert_allclose(ad.matmul(ta, leaf(b.T), transpose_b=True).data, a @ b)
    np.testing.assert_allclose(ad.add(ta, leaf(a)).data, a + a)
    np.testing.assert_allclose(ad.sub(ta, leaf(2 * a)).data, -a)
    np.testing.assert_allclose(ad.mul(ta, leaf(a)).data, a * a)
    np.testing.assert_allclose(ad.scale(ta, -2.5).data, -2.5 * a)
    np.testing.assert_allclose(ad.relu(ta).data, np.maximum(a, 0.0))
    np.testing.assert_allclose(ad.exp(ta).data, np.exp(a))
    np.testing.assert_allclose(ad.log(ad.exp(ta)).data, a, atol=1e-12)
    np.testing.assert_allclose(ad.row_sum(ta).data, a.sum(axis=1))
    np.testing.assert_allclose(ad.row_mean(ta).data, a.mean(axis=1))
    np.testing.assert_allclose(ad.sum_all(ta).data, a.sum())
    np.testing.assert_allclose(ad.mean_all(ta).data, a.mean())
    v = rng.normal(size=5)
    np.testing.assert_allclose(ad.dot(leaf(v), leaf(2 * v)).data, 2 * v @ v)
    np.testing.assert_allclose(ad.row_max_detached(ta), a.max(axis=1))
    assert isinstance(ad.row_max_detached(ta), np.ndarray)


def test_add_broadcasts_bias_row():
    a = leaf([[1.0, 2.0], [3.0, 4.0]])
    b = leaf([10.0, 20.0])
    out = ad.add(a, b)
    np.testing.assert_allclose(out.data, [[11.0, 22.0], [13.0, 24.0]])
    ad.sum_all(out).backward()
    # bias gradient collapses over the broadcast rows
    assert_grad_close(b, [2.0, 2.0])


# -- hand-derived gradients ---------------------------------------------------


def test_dot_gradient_closed_form():
    x = leaf([3.0])
    out = ad.dot(x, x)
    assert out.item() == pytest.approx(9.0)
    out.backward()
    assert_grad_close(x, [6.0])


def test_relu_gradient_is_indicator_mask():
    x = leaf([-2.0, -0.5, 0.5, 3.0])
    ad.sum_all(ad.relu(x)).backward()
    assert_grad_close(x, [0.0, 0.0, 1.0, 1.0])


def test_l2_normalize_forward_and_gradient():
    x = leaf([[3.0, 4.0]])
    out = ad.l2_normalize(x)
    np.testing.assert_allclose(out.data, [[0.6, 0.8]])

    def f(arr):
        row = arr / np.linalg.norm(arr, axis=-1, keepdims=True)
        return float(row.sum())

    ad.sum_all(out).backward()
    assert_grad_close(x, fd_gradient(f, x.data), tol=1e-6)


def test_l2_normalize_unit_rows_and_idempotence():
    rng = np.random.default_rng(1)
    x = leaf(rng.normal(size=(6, 5)))
    once = ad.l2_normalize(x)
    np.testing.assert_allclose(np.linalg.norm(once.data, axis=1), 1.0, atol=1e-12)
    twice = ad.l2_normalize(once)
    np.testing.assert_allclose(twice.data, once.data, atol=1e-12)


def test_l2_normalize_rejects_zero_row():
    x = leaf([[1.0, 1.0], [0.0, 0.0]])
    with pytest.raises(DegenerateInputError):
        ad.l2_normalize(x)


def test_composite_graph_matches_fd_oracle():
    rng = np.random.default_rng(2)
    a0 = rng.normal(size=(4, 3))
    b0 = rng.normal(size=(3, 3))

    def build(a_arr):
        a = leaf(a_arr)
        b = leaf(b0)
        h = ad.relu(ad.add(ad.matmul(a, b), b_row))
        z = ad.l2_normalize(ad.add(h, floor))
        return a, ad.mean_all(ad.mul(z, z) + ad.exp(ad.scale(z, 0.1)))

    b_row = leaf(rng.normal(size=3))
    floor = leaf(np.full(3, 0.5))
    a, out = build(a0)
    out.backward()

    def f(a_arr):
        h = np.maximum(a_arr @ b0 + b_row.data, 0.0)
        hf = h + floor.data
        z = hf / np.linalg.norm(hf, axis=-1, keepdims=True)
        return float(np.mean(z * z + np.exp(0.1 * z)))

    assert_grad_close(a, fd_gradient(f, a0), tol=1e-5)


def test_matmul_transpose_b_gradient_matches_fd():
    rng = np.random.default_rng(3)
    r0 = rng.normal(size=(3, 4))
    w0 = rng.normal(size=(2, 4))
    r, w = leaf(r0), leaf(w0)
    ad.sum_all(ad.matmul(r, w, transpose_b=True)).backward()
    assert_grad_close(r, fd_gradient(lambda a: float((a @ w0.T).sum()), r0), tol=1e-6)
    assert_grad_close(w, fd_gradient(lambda a: float((r0 @ a.T).sum()), w0), tol=1e-6)


# -- tape semantics -----------------------------------------------------------


def test_backward_accumulates_exactly_twice():
    x = leaf([1.0, 2.0, 3.0])
    out = ad.dot(x, x)
    out.backward()
    once = x.grad.copy()
    out.backward()
    np.testing.assert_array_equal(x.grad, 2.0 * once)
    x.zero_grad()
    assert x.grad is None


def test_backward_requires_scalar_output():
    x = leaf([[1.0, 2.0]])
    with pytest.raises(ContractError):
        ad.relu(x).backward()


def test_backward_on_plain_constant_is_an_error():
    c = ad.Tensor(np.float64(3.0))
    with pytest.raises(StateError):
        c.backward()


def test_constants_do_not_join_the_tape():
    c = ad.Tensor(np.array([1.0, 2.0]))
    out = ad.sum_all(ad.mul(c, c))
    assert not out.requires_grad
    assert out.is_leaf


def test_mixed_dtypes_rejected():
    a = ad.Tensor(np.ones(3, dtype=np.float32), requires_grad=True)
    b = leaf(np.ones(3))
    with pytest.raises(DtypeError):
        ad.add(a, b)


def test_item_requires_scalar():
    assert ad.Tensor(np.float64(2.5)).item() == pytest.approx(2.5)
    with pytest.raises(ContractError):
        leaf([1.0, 2.0]).item()


def test_operator_sugar_matches_primitives():
    x = leaf([1.0, -2.0])
    y = leaf([3.0, 4.0])
    np.testing.assert_allclose((x + y).data, [4.0, 2.0])
    np.testing.assert_allclose((x - y).data, [-2.0, -6.0])
    np.testing.assert_allclose((x * y).data, [3.0, -8.0])
    np.testing.assert_allclose((2.0 * x).data, [2.0, -4.0])
    np.testing.assert_allclose((x * 2.0).data, [2.0, -4.0])
    np.testing.assert_allclose((-x).data, [-1.0, 2.0])


def test_precision_enum_maps_to_dtypes():
    assert ad.Precision.TRAIN32.dtype == np.float32
    assert ad.Precision.CHECK64.dtype == np.float64
    assert ad.TRAIN_DTYPE == np.float32 and ad.CHECK_DTYPE == np.float64


# -- optimizer ----------------------------------------------------------------


def test_sgd_step_updates_in_place_and_clears_grads():
    p = leaf([1.0])
    p.grad = np.array([2.0])
    ad.sgd_step([p], lr=0.1)
    np.testing.assert_allclose(p.data, [0.8])
    assert p.grad is None


def test_sgd_step_without_gradient_is_an_error():
    p = leaf([1.0])
    with pytest.raises(StateError):
        ad.sgd_step([p], lr=0.1)


def test_gradient_descent_converges_on_quadratic():
    p = leaf([0.0])
    target = leaf([5.0])
    for _ in range(100):
        d = ad.sub(p, target)
        ad.dot(d, d).backward()
        p.data -= 0.1 * p.grad
        p.zero_grad()
        target.zero_grad()
    assert abs(p.data[0] - 5.0) < 1e-3


# -- the packaged checker ------------------------------------------------------


def test_grad_check_passes_on_smooth_graph():
    rng = np.random.default_rng(4)
    x = leaf(rng.normal(size=(3, 3)))

    def fn(t):
        return ad.mean_all(ad.exp(ad.scale(t, 0.3)))

    report = ad.grad_check(fn, [x], tolerance=1e-5, h=1e-4)
    assert report.passed
    assert report.max_rel_error < 1e-7


def test_grad_check_flags_untracked_dependence():
    # a detour through raw .data looks constant to the tape but not to
    # finite differences, so the checker must report a large error
    x = leaf(np.array([0.7, -0.4]))

    def fn(t):
        hidden = ad.Tensor(np.float64((t.data ** 2).sum()))
        return ad.sum_all(ad.scale(t, 0.0)) + hidden

    report = ad.grad_check(fn, [x], tolerance=1e-5, h=1e-4)
    assert not report.passed
    assert report.max_rel_error > 0.5


def test_grad_check_zero_gradients_pass_with_no_magnitude():
    x = leaf(np.array([1.0, 2.0]))

    def fn(t):
        return ad.sum_all(ad.scale(t, 0.0))

    report = ad.grad_check(fn, [x], tolerance=1e-5, h=1e-4)
    assert report.passed
    assert report.max_rel_error == 0.0
    assert report.min_magnitude == float("inf")


def test_grad_check_rejects_non_float64_inputs():
    x = ad.Tensor(np.ones(2, dtype=np.float32), requires_grad=True)
    with pytest.raises(StateError):
        ad.grad_check(lambda t: ad.sum_all(t), [x])


def test_grad_check_rejects_non_scalar_outputs():
    x = leaf(np.ones((2, 2)))
    with pytest.raises(ContractError):
        ad.grad_check(lambda t: ad.relu(t), [x])
