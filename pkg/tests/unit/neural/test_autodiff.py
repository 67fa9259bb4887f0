"""
Gradient checks of the numpy autodiff against central finite differences.
"""
import numpy as np
import pytest

from src.neural.autodiff import (
    Tensor,
    embedding,
    gelu,
    layer_norm,
    log_softmax,
    masked_softmax,
    no_grad,
    parameter,
    weighted_cross_entropy,
)


def numeric_grad(loss_fn, tensor: Tensor, eps: float = 1e-6) -> np.ndarray:
    grad = np.zeros_like(tensor.data)
    for index in np.ndindex(tensor.shape):
        original = tensor.data[index]
        tensor.data[index] = original + eps
        plus = loss_fn().item()
        tensor.data[index] = original - eps
        minus = loss_fn().item()
        tensor.data[index] = original
        grad[index] = (plus - minus) / (2 * eps)
    return grad


def check_gradients(loss_fn, *tensors: Tensor) -> None:
    for t in tensors:
        t.zero_grad()
    loss_fn().backward()
    for t in tensors:
        expected = numeric_grad(loss_fn, t)
        np.testing.assert_allclose(t.grad, expected, rtol=1e-4, atol=1e-7)


@pytest.fixture
def gen():
    return np.random.default_rng(0)


class TestElementwiseAndShape:
    """Arithmetic, broadcasting and shape operations."""

    def test_matmul_add_with_broadcast_bias(self, gen):
        """A (3,) bias broadcast over a (2, 4, 3) product receives summed gradients."""
        a = parameter(gen.normal(size=(2, 4, 5)))
        b = parameter(gen.normal(size=(5, 3)))
        bias = parameter(gen.normal(size=(3,)))
        w = gen.normal(size=(2, 4, 3))
        check_gradients(lambda: ((a @ b + bias) * w).sum(), a, b, bias)

    def test_subtraction_and_negation(self, gen):
        x = parameter(gen.normal(size=(3, 2)))
        y = parameter(gen.normal(size=(3, 2)))
        check_gradients(lambda: ((x - y) * (1.0 - x)).sum(), x, y)

    def test_reshape_transpose_and_indexing(self, gen):
        x = parameter(gen.normal(size=(2, 3, 4)))
        w = gen.normal(size=(4, 2, 3))
        check_gradients(lambda: (x.transpose(2, 0, 1) * w).sum(), x)
        check_gradients(lambda: (x.reshape(6, 4)[1:4] * x.reshape(6, 4)[0:3]).sum(), x)

    def test_sum_over_axis(self, gen):
        x = parameter(gen.normal(size=(3, 4)))
        w = gen.normal(size=(3,))
        check_gradients(lambda: (x.sum(axis=1) * w).sum(), x)

    def test_shared_subexpression_accumulates(self, gen):
        """A tensor used twice gets both contributions."""
        x = parameter(gen.normal(size=(4,)))
        check_gradients(lambda: (x * x * x).sum(), x)


class TestFusedOperations:
    """Embedding, layer norm, GELU, softmax and cross entropy."""

    def test_embedding_with_repeated_ids(self, gen):
        weight = parameter(gen.normal(size=(6, 3)))
        ids = np.array([[0, 2, 2], [5, 0, 1]])
        w = gen.normal(size=(2, 3, 3))
        check_gradients(lambda: (embedding(weight, ids) * w).sum(), weight)

    def test_layer_norm(self, gen):
        x = parameter(gen.normal(size=(2, 3, 5)))
        gamma = parameter(gen.normal(size=(5,)))
        beta = parameter(gen.normal(size=(5,)))
        w = gen.normal(size=(2, 3, 5))
        check_gradients(lambda: (layer_norm(x, gamma, beta) * w).sum(), x, gamma, beta)

    def test_layer_norm_output_is_normalized(self, gen):
        x = Tensor(gen.normal(3.0, 2.0, size=(4, 8)))
        out = layer_norm(x, Tensor(np.ones(8)), Tensor(np.zeros(8))).data
        np.testing.assert_allclose(out.mean(axis=-1), 0.0, atol=1e-9)
        np.testing.assert_allclose(out.std(axis=-1), 1.0, atol=1e-4)

    def test_gelu(self, gen):
        x = parameter(gen.normal(size=(3, 4)))
        w = gen.normal(size=(3, 4))
        check_gradients(lambda: (gelu(x) * w).sum(), x)

    def test_masked_softmax(self, gen):
        x = parameter(gen.normal(size=(2, 4, 4)))
        mask = np.tril(np.ones((4, 4), dtype=bool))
        w = gen.normal(size=(2, 4, 4))
        check_gradients(lambda: (masked_softmax(x, mask) * w).sum(), x)

    def test_masked_softmax_rows_sum_to_one(self, gen):
        mask = np.tril(np.ones((5, 5), dtype=bool))
        probs = masked_softmax(Tensor(gen.normal(size=(5, 5))), mask).data
        np.testing.assert_allclose(probs.sum(axis=-1), 1.0, atol=1e-12)
        assert (probs[~mask] == 0).all()

    def test_weighted_cross_entropy(self, gen):
        logits = parameter(gen.normal(size=(2, 3, 7)))
        targets = gen.integers(0, 7, size=(2, 3))
        weights = gen.normal(size=(2, 3))
        check_gradients(lambda: weighted_cross_entropy(logits, targets, weights), logits)

    def test_weighted_cross_entropy_value(self, gen):
        logits = gen.normal(size=(1, 2, 4))
        targets = np.array([[1, 3]])
        weights = np.array([[1.0, 0.5]])
        logp = log_softmax(logits)
        expected = -(logp[0, 0, 1] + 0.5 * logp[0, 1, 3])
        assert weighted_cross_entropy(Tensor(logits), targets, weights).item() == pytest.approx(expected, abs=1e-12)


class TestGradientMode:
    """Graph recording switches."""

    def test_no_grad_builds_no_graph(self, gen):
        x = parameter(gen.normal(size=(3,)))
        with no_grad():
            y = (x * 2.0).sum()
        assert not y.requires_grad

    def test_backward_on_constant_raises(self):
        with pytest.raises(RuntimeError):
            Tensor(np.ones(3)).sum().backward()

    def test_interior_gradients_are_released(self, gen):
        x = parameter(gen.normal(size=(3,)))
        hidden = x * 3.0
        hidden.sum().backward()
        assert hidden.grad is None
        np.testing.assert_allclose(x.grad, 3.0)
