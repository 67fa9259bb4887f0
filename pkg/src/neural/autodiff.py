"""
Reverse-mode automatic differentiation over numpy arrays.

A ``Tensor`` records the tensors it was computed from and a closure that pushes
its gradient back to them. ``backward`` walks the graph in reverse topological
order. All arithmetic is float64.

Only the operations the causal transformer needs are provided; heavier ones
(layer norm, softmax with mask, cross-entropy) are fused with hand-written
backward passes.
"""
from contextlib import contextmanager
from typing import Callable, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

_grad_enabled = True

ArrayLike = Union["Tensor", np.ndarray, float, int]


@contextmanager
def no_grad():
    """Disable graph recording inside the block."""
    global _grad_enabled
    previous = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = previous


def is_grad_enabled() -> bool:
    return _grad_enabled


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum grad over the axes numpy broadcast to reach it from shape."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(
        self,
        data,
        requires_grad: bool = False,
        parents: Tuple["Tensor", ...] = (),
        backward: Optional[Callable[[np.ndarray], None]] = None,
        name: Optional[str] = None,
    ):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self._parents = parents
        self._backward = backward
        self.name = name

    def __repr__(self):
        label = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{label})"

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def numpy(self) -> np.ndarray:
        return self.data

    def zero_grad(self) -> None:
        self.grad = None

    def accumulate(self, grad: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.array(grad, dtype=np.float64, copy=True)
        else:
            self.grad += grad

    # ------------------------------------------------------------------
    # graph construction
    # ------------------------------------------------------------------

    @staticmethod
    def _make(data: np.ndarray, parents: Sequence["Tensor"], backward: Callable[[np.ndarray], None]) -> "Tensor":
        if _grad_enabled and any(p.requires_grad for p in parents):
            return Tensor(data, requires_grad=True, parents=tuple(parents), backward=backward)
        return Tensor(data)

    def backward(self, grad: Optional[np.ndarray] = None) -> None:
        """Accumulate d(self)/d(leaf) into every leaf that requires grad."""
        if not self.requires_grad:
            raise RuntimeError("backward called on a tensor that does not require grad")
        order: List[Tensor] = []
        visited = set()
        stack: List[Tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))

        self.accumulate(np.ones_like(self.data) if grad is None else grad)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)
                # interior gradients are not needed after propagation
                node.grad = None if node._parents else node.grad

    # ------------------------------------------------------------------
    # elementwise arithmetic
    # ------------------------------------------------------------------

    def __add__(self, other: ArrayLike) -> "Tensor":
        other = as_tensor(other)

        def backward(g):
            if self.requires_grad:
                self.accumulate(_unbroadcast(g, self.shape))
            if other.requires_grad:
                other.accumulate(_unbroadcast(g, other.shape))
        return Tensor._make(self.data + other.data, (self, other), backward)

    __radd__ = __add__

    def __neg__(self) -> "Tensor":
        return self * -1.0

    def __sub__(self, other: ArrayLike) -> "Tensor":
        return self + (-as_tensor(other))

    def __rsub__(self, other: ArrayLike) -> "Tensor":
        return as_tensor(other) + (-self)

    def __mul__(self, other: ArrayLike) -> "Tensor":
        other = as_tensor(other)

        def backward(g):
            if self.requires_grad:
                self.accumulate(_unbroadcast(g * other.data, self.shape))
            if other.requires_grad:
                other.accumulate(_unbroadcast(g * self.data, other.shape))
        return Tensor._make(self.data * other.data, (self, other), backward)

    __rmul__ = __mul__

    def __matmul__(self, other: ArrayLike) -> "Tensor":
        other = as_tensor(other)

        def backward(g):
            if self.requires_grad:
                self.accumulate(_unbroadcast(g @ np.swapaxes(other.data, -1, -2), self.shape))
            if other.requires_grad:
                other.accumulate(_unbroadcast(np.swapaxes(self.data, -1, -2) @ g, other.shape))
        return Tensor._make(self.data @ other.data, (self, other), backward)

    # ------------------------------------------------------------------
    # shape
    # ------------------------------------------------------------------

    def reshape(self, *shape: int) -> "Tensor":
        original = self.shape

        def backward(g):
            self.accumulate(g.reshape(original))
        return Tensor._make(self.data.reshape(*shape), (self,), backward)

    def transpose(self, *axes: int) -> "Tensor":
        inverse = np.argsort(axes)

        def backward(g):
            self.accumulate(np.transpose(g, inverse))
        return Tensor._make(np.transpose(self.data, axes), (self,), backward)

    def __getitem__(self, index) -> "Tensor":
        def backward(g):
            full = np.zeros_like(self.data)
            if _is_basic_index(index):
                full[index] += g
            else:
                np.add.at(full, index, g)
            self.accumulate(full)
        return Tensor._make(self.data[index], (self,), backward)

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        def backward(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            self.accumulate(np.broadcast_to(g, self.shape))
        return Tensor._make(self.data.sum(axis=axis, keepdims=keepdims), (self,), backward)


def _is_basic_index(index) -> bool:
    parts = index if isinstance(index, tuple) else (index,)
    return all(isinstance(p, (int, slice, type(None))) or p is Ellipsis for p in parts)


def as_tensor(value: ArrayLike) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def parameter(data: np.ndarray, name: Optional[str] = None) -> Tensor:
    return Tensor(data, requires_grad=True, name=name)


# ----------------------------------------------------------------------
# fused operations
# ----------------------------------------------------------------------

def embedding(weight: Tensor, ids: np.ndarray) -> Tensor:
    """Rows of weight selected by integer ids of any shape."""
    ids = np.asarray(ids, dtype=np.int64)

    def backward(g):
        full = np.zeros_like(weight.data)
        np.add.at(full, ids, g)
        weight.accumulate(full)
    return Tensor._make(weight.data[ids], (weight,), backward)


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis, then scale and shift."""
    mean = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mean
    var = (centered ** 2).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    x_hat = centered * inv_std
    n = x.shape[-1]

    def backward(g):
        if gamma.requires_grad:
            gamma.accumulate(_unbroadcast(g * x_hat, gamma.shape))
        if beta.requires_grad:
            beta.accumulate(_unbroadcast(g, beta.shape))
        if x.requires_grad:
            g_hat = g * gamma.data
            dx = inv_std / n * (
                n * g_hat
                - g_hat.sum(axis=-1, keepdims=True)
                - x_hat * (g_hat * x_hat).sum(axis=-1, keepdims=True)
            )
            x.accumulate(dx)
    return Tensor._make(x_hat * gamma.data + beta.data, (x, gamma, beta), backward)


_GELU_C = np.sqrt(2.0 / np.pi)


def gelu(x: Tensor) -> Tensor:
    """tanh approximation of GELU."""
    u = _GELU_C * (x.data + 0.044715 * x.data ** 3)
    t = np.tanh(u)
    out = 0.5 * x.data * (1.0 + t)

    def backward(g):
        du = _GELU_C * (1.0 + 3 * 0.044715 * x.data ** 2)
        local = 0.5 * (1.0 + t) + 0.5 * x.data * (1.0 - t ** 2) * du
        x.accumulate(g * local)
    return Tensor._make(out, (x,), backward)


def masked_softmax(x: Tensor, mask: Optional[np.ndarray] = None) -> Tensor:
    """Softmax over the last axis; positions where mask is False get probability 0."""
    logits = x.data if mask is None else np.where(mask, x.data, -np.inf)
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    probs = exp / exp.sum(axis=-1, keepdims=True)

    def backward(g):
        x.accumulate(probs * (g - (g * probs).sum(axis=-1, keepdims=True)))
    return Tensor._make(probs, (x,), backward)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    """Plain numpy log-softmax over the last axis."""
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def weighted_cross_entropy(logits: Tensor, targets: np.ndarray, weights: np.ndarray) -> Tensor:
    """Scalar -sum(weights * log p(targets)) over every position.

    ``weights`` carries the loss mask (and any normalization or per-token return),
    so SL and policy-gradient objectives share this op.
    """
    targets = np.asarray(targets, dtype=np.int64)
    weights = np.asarray(weights, dtype=np.float64)
    logp = log_softmax(logits.data)
    picked = np.take_along_axis(logp, targets[..., None], axis=-1)[..., 0]
    loss = -(weights * picked).sum()

    def backward(g):
        probs = np.exp(logp)
        onehot = np.zeros_like(probs)
        np.put_along_axis(onehot, targets[..., None], 1.0, axis=-1)
        logits.accumulate(g * weights[..., None] * (probs - onehot))
    return Tensor._make(np.asarray(loss), (logits,), backward)


def zero_grads(params: Iterable[Tensor]) -> None:
    for p in params:
        p.zero_grad()
