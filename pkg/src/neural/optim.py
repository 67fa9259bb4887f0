import logging
from typing import Dict, List, Optional, Tuple

import numpy as np

from .autodiff import Tensor

logger = logging.getLogger(__name__)


class LinearWarmupSchedule:
    """Linear ramp from 0 to max_lr over the warmup steps, then linear decay to 0 at total_steps."""

    def __init__(self, max_lr: float, total_steps: int, warmup_fraction: float = 0.2):
        if total_steps < 1:
            raise ValueError(f"total_steps must be positive, got {total_steps}")
        self.max_lr = max_lr
        self.total_steps = total_steps
        self.warmup_steps = int(round(total_steps * warmup_fraction))

    def __call__(self, step: int) -> float:
        if step < self.warmup_steps:
            return self.max_lr * step / self.warmup_steps
        if step >= self.total_steps:
            return 0.0
        return self.max_lr * (self.total_steps - step) / (self.total_steps - self.warmup_steps)


class ConstantSchedule:
    """Fixed learning rate."""

    def __init__(self, lr: float):
        self.max_lr = lr

    def __call__(self, step: int) -> float:
        return self.max_lr


class AdamW:
    """Adam with decoupled weight decay on matrix-shaped parameters."""

    def __init__(
        self,
        params: List[Tensor],
        schedule,
        betas: Tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
        weight_decay: float = 0.0,
    ):
        self.params = list(params)
        self.schedule = schedule
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.step_count = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    @property
    def lr(self) -> float:
        return self.schedule(self.step_count)

    def step(self) -> float:
        """Apply one update from the accumulated gradients; returns the lr used."""
        lr = self.lr
        t = self.step_count + 1
        for i, p in enumerate(self.params):
            grad = p.grad if p.grad is not None else np.zeros_like(p.data)
            self.m[i] = self.beta1 * self.m[i] + (1 - self.beta1) * grad
            self.v[i] = self.beta2 * self.v[i] + (1 - self.beta2) * grad ** 2
            m_hat = self.m[i] / (1 - self.beta1 ** t)
            v_hat = self.v[i] / (1 - self.beta2 ** t)
            if self.weight_decay and p.ndim >= 2:
                p.data -= lr * self.weight_decay * p.data
            p.data -= lr * m_hat / (np.sqrt(v_hat) + self.eps)
        self.step_count = t
        return lr

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def state_dict(self) -> Dict[str, object]:
        return {"step_count": self.step_count, "m": [m.copy() for m in self.m], "v": [v.copy() for v in self.v]}

    def load_state_dict(self, state: Dict[str, object]) -> None:
        self.step_count = int(state["step_count"])
        self.m = [np.array(m) for m in state["m"]]
        self.v = [np.array(v) for v in state["v"]]


def grad_norm(params: List[Tensor]) -> float:
    total = sum(float((p.grad ** 2).sum()) for p in params if p.grad is not None)
    return float(np.sqrt(total))


def clip_grad_norm(params: List[Tensor], max_norm: Optional[float]) -> float:
    norm = grad_norm(params)
    if max_norm is not None and norm > max_norm:
        scale = max_norm / (norm + 1e-12)
        for p in params:
            if p.grad is not None:
                p.grad *= scale
    return norm
