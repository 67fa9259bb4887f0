"""
Training sequences and the masked likelihood objective.

A ``TrainingSequence`` is one token stream with a per-token weight. Weight 0 marks
conditioning input, weight 1 marks supervised target tokens; policy-gradient
updates reuse the same structure with per-token returns as weights. Token ``i``
is predicted from tokens ``< i``, so the first token is never a target.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..models.exceptions import NaNLossError
from .autodiff import no_grad, weighted_cross_entropy
from .optim import AdamW, clip_grad_norm

logger = logging.getLogger(__name__)


@dataclass
class TrainingSequence:
    tokens: List[int]
    loss_mask: List[float]

    def __post_init__(self):
        if len(self.tokens) != len(self.loss_mask):
            raise ValueError("tokens and loss_mask must have equal length")
        if self.loss_mask and self.loss_mask[0] != 0:
            raise ValueError("the first token has no context and cannot be a target")

    def __len__(self):
        return len(self.tokens)

    @property
    def input_ids(self) -> List[int]:
        return self.tokens[:-1]

    @property
    def target_ids(self) -> List[int]:
        return self.tokens[1:]

    @property
    def target_mask(self) -> List[float]:
        return self.loss_mask[1:]

    @property
    def num_targets(self) -> int:
        return int(sum(1 for w in self.loss_mask if w != 0))

    def target_positions(self) -> List[int]:
        return [i for i, w in enumerate(self.loss_mask) if w != 0]


@dataclass
class SequenceBuilder:
    """Appends input and target segments to one token stream."""
    tokens: List[int] = field(default_factory=list)
    loss_mask: List[float] = field(default_factory=list)

    def add_input(self, ids: Sequence[int]) -> "SequenceBuilder":
        self.tokens.extend(ids)
        self.loss_mask.extend([0.0] * len(ids))
        return self

    def add_target(self, ids: Sequence[int]) -> "SequenceBuilder":
        if not self.tokens:
            raise ValueError("a target segment needs preceding input")
        self.tokens.extend(ids)
        self.loss_mask.extend([1.0] * len(ids))
        return self

    def build(self) -> TrainingSequence:
        return TrainingSequence(list(self.tokens), list(self.loss_mask))


def collate(sequences: Sequence[TrainingSequence], pad_id: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Right-padded (inputs, targets, weights), each of shape (B, T-1)."""
    width = max(len(s) for s in sequences) - 1
    if width < 1:
        raise ValueError("sequences need at least two tokens")
    inputs = np.full((len(sequences), width), pad_id, dtype=np.int64)
    targets = np.full((len(sequences), width), pad_id, dtype=np.int64)
    weights = np.zeros((len(sequences), width), dtype=np.float64)
    for row, seq in enumerate(sequences):
        n = len(seq) - 1
        inputs[row, :n] = seq.input_ids
        targets[row, :n] = seq.target_ids
        weights[row, :n] = seq.target_mask
    return inputs, targets, weights


def weighted_nll(model, sequences: Sequence[TrainingSequence], scale: float = 1.0):
    """Scalar tensor -scale * sum(weight * log p(target)) over a micro-batch."""
    inputs, targets, weights = collate(sequences, model.pad_id)
    logits = model.forward(inputs)
    return weighted_cross_entropy(logits, targets, weights * scale)


def masked_nll(model, sequences: Sequence[TrainingSequence]) -> float:
    """Mean negative log-likelihood of target tokens, no gradient."""
    total = sum(s.num_targets for s in sequences)
    if total == 0:
        return 0.0
    with no_grad():
        return weighted_nll(model, sequences, 1.0 / total).item()


def check_finite(value: float, model, context: str) -> None:
    if not np.isfinite(value):
        raise NaNLossError(f"non-finite loss during {context}", {"loss": value})
    bad = [name for name, p in model.params.items() if p.grad is not None and not np.isfinite(p.grad).all()]
    if bad:
        raise NaNLossError(f"non-finite gradients during {context}", {"parameters": bad})


def accumulate_gradients(model, micro_batches: Sequence[Sequence[TrainingSequence]], scale: float) -> float:
    """Backward every micro-batch into the parameter grads; returns the summed loss."""
    total = 0.0
    for micro in micro_batches:
        if not micro:
            continue
        loss = weighted_nll(model, micro, scale)
        loss.backward()
        total += loss.item()
    return total


def sl_step(
    model,
    optimizer: AdamW,
    micro_batches: Sequence[Sequence[TrainingSequence]],
    max_grad_norm: Optional[float] = 1.0,
) -> Tuple[float, float]:
    """One supervised update over grad-accumulated micro-batches; returns (loss, pre-clip grad norm).

    The loss is the mean masked NLL over every target token of all micro-batches,
    so accumulation leaves the objective unchanged.
    """
    n_targets = sum(s.num_targets for micro in micro_batches for s in micro)
    if n_targets == 0:
        raise ValueError("sl_step needs at least one target token")
    optimizer.zero_grad()
    loss = accumulate_gradients(model, micro_batches, 1.0 / n_targets)
    check_finite(loss, model, "supervised step")
    norm = clip_grad_norm(model.parameters(), max_grad_norm)
    optimizer.step()
    if not model.all_finite():
        raise NaNLossError("parameters became non-finite after a supervised step", {"loss": loss})
    return loss, norm


def token_accuracy(model, sequences: Sequence[TrainingSequence]) -> float:
    """Share of target tokens predicted by argmax."""
    inputs, targets, weights = collate(sequences, model.pad_id)
    with no_grad():
        predicted = model.forward(inputs).data.argmax(axis=-1)
    mask = weights != 0
    if not mask.any():
        return 1.0
    return float((predicted[mask] == targets[mask]).mean())
