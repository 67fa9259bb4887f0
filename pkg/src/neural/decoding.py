"""
Greedy and beam-sample decoding against any model exposing
``next_token_log_probs(sequences) -> (N, V) array``.
"""
import logging
from dataclasses import dataclass
from typing import List, Optional, Protocol, Sequence, Tuple

import numpy as np

from ..models.config_models import DecodeMode

logger = logging.getLogger(__name__)


class StepModel(Protocol):
    def next_token_log_probs(self, sequences: Sequence[Sequence[int]]) -> np.ndarray:
        ...


@dataclass(frozen=True)
class Hypothesis:
    """A decoded continuation; tokens include the stop token when finished."""
    tokens: Tuple[int, ...] = ()
    log_probs: Tuple[float, ...] = ()
    finished: bool = False

    @property
    def log_prob(self) -> float:
        return float(sum(self.log_probs))

    @property
    def score(self) -> float:
        """Length-normalized log-probability."""
        return self.log_prob / len(self.tokens) if self.tokens else 0.0

    def extend(self, token: int, log_prob: float, stop_id: int) -> "Hypothesis":
        return Hypothesis(self.tokens + (token,), self.log_probs + (float(log_prob),), token == stop_id)


@dataclass
class DecodeResult:
    tokens: List[int]
    log_probs: List[float]
    truncated: bool

    @property
    def content(self) -> List[int]:
        """Tokens without the trailing stop token."""
        return self.tokens if self.truncated else self.tokens[:-1]


def _rank_key(h: Hypothesis):
    return (-h.score, h.tokens)


def _token_budget(model: StepModel, prefix: Sequence[int], max_tokens: int) -> int:
    context = getattr(model, "context_length", None)
    if context is None:
        return max_tokens
    return max(0, min(max_tokens, context - len(prefix)))


def greedy_decode(model: StepModel, prefix: Sequence[int], stop_id: int, max_tokens: int) -> DecodeResult:
    tokens: List[int] = []
    log_probs: List[float] = []
    for _ in range(_token_budget(model, prefix, max_tokens)):
        row = model.next_token_log_probs([list(prefix) + tokens])[0]
        token = int(np.argmax(row))
        tokens.append(token)
        log_probs.append(float(row[token]))
        if token == stop_id:
            return DecodeResult(tokens, log_probs, truncated=False)
    logger.debug(f"Greedy decode hit the limit of {max_tokens} tokens without a stop token")
    return DecodeResult(tokens, log_probs, truncated=True)


def beam_search(
    model: StepModel,
    prefix: Sequence[int],
    stop_id: int,
    max_tokens: int,
    beam_width: int = 10,
) -> List[Hypothesis]:
    """Length-normalized beam search.

    Finished and live hypotheses compete for the same ``beam_width`` slots; live
    hypotheses still open at the token limit are returned unfinished. The result
    is ordered best first, ties broken by token sequence.
    """
    budget = _token_budget(model, prefix, max_tokens)
    live: List[Hypothesis] = [Hypothesis()]
    finished: List[Hypothesis] = []
    for _ in range(budget):
        if not live:
            break
        rows = model.next_token_log_probs([list(prefix) + list(h.tokens) for h in live])
        candidates: List[Hypothesis] = []
        for hyp, row in zip(live, rows):
            k = min(beam_width, row.shape[0])
            top = np.argsort(-row, kind="stable")[:k]
            candidates.extend(hyp.extend(int(tok), row[tok], stop_id) for tok in top)
        pool = sorted(finished + candidates, key=_rank_key)[:beam_width]
        finished = [h for h in pool if h.finished]
        live = [h for h in pool if not h.finished]
    return sorted(finished + [h for h in live if h.tokens], key=_rank_key)


def beam_sample_decode(
    model: StepModel,
    prefix: Sequence[int],
    stop_id: int,
    max_tokens: int,
    rng: np.random.Generator,
    beam_width: int = 10,
) -> DecodeResult:
    """Beam search, then sample one hypothesis in proportion to its probability."""
    hypotheses = beam_search(model, prefix, stop_id, max_tokens, beam_width)
    if not hypotheses:
        return DecodeResult([], [], truncated=True)
    log_probs = np.array([h.log_prob for h in hypotheses])
    weights = np.exp(log_probs - log_probs.max())
    choice = hypotheses[int(rng.choice(len(hypotheses), p=weights / weights.sum()))]
    if not choice.finished:
        logger.debug(f"Sampled beam hypothesis hit the limit of {max_tokens} tokens")
    return DecodeResult(list(choice.tokens), list(choice.log_probs), truncated=not choice.finished)


def generate(
    model: StepModel,
    prefix: Sequence[int],
    stop_id: int,
    max_tokens: int,
    mode: str = DecodeMode.GREEDY.value,
    rng: Optional[np.random.Generator] = None,
    beam_width: int = 10,
) -> DecodeResult:
    mode = DecodeMode(mode)
    if mode == DecodeMode.GREEDY:
        return greedy_decode(model, prefix, stop_id, max_tokens)
    if rng is None:
        raise ValueError("beam_sample decoding needs an rng")
    return beam_sample_decode(model, prefix, stop_id, max_tokens, rng, beam_width)
