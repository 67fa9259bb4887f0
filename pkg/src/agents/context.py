"""
Token-level assembly of agent inputs and training sequences.

DS turn:
    <sos_b> b_prev <eos_b> <sos_r> r_prev <eos_r> <sos_u> u <eos_u> <sos_b>  ->  b <eos_b>
    <sos_db> db <eos_db> <sos_a>                                             ->  a <eos_a>
    <sos_r>                                                                  ->  r <eos_r>

GUS turn:
    <sos_r> r_prev <eos_r> <sos_b>                                           ->  b_u <eos_b>
    <sos_r> r_prev <eos_r> <sos_b> b_u <eos_b> <sos_g> g <eos_g> <sos_a>     ->  a_u <eos_a>
    <sos_u>                                                                  ->  u <eos_u>

Segment openers are conditioning input; only segment contents and their closing
token are targets. Overlong contexts are cut from the left of the free-text
segment (u for the DS, r_prev for the GUS).
"""
import logging
from dataclasses import dataclass
from typing import List, Sequence, Tuple

from ..neural.training import SequenceBuilder, TrainingSequence
from ..neural.vocab import Vocab

logger = logging.getLogger(__name__)

DB_SEGMENT_BUDGET = 12


@dataclass
class Prefix:
    """Token prefix plus how many free-text tokens were dropped to fit the context."""
    ids: List[int]
    dropped: int = 0

    @property
    def truncated(self) -> bool:
        return self.dropped > 0


class ContextAssembler:
    """Builds the token streams of both agents for one vocabulary and context size.

    ``reserve`` is the number of positions kept free for everything generated (or
    appended as input) after the first prefix.
    """

    def __init__(self, vocab: Vocab, context_length: int, max_segment_tokens: int):
        self.vocab = vocab
        self.context_length = context_length
        self.max_segment_tokens = max_segment_tokens
        self.reserve = 3 * (max_segment_tokens + 1) + DB_SEGMENT_BUDGET

    def tok(self, token: str) -> int:
        return self.vocab.id(token)

    def encode(self, text: str) -> List[int]:
        return self.vocab.encode(text)

    def wrap(self, name: str, ids: Sequence[int]) -> List[int]:
        return [self.tok(f"<sos_{name}>")] + list(ids) + [self.tok(f"<eos_{name}>")]

    def _fit(self, fixed: int, free: List[int], budget: int) -> Tuple[List[int], int]:
        """Keep the rightmost free-text tokens that fit next to ``fixed`` tokens."""
        room = budget - fixed
        if room < 0:
            raise ValueError(f"structural context of {fixed} tokens exceeds budget {budget}")
        if len(free) <= room:
            return free, 0
        dropped = len(free) - room
        return free[dropped:], dropped

    # ------------------------------------------------------------------
    # DS
    # ------------------------------------------------------------------

    def ds_prefix(self, b_prev: str, r_prev: str, u: str) -> Prefix:
        belief = self.wrap("b", self.encode(b_prev))
        response = self.wrap("r", self.encode(r_prev))
        fixed = len(belief) + len(response) + 3
        user, dropped = self._fit(fixed, self.encode(u), self.context_length - self.reserve)
        if dropped:
            logger.warning(f"Truncated {dropped} tokens from the left of a user utterance")
        return Prefix(belief + response + self.wrap("u", user) + [self.tok("<sos_b>")], dropped)

    def ds_db_segment(self, db: str) -> List[int]:
        return self.wrap("db", self.encode(db)) + [self.tok("<sos_a>")]

    def ds_training_sequence(
        self, b_prev: str, r_prev: str, u: str, b: str, db: str, a: str, r: str
    ) -> Tuple[TrainingSequence, int]:
        """Input (b_prev, r_prev, u, db) with target (b, a, r); returns (sequence, dropped tokens)."""
        belief = self.encode(b) + [self.tok("<eos_b>")]
        act = self.encode(a) + [self.tok("<eos_a>")]
        response = self.encode(r) + [self.tok("<eos_r>")]
        db_ids = self.ds_db_segment(db)
        head = self.wrap("b", self.encode(b_prev)) + self.wrap("r", self.encode(r_prev))
        fixed = len(head) + 3 + len(belief) + len(db_ids) + len(act) + 1 + len(response)
        user, dropped = self._fit(fixed, self.encode(u), self.context_length)
        seq = (
            SequenceBuilder()
            .add_input(head + self.wrap("u", user) + [self.tok("<sos_b>")])
            .add_target(belief)
            .add_input(db_ids)
            .add_target(act)
            .add_input([self.tok("<sos_r>")])
            .add_target(response)
            .build()
        )
        return seq, dropped

    # ------------------------------------------------------------------
    # GUS
    # ------------------------------------------------------------------

    def _user_response(self, r_prev: str, fixed: int, budget: int) -> Tuple[List[int], int]:
        ids, dropped = self._fit(fixed + 2, self.encode(r_prev), budget)
        if dropped:
            logger.warning(f"Truncated {dropped} tokens from the left of a system response")
        return self.wrap("r", ids), dropped

    def us_belief_prefix(self, r_prev: str) -> Prefix:
        response, dropped = self._user_response(r_prev, 1, self.context_length - self.reserve)
        return Prefix(response + [self.tok("<sos_b>")], dropped)

    def us_act_prefix(self, r_prev: str, b_u: str, g: str) -> Prefix:
        tail = self.wrap("b", self.encode(b_u)) + self.wrap("g", self.encode(g)) + [self.tok("<sos_a>")]
        budget = self.context_length - 2 * (self.max_segment_tokens + 1) - 1
        response, dropped = self._user_response(r_prev, len(tail), budget)
        return Prefix(response + tail, dropped)

    def us_training_sequences(
        self, r_prev: str, b_u: str, g: str, a_u: str, u: str
    ) -> Tuple[TrainingSequence, TrainingSequence]:
        """(r_prev -> b_u) and (r_prev, b_u, g -> a_u, u)."""
        belief = self.encode(b_u) + [self.tok("<eos_b>")]
        response, _ = self._user_response(r_prev, 1 + len(belief), self.context_length)
        first = SequenceBuilder().add_input(response + [self.tok("<sos_b>")]).add_target(belief).build()

        act = self.encode(a_u) + [self.tok("<eos_a>")]
        utterance = self.encode(u) + [self.tok("<eos_u>")]
        tail = self.wrap("b", self.encode(b_u)) + self.wrap("g", self.encode(g)) + [self.tok("<sos_a>")]
        response, _ = self._user_response(r_prev, len(tail) + len(act) + 1 + len(utterance), self.context_length)
        second = (
            SequenceBuilder()
            .add_input(response + tail)
            .add_target(act)
            .add_input([self.tok("<sos_u>")])
            .add_target(utterance)
            .build()
        )
        return first, second
