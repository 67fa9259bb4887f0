"""
Generative dialog system: belief, DB lookup, act and response from one causal model.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from ..models.config_models import DecodingConfig, PolicyScheme
from ..models.domain_models import BeliefState, DialogAct, Turn
from ..models.world_models import DBResult
from ..neural.decoding import DecodeResult, generate
from ..neural.training import TrainingSequence
from ..neural.transformer import CausalTransformer
from ..neural.vocab import Vocab
from ..repositories.world_repository import WorldRepository
from ..services.lexicalization_service import LexicalizationService
from ..services.serialization_service import SpanSerializer
from .base import DialogSystem, SystemReply
from .context import ContextAssembler

logger = logging.getLogger(__name__)

SCHEME_SEGMENTS = {
    PolicyScheme.BELIEF_ACT_RESPONSE.value: ("belief", "act", "response"),
    PolicyScheme.ACT_RESPONSE.value: ("act", "response"),
    PolicyScheme.ACT.value: ("act",),
}


@dataclass
class DSTrace:
    """Token stream of one DS turn and where each generated segment sits in it."""
    tokens: List[int] = field(default_factory=list)
    segments: Dict[str, List[int]] = field(default_factory=dict)
    truncated: Dict[str, bool] = field(default_factory=dict)
    dropped_user_tokens: int = 0

    def append_input(self, ids: Sequence[int]) -> None:
        self.tokens.extend(ids)

    def append_generated(self, segment: str, result: DecodeResult) -> None:
        start = len(self.tokens)
        self.tokens.extend(result.tokens)
        self.segments[segment] = list(range(start, len(self.tokens)))
        self.truncated[segment] = result.truncated

    def policy_positions(self, scheme: str) -> List[int]:
        """Positions of generated tokens that belong to the policy of ``scheme``."""
        positions: List[int] = []
        for segment in SCHEME_SEGMENTS[PolicyScheme(scheme).value]:
            positions.extend(self.segments.get(segment, []))
        return positions

    def training_sequence(self, positions: Sequence[int], weights: Sequence[float]) -> TrainingSequence:
        mask = [0.0] * len(self.tokens)
        for position, weight in zip(positions, weights):
            mask[position] = float(weight)
        return TrainingSequence(list(self.tokens), mask)


@dataclass
class DSTurn:
    belief: BeliefState
    db: Dict[str, DBResult]
    act: DialogAct
    response: str
    trace: DSTrace
    skipped_tokens: int = 0


class DSAgent(DialogSystem):
    """Dialog system backed by a causal transformer.

    Each turn conditions on exactly the previous belief, the previous delexicalized
    response and the current user utterance; the DB bucket tokens of the freshly
    decoded belief are appended before the act is generated.
    """

    name = "ds"

    def __init__(
        self,
        model: CausalTransformer,
        vocab: Vocab,
        world: WorldRepository,
        decoding: Optional[DecodingConfig] = None,
        lexicalizer: Optional[LexicalizationService] = None,
        name: Optional[str] = None,
    ):
        self.model = model
        self.vocab = vocab
        self.world = world
        self.decoding = decoding or DecodingConfig()
        self.serializer = SpanSerializer(world.ontology)
        self.lexicalizer = lexicalizer or LexicalizationService(world.ontology)
        self.context = ContextAssembler(vocab, model.context_length, self.decoding.max_segment_tokens)
        if name:
            self.name = name
        self.reset(np.random.default_rng(0))

    def reset(self, rng: np.random.Generator) -> None:
        self.rng = rng
        self.b_prev = BeliefState()
        self.r_prev = ""

    def _decode(self, prefix: List[int], stop: str, mode: str, rng: np.random.Generator) -> DecodeResult:
        return generate(
            self.model, prefix, self.vocab.id(stop), self.decoding.max_segment_tokens,
            mode=mode, rng=rng, beam_width=self.decoding.beam_width,
        )

    def ds_turn(self, b_prev: BeliefState, r_prev: str, u: str, rng: np.random.Generator) -> DSTurn:
        trace = DSTrace()
        prefix = self.context.ds_prefix(self.serializer.serialize_belief(b_prev), r_prev, u)
        trace.dropped_user_tokens = prefix.dropped
        trace.append_input(prefix.ids)

        belief_out = self._decode(trace.tokens, "<eos_b>", self.decoding.belief_mode, rng)
        trace.append_generated("belief", belief_out)
        belief, skipped_b = self.serializer.parse_belief_with_stats(self.vocab.decode(belief_out.content))

        db = self.world.query_belief(belief)
        trace.append_input(self.context.ds_db_segment(self.serializer.serialize_db(db)))
        act_out = self._decode(trace.tokens, "<eos_a>", self.decoding.act_mode, rng)
        trace.append_generated("act", act_out)
        act, skipped_a = self.serializer.parse_act_with_stats(self.vocab.decode(act_out.content))

        trace.append_input([self.vocab.id("<sos_r>")])
        response_out = self._decode(trace.tokens, "<eos_r>", self.decoding.text_mode, rng)
        trace.append_generated("response", response_out)
        response = self.vocab.decode(response_out.content)

        skipped = skipped_b + skipped_a
        if skipped:
            logger.debug(f"DS turn skipped {skipped} unparseable span tokens")
        return DSTurn(belief, db, act, response, trace, skipped)

    def respond(self, utterance: str, user_act: Optional[DialogAct] = None) -> SystemReply:
        """One turn from the utterance alone; the semantic user act is ignored."""
        turn = self.ds_turn(self.b_prev, self.r_prev, utterance, self.rng)
        self.b_prev, self.r_prev = turn.belief, turn.response
        domains = turn.act.task_domains
        domain = domains[0] if domains else None
        lex, _ = self.lexicalizer.lexicalize(turn.response, turn.belief, turn.db.get(domain) if domain else None, domain)
        return SystemReply(turn.belief.copy(), turn.db, turn.act, turn.response, lex, trace=turn.trace)

    # ------------------------------------------------------------------
    # supervision
    # ------------------------------------------------------------------

    def training_sequence(self, previous: Optional[Turn], turn: Turn) -> TrainingSequence:
        """Teacher-forced sequence for one corpus turn; ``previous`` is None at t=1."""
        b_prev = self.serializer.serialize_belief(previous.sys_belief) if previous else ""
        r_prev = previous.sys_response if previous else ""
        seq, dropped = self.context.ds_training_sequence(
            b_prev,
            r_prev,
            turn.user_utterance,
            self.serializer.serialize_belief(turn.sys_belief),
            self.serializer.serialize_db(turn.db),
            self.serializer.serialize_act(turn.sys_act),
            turn.sys_response,
        )
        if dropped:
            logger.warning(f"Training turn {turn.index}: dropped {dropped} user tokens to fit the context")
        return seq

    def manifest(self) -> Dict[str, object]:
        return {"agent": "ds", "name": self.name, "decoding": self.decoding.model_dump()}
