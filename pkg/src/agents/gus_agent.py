"""
Generative user simulator.

Per turn the user first reads the previous system response into a user belief
(the system act it understood), updates its goal state from that belief and then
writes its own act and utterance conditioned on the response, the belief and the
goal state. The ablated variant conditions on the initial goal at every turn.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from ..config.settings import settings
from ..models.config_models import DecodingConfig
from ..models.domain_models import DialogAct, GoalChangeEvent, GoalState, Turn, UserGoal
from ..models.world_models import Ontology
from ..neural.decoding import DecodeResult, generate
from ..neural.training import TrainingSequence
from ..neural.transformer import CausalTransformer
from ..neural.vocab import Vocab
from ..services.goal_tracking_service import react_to_nooffer, update_goal_state
from ..services.serialization_service import SpanSerializer
from .base import UserObservation, UserReply, UserSimulator
from .context import ContextAssembler

logger = logging.getLogger(__name__)


@dataclass
class USTurn:
    user_belief: DialogAct
    goal_state: GoalState
    user_act: DialogAct
    utterance: str
    goal_changes: List[GoalChangeEvent] = field(default_factory=list)


class GUSAgent(UserSimulator):
    """User simulator backed by a causal transformer.

    ``with_gst=False`` keeps the conditioning goal state at g_0 and skips goal
    changes. The tracked goal state is still updated so termination and rewards
    see the same bookkeeping for both variants.
    """

    name = "gus"

    def __init__(
        self,
        model: CausalTransformer,
        vocab: Vocab,
        ontology: Ontology,
        decoding: Optional[DecodingConfig] = None,
        with_gst: bool = True,
        max_goal_changes: Optional[int] = None,
        name: Optional[str] = None,
    ):
        self.model = model
        self.vocab = vocab
        self.ontology = ontology
        self.decoding = decoding or DecodingConfig()
        self.with_gst = with_gst
        self.max_goal_changes = settings.MAX_GOAL_CHANGES if max_goal_changes is None else max_goal_changes
        self.serializer = SpanSerializer(ontology)
        self.context = ContextAssembler(vocab, model.context_length, self.decoding.max_segment_tokens)
        self.name = name or ("gus" if with_gst else "gus-nogst")
        self.reset(UserGoal(), np.random.default_rng(0))

    def reset(self, goal: UserGoal, rng: np.random.Generator) -> None:
        self.rng = rng
        self._goal = goal.copy()
        self.initial_state = goal.as_goal_state()
        self.tracked = goal.as_goal_state()
        self.last_user_act = DialogAct()
        self.r_prev = ""
        self.user_belief = DialogAct()
        self.change_counts: Dict[str, int] = {}

    @property
    def goal(self) -> UserGoal:
        return self._goal

    @property
    def goal_state(self) -> GoalState:
        return self.tracked

    def conditioning_state(self) -> GoalState:
        return self.tracked if self.with_gst else self.initial_state

    def _decode(self, prefix: List[int], stop: str, mode: str, rng: np.random.Generator) -> DecodeResult:
        return generate(
            self.model, prefix, self.vocab.id(stop), self.decoding.max_segment_tokens,
            mode=mode, rng=rng, beam_width=self.decoding.beam_width,
        )

    def infer_belief(self, r_prev: str, rng: np.random.Generator) -> DialogAct:
        """System act understood from the previous response; empty before the first response."""
        if not r_prev.strip():
            return DialogAct()
        prefix = self.context.us_belief_prefix(r_prev)
        result = self._decode(prefix.ids, "<eos_b>", self.decoding.act_mode, rng)
        return self.serializer.parse_act(self.vocab.decode(result.content))

    def generate_reply(self, r_prev: str, b_u: DialogAct, g: GoalState, rng: np.random.Generator) -> Tuple[DialogAct, str]:
        prefix = self.context.us_act_prefix(
            r_prev, self.serializer.serialize_act(b_u), self.serializer.serialize_goal_state(g)
        )
        tokens = list(prefix.ids)
        act_out = self._decode(tokens, "<eos_a>", self.decoding.act_mode, rng)
        tokens += act_out.tokens + [self.vocab.id("<sos_u>")]
        text_out = self._decode(tokens, "<eos_u>", self.decoding.text_mode, rng)
        user_act = self.serializer.parse_user_act(self.vocab.decode(act_out.content))
        return user_act, self.vocab.decode(text_out.content)

    def observe(self, r_prev: str, sys_act: Optional[DialogAct], turn: int) -> UserObservation:
        """Understand the response; ``sys_act`` is never read."""
        b_u = self.infer_belief(r_prev, self.rng)
        g = update_goal_state(self.tracked, self.last_user_act, b_u)
        events: List[GoalChangeEvent] = []
        if self.with_gst and b_u.has_intent("nooffer"):
            g, self._goal, events, _ = react_to_nooffer(
                g, self._goal, b_u, self.ontology, self.rng, turn, self.change_counts, self.max_goal_changes
            )
        self.tracked = g
        self.r_prev = r_prev
        self.user_belief = b_u
        return UserObservation(b_u, self.conditioning_state().copy(), events)

    def respond(self) -> UserReply:
        user_act, utterance = self.generate_reply(self.r_prev, self.user_belief, self.conditioning_state(), self.rng)
        if not user_act:
            logger.debug("GUS produced an empty user act")
        self.last_user_act = user_act
        return UserReply(user_act, utterance)

    def us_turn(self, r_prev: str, turn: int) -> USTurn:
        """Understanding, goal update and reply for one turn."""
        observation = self.observe(r_prev, None, turn)
        reply = self.respond()
        return USTurn(observation.user_belief, observation.goal_state, reply.user_act, reply.utterance, observation.goal_changes)

    # ------------------------------------------------------------------
    # supervision
    # ------------------------------------------------------------------

    def training_sequences(
        self, previous: Optional[Turn], turn: Turn, goal_state: GoalState
    ) -> Tuple[TrainingSequence, TrainingSequence]:
        """Both sequence families of one corpus turn.

        The user belief label is the previous system act (empty at t=1).
        ``goal_state`` is the annotated g_t, or g_1 for the ablated variant.
        """
        r_prev = previous.sys_response if previous else ""
        b_u = previous.sys_act.without_values() if previous else DialogAct()
        return self.context.us_training_sequences(
            r_prev,
            self.serializer.serialize_act(b_u),
            self.serializer.serialize_goal_state(goal_state),
            self.serializer.serialize_user_act(turn.user_act),
            turn.user_utterance,
        )

    def manifest(self) -> Dict[str, object]:
        return {
            "agent": "gus", "name": self.name, "with_gst": self.with_gst,
            "decoding": self.decoding.model_dump(),
        }
