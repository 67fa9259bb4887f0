"""
Interactive sessions between a human user and a dialog system.
"""
import logging
import re
from typing import Callable, List, Optional

import numpy as np

from ..agents.base import DialogSystem
from ..models.domain_models import BeliefState, Dialog, DialogAct, GoalState, Turn, UserGoal

logger = logging.getLogger(__name__)

QUIT_COMMAND = "/quit"
_PUNCTUATION = re.compile(r"([?.!,])")


def normalize_utterance(text: str) -> str:
    """Lower-case and split punctuation off words, the way corpus utterances are tokenized."""
    return " ".join(_PUNCTUATION.sub(r" \1 ", text.lower()).split())


class ChatSession:
    """A human-driven dialog; the session becomes a ``Dialog`` with an empty goal."""

    def __init__(self, ds: DialogSystem, seed: int = 0, max_turns: int = 20, dialog_id: str = "chat-00000"):
        self.ds = ds
        self.max_turns = max_turns
        self.dialog_id = dialog_id
        self.turns: List[Turn] = []
        self.reason: Optional[str] = None
        ds.reset(np.random.default_rng(seed))

    @property
    def finished(self) -> bool:
        return self.reason is not None

    def step(self, text: str) -> Optional[str]:
        """Feed one typed line; returns the lexicalized reply, or None when the session ends."""
        if self.finished:
            raise RuntimeError(f"session {self.dialog_id} already ended: {self.reason}")
        if text.strip() == QUIT_COMMAND:
            self.reason = "user_quit"
            return None
        utterance = normalize_utterance(text)
        reply = self.ds.respond(utterance)
        self.turns.append(Turn(
            index=len(self.turns) + 1,
            goal_state=GoalState(),
            user_belief=DialogAct(),
            user_act=DialogAct(),
            user_utterance=utterance,
            sys_belief=reply.belief if reply.belief is not None else BeliefState(),
            db=reply.db,
            sys_act=reply.act,
            sys_response=reply.response,
            sys_response_lex=reply.response_lex,
            ds_trace=reply.trace,
        ))
        if reply.act.has_intent("bye"):
            self.reason = "both_bye"
        elif len(self.turns) >= self.max_turns:
            self.reason = "max_turns"
        return reply.response_lex or reply.response

    def to_dialog(self) -> Dialog:
        return Dialog(
            dialog_id=self.dialog_id,
            goal=UserGoal(),
            turns=list(self.turns),
            termination_reason=self.reason or "user_quit",
            final_goal_state=GoalState(),
        )

    def run(self, read: Callable[[], str], write: Callable[[str], None]) -> Dialog:
        """Read lines until ``/quit``, a system goodbye or the turn cap; end of input counts as quit."""
        while not self.finished:
            try:
                text = read()
            except EOFError:
                self.reason = "user_quit"
                break
            reply = self.step(text)
            if reply is not None:
                write(reply)
        logger.info(f"Chat session {self.dialog_id} ended after {len(self.turns)} turns: {self.reason}")
        return self.to_dialog()


def replay_session(ds: DialogSystem, dialog: Dialog, seed: int = 0) -> List[str]:
    """Feed the saved user utterances again; returns the delexicalized responses."""
    ds.reset(np.random.default_rng(seed))
    return [ds.respond(turn.user_utterance).response for turn in dialog.turns]
