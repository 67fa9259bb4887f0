"""
The interaction loop between a dialog system and a user simulator.

The user speaks first with an empty previous response. After every full turn the
user reads the system response (closing goal-state update) and the episode ends on
the first rule that fires, checked in this order: goal_empty, both_bye,
repeated_turn, max_turns. A goal state emptied by abandoning a domain is not
goal_empty.
"""
import logging
from typing import List, Optional

import numpy as np

from ..agents.base import DialogSystem, UserSimulator
from ..models.domain_models import Dialog, Turn, UserGoal
from .goal_tracking_service import is_goal_completed

logger = logging.getLogger(__name__)


def termination_reason(turns: List[Turn], goal_empty: bool, max_turns: int) -> Optional[str]:
    """First termination rule matched by the dialog so far, or None to continue."""
    last = turns[-1]
    if goal_empty:
        return "goal_empty"
    if last.user_act.has_intent("bye") and last.sys_act.has_intent("bye"):
        return "both_bye"
    if len(turns) >= 2 and last.content() == turns[-2].content():
        return "repeated_turn"
    if last.index >= max_turns:
        return "max_turns"
    return None


def run_episode(
    ds: DialogSystem,
    us: UserSimulator,
    goal: UserGoal,
    rng: np.random.Generator,
    max_turns: int = 20,
    dialog_id: str = "episode",
) -> Dialog:
    """Roll one dialog; the returned trace carries the possibly-changed goal."""
    if max_turns < 1:
        raise ValueError(f"max_turns must be positive, got {max_turns}")
    us.reset(goal, rng)
    ds.reset(rng)

    turns: List[Turn] = []
    observation = us.observe("", None, 1)
    reason: Optional[str] = None
    while reason is None:
        t = len(turns) + 1
        user = us.respond()
        system = ds.respond(user.utterance, user.user_act)
        turns.append(Turn(
            index=t,
            goal_state=observation.goal_state,
            user_belief=observation.user_belief,
            user_act=user.user_act,
            user_utterance=user.utterance,
            sys_belief=system.belief,
            db=system.db,
            sys_act=system.act,
            sys_response=system.response,
            sys_response_lex=system.response_lex,
            goal_changes=list(observation.goal_changes),
            ds_trace=system.trace,
        ))
        observation = us.observe(system.response, system.act, t + 1)
        reason = termination_reason(turns, is_goal_completed(us.goal_state, us.goal), max_turns)

    if observation.goal_changes:
        # changes triggered by the final response have no following turn
        turns[-1].goal_changes.extend(observation.goal_changes)
    logger.debug(f"Episode {dialog_id} ended after {len(turns)} turns: {reason}")
    return Dialog(
        dialog_id=dialog_id,
        goal=us.goal.copy(),
        turns=turns,
        termination_reason=reason,
        initial_goal=goal.copy(),
        final_goal_state=us.goal_state.copy(),
    )
