"""
Interfaces shared by every dialog system and user simulator.
"""
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from ..models.domain_models import BeliefState, DialogAct, GoalChangeEvent, GoalState, UserGoal
from ..models.world_models import DBResult


@dataclass
class UserObservation:
    """What the user understood from the last system response."""
    user_belief: DialogAct
    goal_state: GoalState
    goal_changes: List[GoalChangeEvent] = field(default_factory=list)


@dataclass
class UserReply:
    user_act: DialogAct
    utterance: str


@dataclass
class SystemReply:
    belief: BeliefState
    db: Dict[str, DBResult]
    act: DialogAct
    response: str
    response_lex: str
    trace: Optional[Any] = None


class UserSimulator(ABC):
    """A user that observes system responses and replies.

    ``observe`` runs the understanding stage and the goal-state update; ``respond``
    produces the user act and utterance for the current turn.
    """

    name: str = "user"

    @abstractmethod
    def reset(self, goal: UserGoal, rng: np.random.Generator) -> None:
        ...

    @abstractmethod
    def observe(self, r_prev: str, sys_act: Optional[DialogAct], turn: int) -> UserObservation:
        ...

    @abstractmethod
    def respond(self) -> UserReply:
        ...

    @property
    @abstractmethod
    def goal(self) -> UserGoal:
        ...

    @property
    @abstractmethod
    def goal_state(self) -> GoalState:
        ...


class DialogSystem(ABC):
    """A system that answers user utterances one turn at a time."""

    name: str = "system"

    @abstractmethod
    def reset(self, rng: np.random.Generator) -> None:
        ...

    @abstractmethod
    def respond(self, utterance: str, user_act: Optional[DialogAct] = None) -> SystemReply:
        """One system turn; scripted systems may read the semantic user act."""
        ...
