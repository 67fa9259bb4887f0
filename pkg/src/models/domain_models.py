"""
Dialog value types: acts, belief states, goals, turns and dialogs.

All collections are kept in a canonical order (domain, intent, slot) so that equal
objects always serialize to identical text.
"""
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Tuple

from .world_models import DBResult, DONTCARE

INTENT_ORDER = ("nooffer", "inform", "request", "offerbook", "book", "reqmore", "greet", "bye")
INTENTS = frozenset(INTENT_ORDER)
SLOTLESS_INTENTS = frozenset({"offerbook", "bye", "greet", "reqmore"})
CONSTRAINT_INTENTS = ("inform", "book")

GENERAL_DOMAIN = "general"
DOMAIN_ORDER = ("restaurant", "hotel", "attraction", "train", GENERAL_DOMAIN)
SLOT_ORDER = (
    "name", "id", "choice", "food", "pricerange", "type", "area", "departure", "destination",
    "day", "people", "leaveat", "duration", "price", "fee", "address", "phone", "postcode",
)

TERMINATION_REASONS = ("both_bye", "goal_empty", "repeated_turn", "max_turns", "user_quit")


def domain_rank(domain: str) -> Tuple[int, str]:
    if domain in DOMAIN_ORDER:
        return (DOMAIN_ORDER.index(domain), "")
    return (len(DOMAIN_ORDER), domain)


def slot_rank(slot: Optional[str]) -> Tuple[int, str]:
    if slot is None:
        return (-1, "")
    if slot in SLOT_ORDER:
        return (SLOT_ORDER.index(slot), "")
    return (len(SLOT_ORDER), slot)


def sort_slots(slots: Iterable[str]) -> List[str]:
    return sorted(slots, key=slot_rank)


def sort_domains(domains: Iterable[str]) -> List[str]:
    return sorted(domains, key=domain_rank)


@dataclass(frozen=True)
class ActItem:
    """One (domain, intent, slot, value) element of a dialog act.

    System acts produced by models carry slots only, so inform/book/nooffer values
    are optional; request items never carry a value and slotless intents carry
    neither slot nor value.
    """
    domain: str
    intent: str
    slot: Optional[str] = None
    value: Optional[str] = None

    def __post_init__(self):
        if self.intent not in INTENTS:
            raise ValueError(f"unknown intent: {self.intent}")
        if self.intent in SLOTLESS_INTENTS:
            if self.slot is not None or self.value is not None:
                raise ValueError(f"{self.intent} items carry neither slot nor value")
        elif self.slot is None:
            raise ValueError(f"{self.intent} items need a slot")
        if self.intent == "request" and self.value is not None:
            raise ValueError("request items carry no value")

    def sort_key(self):
        return (domain_rank(self.domain), INTENT_ORDER.index(self.intent), slot_rank(self.slot), self.value or "")

    def without_value(self) -> "ActItem":
        if self.value is None:
            return self
        return ActItem(self.domain, self.intent, self.slot)

    @property
    def is_dontcare(self) -> bool:
        return self.value == DONTCARE

    def to_list(self) -> List[Optional[str]]:
        return [self.domain, self.intent, self.slot, self.value]

    @classmethod
    def from_list(cls, data: List[Optional[str]]) -> "ActItem":
        domain, intent, slot, value = (list(data) + [None, None])[:4]
        return cls(domain, intent, slot, value)


@dataclass(frozen=True)
class DialogAct:
    """Ordered set of act items."""
    items: Tuple[ActItem, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(sorted(set(self.items), key=ActItem.sort_key)))

    @classmethod
    def of(cls, *items: ActItem) -> "DialogAct":
        return cls(tuple(items))

    def __iter__(self):
        return iter(self.items)

    def __len__(self):
        return len(self.items)

    def __bool__(self):
        return bool(self.items)

    @property
    def domains(self) -> List[str]:
        return sort_domains({item.domain for item in self.items})

    @property
    def task_domains(self) -> List[str]:
        return [d for d in self.domains if d != GENERAL_DOMAIN]

    def filter(self, intent: Optional[str] = None, domain: Optional[str] = None) -> List[ActItem]:
        return [
            item for item in self.items
            if (intent is None or item.intent == intent) and (domain is None or item.domain == domain)
        ]

    def has(self, domain: str, intent: str, slot: Optional[str] = None) -> bool:
        return any(
            item.domain == domain and item.intent == intent and (slot is None or item.slot == slot)
            for item in self.items
        )

    def has_intent(self, intent: str) -> bool:
        return any(item.intent == intent for item in self.items)

    def slots(self, domain: str, intent: str) -> List[str]:
        return [item.slot for item in self.filter(intent, domain) if item.slot is not None]

    def union(self, other: "DialogAct") -> "DialogAct":
        return DialogAct(self.items + other.items)

    def without_values(self) -> "DialogAct":
        return DialogAct(tuple(item.without_value() for item in self.items))

    def to_list(self) -> List[List[Optional[str]]]:
        return [item.to_list() for item in self.items]

    @classmethod
    def from_list(cls, data: List[List[Optional[str]]]) -> "DialogAct":
        return cls(tuple(ActItem.from_list(entry) for entry in data))


@dataclass
class BeliefState:
    """Per-domain slot -> value constraints accumulated by the dialog system."""
    slots: Dict[str, Dict[str, str]] = field(default_factory=dict)

    def __post_init__(self):
        self.slots = {d: dict(v) for d, v in self.slots.items() if v}

    @property
    def domains(self) -> List[str]:
        return sort_domains(self.slots)

    def get(self, domain: str) -> Dict[str, str]:
        return dict(self.slots.get(domain, {}))

    def value(self, domain: str, slot: str) -> Optional[str]:
        return self.slots.get(domain, {}).get(slot)

    def copy(self) -> "BeliefState":
        return BeliefState({d: dict(v) for d, v in self.slots.items()})

    def updated(self, triples: Iterable[Tuple[str, str, str]]) -> "BeliefState":
        """New belief with each (domain, slot, value) written over the current value."""
        result = self.copy()
        for domain, slot, value in triples:
            result.slots.setdefault(domain, {})[slot] = value
        return result

    def is_empty(self) -> bool:
        return not any(self.slots.values())

    def to_dict(self) -> Dict[str, Dict[str, str]]:
        return {d: {s: self.slots[d][s] for s in sort_slots(self.slots[d])} for d in self.domains}

    @classmethod
    def from_dict(cls, data: Dict[str, Dict[str, str]]) -> "BeliefState":
        return cls({d: dict(v) for d, v in data.items()})


@dataclass
class DomainGoal:
    """Constraints and requests of one domain."""
    inform: Dict[str, str] = field(default_factory=dict)
    book: Dict[str, str] = field(default_factory=dict)
    requests: List[str] = field(default_factory=list)

    def is_empty(self) -> bool:
        return not (self.inform or self.book or self.requests)

    def constraint(self, slot: str) -> Optional[Tuple[str, str]]:
        if slot in self.inform:
            return ("inform", self.inform[slot])
        if slot in self.book:
            return ("book", self.book[slot])
        return None

    def item_count(self) -> int:
        return len(self.inform) + len(self.book) + len(self.requests)

    def copy(self) -> "DomainGoal":
        return DomainGoal(dict(self.inform), dict(self.book), list(self.requests))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "inform": {s: self.inform[s] for s in sort_slots(self.inform)},
            "book": {s: self.book[s] for s in sort_slots(self.book)},
            "requests": sort_slots(self.requests),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "DomainGoal":
        return cls(dict(data.get("inform", {})), dict(data.get("book", {})), list(data.get("requests", [])))


@dataclass
class GoalState:
    """Per-domain goal items; also used for the remaining (uncompleted) part of a goal."""
    domains: Dict[str, DomainGoal] = field(default_factory=dict)

    def __eq__(self, other):
        if not isinstance(other, GoalState):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    @classmethod
    def from_items(cls, items: Iterable[ActItem]) -> "GoalState":
        goal = cls()
        for item in items:
            goal.add_item(item)
        return goal

    def add_item(self, item: ActItem) -> None:
        domain_goal = self.domains.setdefault(item.domain, DomainGoal())
        if item.intent == "inform":
            domain_goal.inform[item.slot] = item.value
        elif item.intent == "book":
            domain_goal.book[item.slot] = item.value
        elif item.intent == "request":
            if item.slot not in domain_goal.requests:
                domain_goal.requests.append(item.slot)
        else:
            raise ValueError(f"{item.intent} items cannot be goal items")

    def domain(self, name: str) -> DomainGoal:
        return self.domains.get(name, DomainGoal())

    @property
    def domain_names(self) -> List[str]:
        return [d for d, g in self.domains.items() if not g.is_empty()]

    def items(self) -> List[ActItem]:
        result: List[ActItem] = []
        for domain in sort_domains(self.domains):
            goal = self.domains[domain]
            result.extend(ActItem(domain, "inform", s, goal.inform[s]) for s in sort_slots(goal.inform))
            result.extend(ActItem(domain, "book", s, goal.book[s]) for s in sort_slots(goal.book))
            result.extend(ActItem(domain, "request", s) for s in sort_slots(goal.requests))
        return result

    def is_empty(self) -> bool:
        return all(goal.is_empty() for goal in self.domains.values())

    def item_count(self) -> int:
        return sum(goal.item_count() for goal in self.domains.values())

    def contains(self, other: "GoalState") -> bool:
        """True when every item of other is an item of self."""
        own = set(self.items())
        return all(item in own for item in other.items())

    def copy(self) -> "GoalState":
        return GoalState({d: g.copy() for d, g in self.domains.items()})

    def prune(self) -> "GoalState":
        self.domains = {d: g for d, g in self.domains.items() if not g.is_empty()}
        return self

    def to_dict(self) -> Dict[str, Any]:
        return {d: self.domains[d].to_dict() for d in sort_domains(self.domains) if not self.domains[d].is_empty()}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "GoalState":
        return cls({d: DomainGoal.from_dict(v) for d, v in data.items()})


@dataclass(eq=False)
class UserGoal(GoalState):
    """The full goal a user starts with; keeps the order in which domains are pursued."""
    unsatisfiable_domains: List[str] = field(default_factory=list)
    abandoned_domains: List[str] = field(default_factory=list)

    def copy(self) -> "UserGoal":
        return UserGoal(
            {d: g.copy() for d, g in self.domains.items()},
            list(self.unsatisfiable_domains),
            list(self.abandoned_domains),
        )

    def as_goal_state(self) -> GoalState:
        return GoalState({d: g.copy() for d, g in self.domains.items()})

    def to_dict(self) -> Dict[str, Any]:
        return {
            "domains": {d: g.to_dict() for d, g in self.domains.items()},
            "order": list(self.domains),
            "unsatisfiable_domains": list(self.unsatisfiable_domains),
            "abandoned_domains": list(self.abandoned_domains),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "UserGoal":
        domains = data["domains"]
        order = data.get("order", list(domains))
        return cls(
            {d: DomainGoal.from_dict(domains[d]) for d in order},
            list(data.get("unsatisfiable_domains", [])),
            list(data.get("abandoned_domains", [])),
        )


@dataclass
class GoalChangeEvent:
    """A constraint value replaced after the system reported no offer."""
    domain: str
    slot: str
    old_value: str
    new_value: str
    turn: int
    fallback: bool = False

    def __post_init__(self):
        if self.new_value == self.old_value:
            raise ValueError(f"goal change must alter {self.domain}.{self.slot}")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "domain": self.domain, "slot": self.slot, "old_value": self.old_value,
            "new_value": self.new_value, "turn": self.turn, "fallback": self.fallback,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "GoalChangeEvent":
        return cls(**data)


@dataclass
class RewardTrace:
    """Per-turn rewards, policy token counts and per-token returns."""
    rewards: List[float]
    policy_lengths: List[int]
    returns: List[List[float]]

    def to_dict(self) -> Dict[str, Any]:
        return {"rewards": self.rewards, "policy_lengths": self.policy_lengths, "returns": self.returns}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RewardTrace":
        return cls(list(data["rewards"]), list(data["policy_lengths"]), [list(r) for r in data["returns"]])


@dataclass
class Turn:
    """Everything produced during one user/system exchange."""
    index: int
    goal_state: GoalState
    user_belief: DialogAct
    user_act: DialogAct
    user_utterance: str
    sys_belief: BeliefState
    db: Dict[str, DBResult]
    sys_act: DialogAct
    sys_response: str
    sys_response_lex: str = ""
    goal_changes: List[GoalChangeEvent] = field(default_factory=list)
    ds_trace: Optional[Any] = field(default=None, compare=False, repr=False)

    def content(self) -> Tuple[DialogAct, str, DialogAct, str]:
        """The tuple compared by the repeated-turn termination rule."""
        return (self.user_act, self.user_utterance, self.sys_act, self.sys_response)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "index": self.index,
            "goal_state": self.goal_state.to_dict(),
            "user_belief": self.user_belief.to_list(),
            "user_act": self.user_act.to_list(),
            "user_utterance": self.user_utterance,
            "sys_belief": self.sys_belief.to_dict(),
            "db": {d: self.db[d].summary() for d in sort_domains(self.db)},
            "sys_act": self.sys_act.to_list(),
            "sys_response": self.sys_response,
            "sys_response_lex": self.sys_response_lex,
            "goal_changes": [e.to_dict() for e in self.goal_changes],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Turn":
        return cls(
            index=data["index"],
            goal_state=GoalState.from_dict(data["goal_state"]),
            user_belief=DialogAct.from_list(data["user_belief"]),
            user_act=DialogAct.from_list(data["user_act"]),
            user_utterance=data["user_utterance"],
            sys_belief=BeliefState.from_dict(data["sys_belief"]),
            db={d: DBResult.from_summary(d, v) for d, v in data["db"].items()},
            sys_act=DialogAct.from_list(data["sys_act"]),
            sys_response=data["sys_response"],
            sys_response_lex=data.get("sys_response_lex", ""),
            goal_changes=[GoalChangeEvent.from_dict(e) for e in data.get("goal_changes", [])],
        )


@dataclass
class Dialog:
    """A complete episode trace."""
    dialog_id: str
    goal: UserGoal
    turns: List[Turn]
    termination_reason: str
    initial_goal: Optional[UserGoal] = None
    final_goal_state: Optional[GoalState] = None
    reward_trace: Optional[RewardTrace] = None

    def __post_init__(self):
        if self.termination_reason not in TERMINATION_REASONS:
            raise ValueError(f"unknown termination reason: {self.termination_reason}")
        if not self.turns and self.termination_reason != "user_quit":
            raise ValueError("a dialog needs at least one turn")
        for expected, turn in enumerate(self.turns, start=1):
            if turn.index != expected:
                raise ValueError(f"turn indices must run 1..T, found {turn.index} at position {expected}")
        if self.initial_goal is None:
            self.initial_goal = self.goal.copy()

    @property
    def num_turns(self) -> int:
        return len(self.turns)

    @property
    def goal_changes(self) -> List[GoalChangeEvent]:
        return [event for turn in self.turns for event in turn.goal_changes]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "dialog_id": self.dialog_id,
            "goal": self.goal.to_dict(),
            "initial_goal": self.initial_goal.to_dict(),
            "turns": [turn.to_dict() for turn in self.turns],
            "termination_reason": self.termination_reason,
            "final_goal_state": self.final_goal_state.to_dict() if self.final_goal_state is not None else None,
            "reward_trace": self.reward_trace.to_dict() if self.reward_trace is not None else None,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Dialog":
        final_state = data.get("final_goal_state")
        rewards = data.get("reward_trace")
        return cls(
            dialog_id=data["dialog_id"],
            goal=UserGoal.from_dict(data["goal"]),
            turns=[Turn.from_dict(t) for t in data["turns"]],
            termination_reason=data["termination_reason"],
            initial_goal=UserGoal.from_dict(data["initial_goal"]),
            final_goal_state=GoalState.from_dict(final_state) if final_state is not None else None,
            reward_trace=RewardTrace.from_dict(rewards) if rewards is not None else None,
        )
