"""
Agenda-based user simulator.

The agenda is a stack of pending user act items (top first). System acts push
items onto it through a fixed, ordered rule set; each turn pops a seeded number of
items from a single domain to form the user act.

Rule order:
    1. system request for a goal constraint  -> push that constraint
    2. system request for any other slot     -> push inform(slot=dontcare)
    3. system nooffer                        -> goal change, re-push the changed constraint
    4. system inform of a requested slot     -> drop the pending request
    5. system offerbook, constraints conveyed -> move the domain's book items to the top
"""
import copy
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Set

import numpy as np

from ..agents.base import UserObservation, UserReply, UserSimulator
from ..config.settings import settings
from ..models.domain_models import (
    ActItem, DialogAct, GENERAL_DOMAIN, GoalChangeEvent, GoalState, UserGoal, sort_slots,
)
from ..models.world_models import DONTCARE, Ontology
from .goal_tracking_service import react_to_nooffer, update_goal_state
from .template_service import TemplateService

logger = logging.getLogger(__name__)

BYE = ActItem(GENERAL_DOMAIN, "bye")


@dataclass
class Agenda:
    """Pending user act items plus the goal they serve."""
    goal: UserGoal
    goal_state: GoalState
    stack: List[ActItem] = field(default_factory=list)
    max_pops: int = 3
    change_counts: Dict[str, int] = field(default_factory=dict)

    def push(self, item: ActItem) -> None:
        self.remove(lambda x: (x.domain, x.intent, x.slot) == (item.domain, item.intent, item.slot))
        self.stack.insert(0, item)

    def remove(self, predicate) -> None:
        self.stack = [x for x in self.stack if not predicate(x)]

    def only_bye(self) -> bool:
        return all(item.intent == "bye" for item in self.stack)

    def copy(self) -> "Agenda":
        return copy.deepcopy(self)


def goal_items_in_order(goal: GoalState, domains: List[str]) -> List[ActItem]:
    """Informs, requests, then book items per domain, domains in pursuit order."""
    items: List[ActItem] = []
    for domain in domains:
        domain_goal = goal.domains.get(domain)
        if domain_goal is None:
            continue
        items.extend(ActItem(domain, "inform", s, domain_goal.inform[s]) for s in sort_slots(domain_goal.inform))
        items.extend(ActItem(domain, "request", s) for s in sort_slots(domain_goal.requests))
        items.extend(ActItem(domain, "book", s, domain_goal.book[s]) for s in sort_slots(domain_goal.book))
    return items


def init_agenda(goal: UserGoal, max_pops: int = 3) -> Agenda:
    if goal.is_empty():
        raise ValueError("cannot build an agenda for an empty goal")
    stack = goal_items_in_order(goal, list(goal.domains)) + [BYE]
    return Agenda(goal=goal.copy(), goal_state=goal.as_goal_state(), stack=stack, max_pops=max_pops)


class AbusService:
    """Push/pop rules of the agenda."""

    def __init__(self, ontology: Ontology, max_goal_changes: Optional[int] = None):
        self.ontology = ontology
        self.max_goal_changes = settings.MAX_GOAL_CHANGES if max_goal_changes is None else max_goal_changes

    def apply_rules(self, agenda: Agenda, system_act: DialogAct, rng: np.random.Generator, turn: int = 0) -> List[GoalChangeEvent]:
        events: List[GoalChangeEvent] = []
        for item in system_act.filter("request"):
            self._answer_request(agenda, item)
        if system_act.has_intent("nooffer"):
            events = self._handle_nooffer(agenda, system_act, rng, turn)
        for item in system_act.filter("inform"):
            agenda.remove(lambda x, i=item: x.intent == "request" and x.domain == i.domain and x.slot == i.slot)
        for item in system_act.filter("offerbook"):
            domain_state = agenda.goal_state.domain(item.domain)
            if not domain_state.inform and domain_state.book:
                for slot in reversed(sort_slots(domain_state.book)):
                    agenda.push(ActItem(item.domain, "book", slot, domain_state.book[slot]))
        return events

    def _answer_request(self, agenda: Agenda, item: ActItem) -> None:
        if not self.ontology.has_domain(item.domain):
            return
        constraint = agenda.goal.domain(item.domain).constraint(item.slot)
        if constraint is not None:
            intent, value = constraint
            agenda.push(ActItem(item.domain, intent, item.slot, value))
        elif item.slot in self.ontology.schema(item.domain).constraint_slots:
            agenda.push(ActItem(item.domain, "inform", item.slot, DONTCARE))

    def _handle_nooffer(
        self, agenda: Agenda, system_act: DialogAct, rng: np.random.Generator, turn: int
    ) -> List[GoalChangeEvent]:
        agenda.goal_state, agenda.goal, events, abandoned = react_to_nooffer(
            agenda.goal_state, agenda.goal, system_act, self.ontology, rng, turn,
            agenda.change_counts, self.max_goal_changes,
        )
        for domain in abandoned:
            agenda.remove(lambda x, d=domain: x.domain == d)
        for event in events:
            agenda.push(ActItem(event.domain, "inform", event.slot, event.new_value))
        return events

    def pop_user_act(self, agenda: Agenda, rng: np.random.Generator) -> DialogAct:
        if agenda.only_bye():
            if agenda.goal_state.is_empty():
                agenda.stack = []
                return DialogAct.of(BYE)
            pending = goal_items_in_order(agenda.goal_state, list(agenda.goal.domains))
            agenda.stack = pending + [BYE]

        n = int(rng.integers(1, agenda.max_pops + 1))
        popped: List[ActItem] = []
        domain: Optional[str] = None
        while agenda.stack and len(popped) < n:
            top = agenda.stack[0]
            if top.intent == "bye":
                break
            if domain is None:
                domain = top.domain
            elif top.domain != domain:
                break
            popped.append(agenda.stack.pop(0))
        return DialogAct(tuple(popped))

    def abus_step(
        self, agenda: Agenda, system_act: DialogAct, rng: np.random.Generator, turn: int = 0
    ) -> "tuple[DialogAct, Agenda]":
        """Apply the push rules for a system act, then pop this turn's user act."""
        agenda = agenda.copy()
        self.apply_rules(agenda, system_act, rng, turn)
        return self.pop_user_act(agenda, rng), agenda


class AbusUserSimulator(UserSimulator):
    """Agenda-based user reading system responses through the rule NLU."""

    name = "abus"

    def __init__(
        self,
        ontology: Ontology,
        templates: TemplateService,
        semantic: bool = False,
        max_pops: Optional[int] = None,
        max_goal_changes: Optional[int] = None,
    ):
        self.ontology = ontology
        self.templates = templates
        self.semantic = semantic
        self.max_pops = max_pops or settings.MAX_POPS
        self.service = AbusService(ontology, max_goal_changes)
        self.agenda: Optional[Agenda] = None
        self.rng: Optional[np.random.Generator] = None
        self.last_user_act = DialogAct()
        self.known_domains: Set[str] = set()

    def reset(self, goal: UserGoal, rng: np.random.Generator) -> None:
        self.rng = rng
        self.last_user_act = DialogAct()
        self.known_domains = set()
        if goal.is_empty():
            self.agenda = Agenda(goal=goal.copy(), goal_state=goal.as_goal_state(), stack=[BYE], max_pops=self.max_pops)
        else:
            self.agenda = init_agenda(goal, self.max_pops)

    @property
    def goal(self) -> UserGoal:
        return self.agenda.goal

    @property
    def goal_state(self) -> GoalState:
        return self.agenda.goal_state

    def _context_domain(self) -> Optional[str]:
        domains = self.last_user_act.task_domains
        if domains:
            return domains[0]
        return next(iter(self.agenda.goal.domains), None)

    def observe(self, r_prev: str, sys_act: Optional[DialogAct], turn: int) -> UserObservation:
        if self.semantic and sys_act is not None:
            user_belief = sys_act.without_values()
        else:
            user_belief = self.templates.rule_nlu(r_prev, self._context_domain())
        self.agenda.goal_state = update_goal_state(self.agenda.goal_state, self.last_user_act, user_belief)
        events = self.service.apply_rules(self.agenda, user_belief, self.rng, turn)
        return UserObservation(user_belief, self.agenda.goal_state.copy(), events)

    def respond(self) -> UserReply:
        user_act = self.service.pop_user_act(self.agenda, self.rng)
        utterance = self.templates.template_nlg(user_act, self.rng, known_domains=self.known_domains)
        self.known_domains.update(user_act.task_domains)
        self.last_user_act = user_act
        return UserReply(user_act, utterance)
