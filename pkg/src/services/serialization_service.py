"""
Flat token spans for beliefs, acts, goal states and DB results.

Grammars (see docs/spans.ebnf):

    belief     = { "[" domain "]" { slot value } }
    act        = { "[" domain "]" { "[" intent "]" { slot [ value ] } } }
    goal state = { "[" domain "]" [ "[inform]" { slot value } ] [ "[book]" { slot value } ] [ "[request]" { slot } ] }
    db         = { "[" domain "]" db_bucket }

Parsers are total: unknown markers, slots and values are skipped and counted,
never raised.
"""
import logging
from typing import Dict, List, Optional, Sequence, Tuple

from ..models.domain_models import (
    ActItem, BeliefState, DialogAct, GENERAL_DOMAIN, GoalState, INTENT_ORDER, INTENTS,
    SLOTLESS_INTENTS, sort_domains, sort_slots,
)
from ..models.world_models import DBResult, DONTCARE, Ontology

logger = logging.getLogger(__name__)

DB_BUCKET_TOKENS = {"0": "[db_0]", "1": "[db_1]", "few": "[db_few]", "many": "[db_many]"}
DB_TOKEN_BUCKETS = {token: bucket for bucket, token in DB_BUCKET_TOKENS.items()}


def marker(name: str) -> str:
    return f"[{name}]"


def unmark(token: str) -> Optional[str]:
    if len(token) > 2 and token.startswith("[") and token.endswith("]"):
        return token[1:-1]
    return None


class SpanSerializer:
    """Serializer and tolerant parser for all span grammars of one ontology."""

    def __init__(self, ontology: Ontology):
        self.ontology = ontology

    # ------------------------------------------------------------------
    # helpers
    # ------------------------------------------------------------------

    def _is_domain(self, name: Optional[str]) -> bool:
        return name is not None and (name == GENERAL_DOMAIN or self.ontology.has_domain(name))

    def _constraint_values(self, domain: str, slot: str) -> Optional[List[str]]:
        if not self.ontology.has_domain(domain):
            return None
        schema = self.ontology.schema(domain)
        if slot in schema.informable or slot in schema.book:
            return list(schema.values(slot)) + [DONTCARE]
        return None

    def _act_slots(self, domain: str) -> List[str]:
        if not self.ontology.has_domain(domain):
            return []
        return self.ontology.schema(domain).all_slots + ["choice"]

    @staticmethod
    def _match_value(tokens: Sequence[str], start: int, values: List[str]) -> Optional[Tuple[str, int]]:
        """Longest value whose tokens appear at tokens[start:]."""
        best: Optional[Tuple[str, int]] = None
        for value in values:
            parts = value.split()
            if tokens[start:start + len(parts)] == parts and (best is None or len(parts) > best[1]):
                best = (value, len(parts))
        return best

    @staticmethod
    def _is_marker(token: str) -> bool:
        return unmark(token) is not None

    # ------------------------------------------------------------------
    # belief
    # ------------------------------------------------------------------

    def serialize_belief(self, belief: BeliefState) -> str:
        parts: List[str] = []
        for domain in belief.domains:
            slots = belief.get(domain)
            if not slots:
                continue
            parts.append(marker(domain))
            for slot in sort_slots(slots):
                parts.extend([slot, slots[slot]])
        return " ".join(parts)

    def parse_belief_with_stats(self, text: str) -> Tuple[BeliefState, int]:
        tokens = text.split()
        slots: Dict[str, Dict[str, str]] = {}
        domain: Optional[str] = None
        skipped = 0
        i = 0
        while i < len(tokens):
            token = tokens[i]
            name = unmark(token)
            if name is not None:
                domain = name if self._is_domain(name) and name != GENERAL_DOMAIN else None
                if domain is None:
                    skipped += 1
                i += 1
                continue
            values = self._constraint_values(domain, token) if domain else None
            if values is not None:
                match = self._match_value(tokens, i + 1, values)
                if match is not None:
                    slots.setdefault(domain, {})[token] = match[0]
                    i += 1 + match[1]
                    continue
            skipped += 1
            i += 1
        return BeliefState(slots), skipped

    def parse_belief(self, text: str) -> BeliefState:
        return self.parse_belief_with_stats(text)[0]

    # ------------------------------------------------------------------
    # acts
    # ------------------------------------------------------------------

    def serialize_act(self, act: DialogAct, with_values: bool = False) -> str:
        parts: List[str] = []
        for domain in act.domains:
            parts.append(marker(domain))
            for intent in INTENT_ORDER:
                items = act.filter(intent, domain)
                if not items:
                    continue
                parts.append(marker(intent))
                for item in items:
                    if item.slot is None:
                        continue
                    parts.append(item.slot)
                    if with_values and item.value is not None and intent != "request":
                        parts.append(item.value)
        return " ".join(parts)

    def parse_act_with_stats(self, text: str, with_values: bool = False) -> Tuple[DialogAct, int]:
        tokens = text.split()
        items: List[ActItem] = []
        domain: Optional[str] = None
        intent: Optional[str] = None
        skipped = 0
        i = 0
        while i < len(tokens):
            token = tokens[i]
            name = unmark(token)
            if name is not None:
                if self._is_domain(name):
                    domain, intent = name, None
                elif name in INTENTS and domain is not None:
                    intent = name
                    if intent in SLOTLESS_INTENTS:
                        items.append(ActItem(domain, intent))
                        intent = None
                    elif domain == GENERAL_DOMAIN:
                        intent = None
                        skipped += 1
                else:
                    intent = None
                    skipped += 1
                i += 1
                continue
            if domain is None or intent is None or token not in self._act_slots(domain):
                skipped += 1
                i += 1
                continue
            if intent == "request" or not with_values:
                items.append(ActItem(domain, intent, token))
                i += 1
                continue
            values = self._constraint_values(domain, token)
            match = self._match_value(tokens, i + 1, values) if values else None
            if match is None:
                skipped += 1
                i += 1
                continue
            items.append(ActItem(domain, intent, token, match[0]))
            i += 1 + match[1]
        return DialogAct(tuple(items)), skipped

    def parse_act(self, text: str, with_values: bool = False) -> DialogAct:
        return self.parse_act_with_stats(text, with_values)[0]

    def serialize_user_act(self, act: DialogAct) -> str:
        return self.serialize_act(act, with_values=True)

    def parse_user_act(self, text: str) -> DialogAct:
        return self.parse_act(text, with_values=True)

    # ------------------------------------------------------------------
    # goal state
    # ------------------------------------------------------------------

    def serialize_goal_state(self, goal: GoalState) -> str:
        parts: List[str] = []
        for domain in sort_domains(goal.domains):
            domain_goal = goal.domains[domain]
            if domain_goal.is_empty():
                continue
            parts.append(marker(domain))
            for section, slots in (("inform", domain_goal.inform), ("book", domain_goal.book)):
                if slots:
                    parts.append(marker(section))
                    for slot in sort_slots(slots):
                        parts.extend([slot, slots[slot]])
            if domain_goal.requests:
                parts.append(marker("request"))
                parts.extend(sort_slots(domain_goal.requests))
        return " ".join(parts)

    def parse_goal_state_with_stats(self, text: str) -> Tuple[GoalState, int]:
        act, skipped = self.parse_act_with_stats(text, with_values=True)
        goal = GoalState()
        for item in act:
            if item.intent in ("inform", "book", "request") and item.domain != GENERAL_DOMAIN:
                goal.add_item(item)
            else:
                skipped += 1
        return goal, skipped

    def parse_goal_state(self, text: str) -> GoalState:
        return self.parse_goal_state_with_stats(text)[0]

    # ------------------------------------------------------------------
    # db
    # ------------------------------------------------------------------

    def serialize_db(self, db: Dict[str, DBResult]) -> str:
        parts: List[str] = []
        for domain in sort_domains(db):
            parts.extend([marker(domain), DB_BUCKET_TOKENS[db[domain].bucket]])
        return " ".join(parts)
