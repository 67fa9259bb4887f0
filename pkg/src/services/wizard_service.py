import logging
from typing import Dict, List, Optional, Set

import numpy as np

from ..agents.base import DialogSystem, SystemReply
from ..models.domain_models import ActItem, BeliefState, DialogAct, GENERAL_DOMAIN
from ..models.world_models import BUCKET_MANY, BUCKET_ZERO, DBResult, DONTCARE
from ..repositories.world_repository import WorldRepository
from .lexicalization_service import LexicalizationService
from .template_service import TemplateService

logger = logging.getLogger(__name__)


class WizardDialogSystem(DialogSystem):
    """Scripted dialog system that reads the semantic user act.

    Belief accumulates user informs (newer values overwrite). Per turn the wizard
    either reports no offer (naming the constraints that block a match), narrows
    the search with a request while there are many matches, or offers the first
    match and answers pending requests. Bookings are confirmed once every book
    slot is known for an offered entity.
    """

    name = "wizard"

    def __init__(self, world: WorldRepository, templates: TemplateService, lexicalizer: Optional[LexicalizationService] = None):
        self.world = world
        self.ontology = world.ontology
        self.templates = templates
        self.lexicalizer = lexicalizer or LexicalizationService(world.ontology)
        self.reset(np.random.default_rng(0))

    def reset(self, rng: np.random.Generator) -> None:
        self.rng = rng
        self.belief = BeliefState()
        self.offered: Dict[str, str] = {}
        self.pending: Dict[str, List[str]] = {}
        self.booked: Set[str] = set()
        self.current_domain: Optional[str] = None

    def _blocking_slots(self, domain: str, constraints: Dict[str, str]) -> List[str]:
        active = [s for s, v in constraints.items() if v != DONTCARE]
        culprits = [
            s for s in active
            if self.world.query_db(domain, {k: v for k, v in constraints.items() if k != s}).bucket != BUCKET_ZERO
        ]
        return culprits or active

    def respond(self, utterance: str, user_act: Optional[DialogAct] = None) -> SystemReply:
        user_act = user_act or DialogAct()
        self.belief = self.belief.updated(
            (item.domain, item.slot, item.value)
            for item in user_act
            if item.intent in ("inform", "book") and item.value is not None and self.ontology.has_domain(item.domain)
        )
        for item in user_act.filter("request"):
            slots = self.pending.setdefault(item.domain, [])
            if item.slot not in slots:
                slots.append(item.slot)
        if user_act.task_domains:
            self.current_domain = user_act.task_domains[0]

        db = self.world.query_belief(self.belief)
        result: Optional[DBResult] = None
        if user_act.has_intent("bye"):
            act = DialogAct.of(ActItem(GENERAL_DOMAIN, "bye"))
        elif self.current_domain is None:
            act = DialogAct.of(ActItem(GENERAL_DOMAIN, "reqmore"))
        else:
            domain = self.current_domain
            result = db.get(domain) or self.world.query_db(domain, {})
            act = self._domain_act(domain, result)

        delex = self.templates.system_nlg(act, self.rng)
        domain = act.task_domains[0] if act.task_domains else None
        lex_db = result if domain is not None else None
        lex, _ = self.lexicalizer.lexicalize(delex, self.belief, lex_db, domain)
        return SystemReply(self.belief.copy(), db, act, delex, lex)

    def _domain_act(self, domain: str, result: DBResult) -> DialogAct:
        schema = self.ontology.schema(domain)
        belief = self.belief.get(domain)
        constraints = {s: v for s, v in belief.items() if s in schema.informable}
        items: List[ActItem] = []

        if result.bucket == BUCKET_ZERO:
            for slot in self._blocking_slots(domain, constraints):
                items.append(ActItem(domain, "nooffer", slot, constraints[slot]))
            return DialogAct(tuple(items))

        unfilled = [s for s in schema.informable if s not in constraints]
        if result.bucket == BUCKET_MANY and unfilled:
            items.append(ActItem(domain, "inform", "choice"))
            items.append(ActItem(domain, "request", unfilled[0]))
            return DialogAct(tuple(items))

        selected = result.selected
        offering = self.offered.get(domain) != selected.name
        if offering:
            self.offered[domain] = selected.name
            items.append(ActItem(domain, "inform", schema.key))
            if result.count > 1:
                items.append(ActItem(domain, "inform", "choice"))
            if schema.bookable and not all(s in belief for s in schema.book):
                items.append(ActItem(domain, "offerbook"))

        answered = False
        for slot in self.pending.pop(domain, []):
            if selected.get(slot) is not None:
                items.append(ActItem(domain, "inform", slot))
                answered = True

        if schema.bookable and domain not in self.booked and all(s in belief for s in schema.book):
            items.extend(ActItem(domain, "book", s) for s in schema.book)
            self.booked.add(domain)
            answered = True

        if not items or (answered and not offering):
            items.append(ActItem(GENERAL_DOMAIN, "reqmore"))
        return DialogAct(tuple(items))
