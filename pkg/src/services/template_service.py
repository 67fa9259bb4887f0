import re
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Set, Tuple

import numpy as np

from ..config.settings import settings
from ..models.domain_models import ActItem, DialogAct, GENERAL_DOMAIN, SLOTLESS_INTENTS
from ..models.exceptions import WorldError
from ..models.world_models import DONTCARE, Ontology

logger = logging.getLogger(__name__)

CLAUSE_END = {".", "?", "!"}
GENERAL_INTENTS = {"bye", "greet", "reqmore"}


@dataclass
class SystemPattern:
    """A compiled system template used by the rule NLU."""
    intent: str
    slot: Optional[str]
    template: str
    regex: re.Pattern
    placeholder: Optional[str]
    literal_length: int


class TemplateService:
    """Template NLG for both sides and rule NLU over system responses."""

    def __init__(self, templates_path: Optional[Path] = None, ontology: Optional[Ontology] = None):
        self.templates_path = Path(templates_path or settings.TEMPLATES_PATH)
        try:
            data = json.loads(self.templates_path.read_text(encoding="utf-8"))
        except (FileNotFoundError, json.JSONDecodeError) as e:
            raise WorldError(f"cannot load templates from {self.templates_path}: {e}")
        self.system: Dict[str, Dict[str, List[str]]] = data["system"]
        self.user: Dict[str, Dict[str, List[str]]] = data["user"]
        self.ontology = ontology
        self._patterns = self._compile_system_patterns()

    # ------------------------------------------------------------------
    # NLG
    # ------------------------------------------------------------------

    @staticmethod
    def _pick(options: List[str], rng: Optional[np.random.Generator]) -> str:
        if rng is None or len(options) == 1:
            return options[0]
        return options[int(rng.integers(len(options)))]

    def system_nlg(self, act: DialogAct, rng: Optional[np.random.Generator] = None) -> str:
        """Delexicalized system response for an act."""
        clauses = []
        for item in act:
            options = self.system.get(item.intent, {}).get(item.slot or "")
            if not options:
                logger.warning(f"No system template for {item.intent}/{item.slot}; using generic phrasing")
                clauses.append(f"{item.intent} {item.slot} [value_{item.slot}] ." if item.slot else f"{item.intent} .")
                continue
            clauses.append(self._pick(options, rng))
        return " ".join(clauses)

    def template_nlg(
        self,
        user_act: DialogAct,
        rng: Optional[np.random.Generator] = None,
        known_domains: Optional[Set[str]] = None,
    ) -> str:
        """User utterance for an act; domains absent from known_domains get an intro clause."""
        clauses = []
        introduced: Set[str] = set(known_domains or ())
        for item in user_act:
            if known_domains is not None and item.domain != GENERAL_DOMAIN and item.domain not in introduced:
                intro = self.user.get("intro", {})
                options = intro.get(item.domain) or intro.get("*")
                if options:
                    clauses.append(self._pick(options, rng).format(domain=item.domain))
                introduced.add(item.domain)
            clauses.append(self._user_clause(item, rng))
        return " ".join(clauses)

    def _user_clause(self, item: ActItem, rng: Optional[np.random.Generator]) -> str:
        group = "dontcare" if item.intent == "inform" and item.value == DONTCARE else item.intent
        table = self.user.get(group, {})
        key = "" if item.intent in SLOTLESS_INTENTS else item.slot
        options = table.get(key) or table.get("*")
        if not options:
            logger.warning(f"No user template for {group}/{key}; using generic phrasing")
            words = [w for w in (item.intent, item.slot, item.value) if w]
            return " ".join(words) + " ."
        return self._pick(options, rng).format(slot=item.slot or "", value=item.value or "", domain=item.domain)

    # ------------------------------------------------------------------
    # NLU
    # ------------------------------------------------------------------

    def _compile_system_patterns(self) -> List[SystemPattern]:
        patterns = []
        for intent, table in self.system.items():
            for slot, options in table.items():
                for template in options:
                    pieces, placeholder, literal = [], None, 0
                    for token in template.split():
                        match = re.fullmatch(r"\[value_([a-z]+)\]", token)
                        if match:
                            placeholder = match.group(1)
                            pieces.append(rf"(?P<value>\[value_{placeholder}\]|.+?)")
                        else:
                            pieces.append(re.escape(token))
                            literal += 1
                    patterns.append(SystemPattern(
                        intent=intent,
                        slot=slot or None,
                        template=template,
                        regex=re.compile(r"\s+".join(pieces)),
                        placeholder=placeholder,
                        literal_length=literal,
                    ))
        patterns.sort(key=lambda p: -p.literal_length)
        return patterns

    @staticmethod
    def split_clauses(text: str) -> List[str]:
        clauses, current = [], []
        for token in text.split():
            current.append(token)
            if token in CLAUSE_END:
                clauses.append(" ".join(current))
                current = []
        if current:
            clauses.append(" ".join(current))
        return clauses

    def _value_fits(self, domain: Optional[str], slot: str, value: str) -> bool:
        if "[value_" in value:
            return value == f"[value_{slot}]"
        if self.ontology is None or domain is None or not self.ontology.has_domain(domain):
            return True
        schema = self.ontology.schema(domain)
        if slot in schema.informable or slot in schema.book:
            return value in schema.values(slot)
        return True

    def _domain_for_slot(self, slot: Optional[str]) -> str:
        if self.ontology is not None and slot is not None:
            for name, schema in self.ontology.domains.items():
                if slot in schema.all_slots:
                    return name
        return GENERAL_DOMAIN

    def rule_nlu(self, text: str, context_domain: Optional[str] = None) -> DialogAct:
        """System act recovered from a (de)lexicalized response; unknown clauses are ignored."""
        items = []
        for clause in self.split_clauses(text or ""):
            item = self._parse_clause(clause, context_domain)
            if item is not None:
                items.append(item)
        return DialogAct(tuple(items))

    def _parse_clause(self, clause: str, context_domain: Optional[str]) -> Optional[ActItem]:
        for pattern in self._patterns:
            match = pattern.regex.fullmatch(clause)
            if match is None:
                continue
            if pattern.intent in GENERAL_INTENTS:
                return ActItem(GENERAL_DOMAIN, pattern.intent)
            domain = context_domain or self._domain_for_slot(pattern.slot)
            if pattern.placeholder is not None and not self._value_fits(domain, pattern.placeholder, match.group("value")):
                continue
            if pattern.intent in SLOTLESS_INTENTS:
                return ActItem(domain, pattern.intent)
            return ActItem(domain, pattern.intent, pattern.slot)
        return None

    def system_inventory(self) -> Iterable[Tuple[str, Optional[str], str]]:
        """Every (intent, slot, template) of the system table."""
        for intent, table in self.system.items():
            for slot, options in table.items():
                for template in options:
                    yield intent, slot or None, template
