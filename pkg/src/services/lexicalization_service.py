import re
import logging
from typing import Dict, Iterable, Optional, Tuple

from ..config.settings import settings
from ..models.domain_models import BeliefState
from ..models.world_models import DBResult, DONTCARE, Ontology

logger = logging.getLogger(__name__)

PLACEHOLDER_PATTERN = re.compile(r"\[value_([a-z]+)\]")


class LexicalizationService:
    """Maps between surface values and ``[value_<slot>]`` placeholders."""

    def __init__(self, ontology: Ontology):
        self.ontology = ontology
        self._ontology_values = self._ontology_candidates()

    def _ontology_candidates(self) -> Dict[str, str]:
        candidates: Dict[str, str] = {}
        for slot, values in self.ontology.all_values().items():
            for value in values:
                candidates.setdefault(value.lower(), slot)
        return candidates

    def _candidates(
        self,
        entities: Optional[DBResult],
        belief: Optional[BeliefState],
        domain: Optional[str],
    ) -> Dict[str, str]:
        """value -> slot, first writer wins: entity > belief > choice phrase > ontology."""
        candidates: Dict[str, str] = {}
        if entities is not None:
            for entity in entities.matches:
                for slot, value in entity.attributes.items():
                    candidates.setdefault(str(value).lower(), slot)
        if belief is not None:
            domains = [domain] if domain else belief.domains
            for d in domains:
                for slot, value in belief.get(d).items():
                    if value != DONTCARE:
                        candidates.setdefault(value.lower(), slot)
        for phrase in ("a few", "many"):
            candidates.setdefault(phrase, "choice")
        for value, slot in self._ontology_values.items():
            candidates.setdefault(value, slot)
        return candidates

    def delexicalize(
        self,
        response: str,
        entities: Optional[DBResult] = None,
        belief: Optional[BeliefState] = None,
        domain: Optional[str] = None,
    ) -> str:
        """Replace known values by placeholders, longest match first, on word boundaries."""
        candidates = self._candidates(entities, belief, domain)
        if not response or not candidates:
            return response
        alternatives = sorted(candidates, key=lambda v: (-len(v), v))
        pattern = re.compile(
            r"(?<![\w\[])(" + "|".join(re.escape(v) for v in alternatives) + r")(?![\w\]])",
            re.IGNORECASE,
        )
        return pattern.sub(lambda m: f"[value_{candidates[m.group(1).lower()]}]", response)

    def lexicalize(
        self,
        delex: str,
        belief: Optional[BeliefState],
        db: Optional[DBResult],
        domain: Optional[str] = None,
    ) -> Tuple[str, int]:
        """Fill placeholders from the selected entity, then the belief; returns (text, unresolved count)."""
        domain = domain or (db.domain if db is not None else None)
        selected = db.selected if db is not None else None
        unresolved = 0

        def fill(match: re.Match) -> str:
            nonlocal unresolved
            slot = match.group(1)
            if selected is not None and selected.get(slot) is not None:
                return selected.get(slot)
            if belief is not None and domain is not None:
                value = belief.value(domain, slot)
                if value is not None and value != DONTCARE:
                    return value
            if slot == "choice" and db is not None:
                return settings.CHOICE_PHRASES.get(db.bucket, settings.UNKNOWN_VALUE)
            unresolved += 1
            return settings.UNKNOWN_VALUE

        text = PLACEHOLDER_PATTERN.sub(fill, delex)
        if unresolved:
            logger.warning(f"{unresolved} placeholder(s) left unresolved in: {delex!r}")
        return text, unresolved

    @staticmethod
    def placeholders(delex: str) -> Iterable[str]:
        return PLACEHOLDER_PATTERN.findall(delex)
