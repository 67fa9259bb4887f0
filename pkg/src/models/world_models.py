"""
World value types: ontology, entities and database query results.
"""
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

from .exceptions import WorldError

DONTCARE = "dontcare"

BUCKET_ZERO = "0"
BUCKET_ONE = "1"
BUCKET_FEW = "few"
BUCKET_MANY = "many"
BUCKETS = (BUCKET_ZERO, BUCKET_ONE, BUCKET_FEW, BUCKET_MANY)


def bucket_for(count: int) -> str:
    """Map a match count to its DB bucket: 0, 1, few (2-3) or many (4+)."""
    if count < 0:
        raise ValueError(f"match count must be non-negative, got {count}")
    if count == 0:
        return BUCKET_ZERO
    if count == 1:
        return BUCKET_ONE
    if count <= 3:
        return BUCKET_FEW
    return BUCKET_MANY


@dataclass
class DomainSchema:
    """Slots of one domain."""
    name: str
    key: str
    informable: Dict[str, List[str]]
    requestable: List[str]
    book: Dict[str, List[str]] = field(default_factory=dict)

    def __post_init__(self):
        names = [self.key] + list(self.informable) + list(self.requestable) + list(self.book)
        duplicates = {n for n in names if names.count(n) > 1}
        if duplicates:
            raise WorldError(f"duplicate slot names in domain {self.name}: {sorted(duplicates)}")
        for slot, values in self.informable.items():
            if len(values) < 2:
                raise WorldError(f"informable slot {self.name}.{slot} needs at least 2 values")

    @property
    def bookable(self) -> bool:
        return bool(self.book)

    @property
    def constraint_slots(self) -> List[str]:
        return list(self.informable) + list(self.book)

    @property
    def all_slots(self) -> List[str]:
        return [self.key] + list(self.informable) + list(self.requestable) + list(self.book)

    def values(self, slot: str) -> List[str]:
        if slot in self.informable:
            return self.informable[slot]
        if slot in self.book:
            return self.book[slot]
        raise WorldError(f"slot {slot} has no value list in domain {self.name}")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "key": self.key,
            "informable": self.informable,
            "requestable": self.requestable,
            "book": self.book,
        }


@dataclass
class Ontology:
    """The closed multi-domain world definition."""
    domains: Dict[str, DomainSchema]

    def __post_init__(self):
        if len(self.domains) < 3:
            raise WorldError(f"ontology needs at least 3 domains, got {len(self.domains)}")

    @property
    def domain_names(self) -> List[str]:
        return list(self.domains)

    def schema(self, domain: str) -> DomainSchema:
        try:
            return self.domains[domain]
        except KeyError:
            raise WorldError(f"unknown domain: {domain}", {"domain": domain})

    def has_domain(self, domain: str) -> bool:
        return domain in self.domains

    def values(self, domain: str, slot: str) -> List[str]:
        return self.schema(domain).values(slot)

    def all_slot_names(self) -> List[str]:
        seen: List[str] = []
        for schema in self.domains.values():
            for slot in schema.all_slots:
                if slot not in seen:
                    seen.append(slot)
        return seen

    def all_values(self) -> Dict[str, List[str]]:
        """slot -> union of value lists across domains, in first-seen order."""
        merged: Dict[str, List[str]] = {}
        for schema in self.domains.values():
            for slot, values in list(schema.informable.items()) + list(schema.book.items()):
                bucket = merged.setdefault(slot, [])
                bucket.extend(v for v in values if v not in bucket)
        return merged

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Ontology":
        try:
            return cls({
                name: DomainSchema(
                    name=name,
                    key=spec["key"],
                    informable=dict(spec["informable"]),
                    requestable=list(spec["requestable"]),
                    book=dict(spec.get("book", {})),
                )
                for name, spec in data.items()
            })
        except (KeyError, TypeError) as e:
            raise WorldError(f"invalid ontology definition: {e}")

    def to_dict(self) -> Dict[str, Any]:
        return {name: schema.to_dict() for name, schema in self.domains.items()}


@dataclass(frozen=True)
class Entity:
    """A database row of one domain."""
    domain: str
    attributes: Dict[str, str]
    key: str = "name"

    @property
    def name(self) -> str:
        return self.attributes[self.key]

    def get(self, slot: str, default: Optional[str] = None) -> Optional[str]:
        return self.attributes.get(slot, default)

    def __hash__(self):
        return hash((self.domain, self.name))


@dataclass
class DBResult:
    """Result of querying one domain; bucket is derived from the match count.

    Results restored from a corpus keep only the selected entity, so ``count``
    is stored separately from ``matches``.
    """
    domain: str
    matches: List[Entity] = field(default_factory=list)
    bucket: Optional[str] = None
    count: Optional[int] = None

    def __post_init__(self):
        if self.count is None:
            self.count = len(self.matches)
        if self.bucket is None:
            self.bucket = bucket_for(self.count)

    @property
    def selected(self) -> Optional[Entity]:
        return self.matches[0] if self.matches else None

    def summary(self) -> Dict[str, Any]:
        selected = self.selected
        return {
            "bucket": self.bucket,
            "count": self.count,
            "key": selected.key if selected else None,
            "selected": dict(selected.attributes) if selected else None,
        }

    @classmethod
    def from_summary(cls, domain: str, data: Dict[str, Any]) -> "DBResult":
        selected = data.get("selected")
        matches = [Entity(domain, dict(selected), data.get("key") or "name")] if selected else []
        return cls(domain=domain, matches=matches, bucket=data["bucket"], count=data.get("count", len(matches)))
