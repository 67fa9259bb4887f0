import json
import hashlib
import logging
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Tuple

from ..config.settings import settings
from ..models.domain_models import GENERAL_DOMAIN, INTENT_ORDER
from ..models.world_models import DONTCARE, Ontology

logger = logging.getLogger(__name__)

PAD = "<pad>"
UNK = "<unk>"


class Vocab:
    """Word-level token <-> id bijection with dense ids; pad is always id 0."""

    def __init__(self, tokens: Sequence[str]):
        if not tokens or tokens[0] != PAD:
            raise ValueError(f"the first vocabulary token must be {PAD}")
        if len(set(tokens)) != len(tokens):
            raise ValueError("vocabulary tokens must be unique")
        self.tokens: List[str] = list(tokens)
        self.index: Dict[str, int] = {t: i for i, t in enumerate(self.tokens)}

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.index

    @property
    def pad_id(self) -> int:
        return self.index[PAD]

    @property
    def unk_id(self) -> int:
        return self.index[UNK]

    def id(self, token: str) -> int:
        return self.index.get(token, self.unk_id)

    def encode_with_stats(self, text: str) -> Tuple[List[int], int]:
        ids, unknown = [], 0
        for token in text.split():
            if token in self.index:
                ids.append(self.index[token])
            else:
                ids.append(self.unk_id)
                unknown += 1
        return ids, unknown

    def encode(self, text: str) -> List[int]:
        return self.encode_with_stats(text)[0]

    def decode(self, ids: Iterable[int]) -> str:
        return " ".join(self.tokens[i] for i in ids if i != self.pad_id)

    def vocab_hash(self) -> str:
        return hashlib.sha256("\n".join(self.tokens).encode("utf-8")).hexdigest()

    def to_dict(self) -> Dict[str, List[str]]:
        return {"tokens": self.tokens}

    def save(self, path: Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=1) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: Path) -> "Vocab":
        return cls(json.loads(Path(path).read_text(encoding="utf-8"))["tokens"])

    @classmethod
    def build(cls, ontology: Ontology, texts: Iterable[str] = ()) -> "Vocab":
        """Structural tokens first, then ontology words, then remaining corpus words sorted."""
        tokens: List[str] = []

        def add(token: str) -> None:
            if token not in seen:
                seen.add(token)
                tokens.append(token)

        seen: set = set()
        for token in settings.SPECIAL_TOKENS + settings.SEGMENT_TOKENS + settings.DB_TOKENS:
            add(token)
        for domain in list(ontology.domain_names) + [GENERAL_DOMAIN]:
            add(f"[{domain}]")
        for intent in INTENT_ORDER:
            add(f"[{intent}]")
        slots = ontology.all_slot_names() + ["choice"]
        for slot in slots:
            add(slot)
            add(f"[value_{slot}]")
        values = ontology.all_values()
        for slot in sorted(values):
            for value in values[slot]:
                for word in value.split():
                    add(word)
        add(DONTCARE)
        extra = sorted({word for text in texts for word in text.split()} - seen)
        for word in extra:
            add(word)
        logger.info(f"Built vocabulary of {len(tokens)} tokens ({len(extra)} from corpus text)")
        return cls(tokens)
