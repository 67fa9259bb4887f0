import json
import hashlib
import logging
from pathlib import Path
from typing import Iterable, Iterator, List

from ..models.domain_models import Dialog
from ..models.exceptions import CorpusFormatError

logger = logging.getLogger(__name__)

CORPUS_SCHEMA_VERSION = 1


class CorpusRepository:
    """Repository for JSON-lines dialog corpora (one dialog per line)."""

    def __init__(self, path: Path):
        self.path = Path(path)

    @staticmethod
    def encode(dialog: Dialog) -> str:
        record = {"schema_version": CORPUS_SCHEMA_VERSION, **dialog.to_dict()}
        return json.dumps(record, sort_keys=True, ensure_ascii=False)

    @staticmethod
    def decode(line: str, line_number: int) -> Dialog:
        try:
            record = json.loads(line)
        except json.JSONDecodeError as e:
            raise CorpusFormatError(f"invalid JSON: {e.msg}", line_number)
        if not isinstance(record, dict):
            raise CorpusFormatError("expected a JSON object", line_number)
        version = record.pop("schema_version", None)
        if version != CORPUS_SCHEMA_VERSION:
            raise CorpusFormatError(f"unsupported schema version {version!r}", line_number)
        try:
            return Dialog.from_dict(record)
        except (KeyError, TypeError, ValueError) as e:
            raise CorpusFormatError(f"invalid dialog record: {e!r}", line_number)

    def write_corpus(self, dialogs: Iterable[Dialog]) -> int:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        count = 0
        with self.path.open("w", encoding="utf-8", newline="\n") as handle:
            for dialog in dialogs:
                handle.write(self.encode(dialog) + "\n")
                count += 1
        logger.info(f"Wrote {count} dialogs to {self.path}")
        return count

    def append(self, dialogs: Iterable[Dialog]) -> int:
        """Append dialogs, creating the file if needed; used for episode logs."""
        self.path.parent.mkdir(parents=True, exist_ok=True)
        count = 0
        with self.path.open("a", encoding="utf-8", newline="\n") as handle:
            for dialog in dialogs:
                handle.write(self.encode(dialog) + "\n")
                count += 1
        return count

    def iter_corpus(self) -> Iterator[Dialog]:
        if not self.path.exists():
            raise FileNotFoundError(f"corpus not found: {self.path}")
        with self.path.open("r", encoding="utf-8") as handle:
            for line_number, line in enumerate(handle, start=1):
                if not line.strip():
                    continue
                yield self.decode(line, line_number)

    def read_corpus(self) -> List[Dialog]:
        dialogs = list(self.iter_corpus())
        logger.info(f"Read {len(dialogs)} dialogs from {self.path}")
        return dialogs

    def corpus_hash(self) -> str:
        """sha256 of the file bytes."""
        digest = hashlib.sha256()
        with self.path.open("rb") as handle:
            for chunk in iter(lambda: handle.read(1 << 16), b""):
                digest.update(chunk)
        return digest.hexdigest()


def read_corpus(path: Path) -> List[Dialog]:
    return CorpusRepository(path).read_corpus()


def write_corpus(dialogs: Iterable[Dialog], path: Path) -> int:
    return CorpusRepository(path).write_corpus(dialogs)
