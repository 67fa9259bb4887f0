import json
import sqlite3
import logging
import threading
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional

from ..config.settings import settings
from ..models.domain_models import BeliefState
from ..models.exceptions import WorldError
from ..models.world_models import DBResult, DONTCARE, Entity, Ontology

logger = logging.getLogger(__name__)

WORLD_SCHEMA_VERSION = 1


class WorldRepository:
    """Repository for the ontology and the entity database.

    Entities are loaded into an in-memory SQLite database, one table per domain.
    The store is read-only after construction, so concurrent queries are safe.
    """

    def __init__(self, world_path: Optional[Path] = None, world_data: Optional[Dict[str, Any]] = None):
        self.world_path = Path(world_path or settings.WORLD_PATH)
        if world_data is None:
            world_data = self._read_world_file(self.world_path)
        self.ontology = Ontology.from_dict(world_data.get("ontology", {}))
        self._conn = sqlite3.connect(":memory:", check_same_thread=False)
        self._conn.row_factory = sqlite3.Row
        self._lock = threading.Lock()
        self.init_db(world_data.get("entities", {}))

    @staticmethod
    def _read_world_file(path: Path) -> Dict[str, Any]:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise WorldError(f"world file not found: {path}")
        except json.JSONDecodeError as e:
            raise WorldError(f"world file {path} is not valid JSON: {e}")
        if data.get("schema_version") != WORLD_SCHEMA_VERSION:
            raise WorldError(f"unsupported world schema version: {data.get('schema_version')}")
        return data

    @contextmanager
    def get_connection(self):
        """Context manager for database access"""
        with self._lock:
            try:
                yield self._conn
            except sqlite3.Error as e:
                self._conn.rollback()
                logger.error(f"Database error: {e}")
                raise

    def init_db(self, entities: Mapping[str, List[Dict[str, str]]]):
        """Create one table per domain and load its entities"""
        with self.get_connection() as conn:
            cursor = conn.cursor()
            for domain, schema in self.ontology.domains.items():
                columns = [schema.key] + list(schema.informable) + list(schema.requestable)
                column_sql = ", ".join(f'"{c}" TEXT' for c in columns)
                cursor.execute(f'CREATE TABLE "{domain}" ({column_sql}, PRIMARY KEY ("{schema.key}"))')

                rows = entities.get(domain, [])
                for row in rows:
                    self._validate_entity(domain, row)
                placeholders = ", ".join("?" for _ in columns)
                try:
                    cursor.executemany(
                        f'INSERT INTO "{domain}" VALUES ({placeholders})',
                        [tuple(row.get(c) for c in columns) for row in rows],
                    )
                except sqlite3.IntegrityError as e:
                    raise WorldError(f"duplicate {schema.key} in domain {domain}: {e}")
            conn.commit()
        logger.info(f"Loaded world with domains {self.ontology.domain_names} from {self.world_path}")

    def _validate_entity(self, domain: str, row: Mapping[str, str]) -> None:
        schema = self.ontology.schema(domain)
        if schema.key not in row:
            raise WorldError(f"{domain} entity without {schema.key}: {row}")
        for slot, values in schema.informable.items():
            if row.get(slot) not in values:
                raise WorldError(f"{domain} entity {row[schema.key]} has {slot}={row.get(slot)!r} outside the ontology")

    def query_db(self, domain: str, constraints: Mapping[str, str]) -> DBResult:
        """All entities equal to every non-dontcare constraint, ordered by key."""
        schema = self.ontology.schema(domain)
        clauses, params = [], []
        for slot, value in constraints.items():
            if slot not in schema.informable:
                raise WorldError(f"slot {slot} is not informable in domain {domain}", {"domain": domain, "slot": slot})
            if value == DONTCARE:
                continue
            clauses.append(f'"{slot}" = ?')
            params.append(value)
        where = f" WHERE {' AND '.join(clauses)}" if clauses else ""
        sql = f'SELECT * FROM "{domain}"{where} ORDER BY "{schema.key}"'
        with self.get_connection() as conn:
            rows = conn.execute(sql, params).fetchall()
        matches = [Entity(domain, {k: row[k] for k in row.keys() if row[k] is not None}, schema.key) for row in rows]
        return DBResult(domain=domain, matches=matches)

    def query_belief(self, belief: BeliefState) -> Dict[str, DBResult]:
        """One query per belief domain over its informable constraints."""
        results = {}
        for domain in belief.domains:
            if not self.ontology.has_domain(domain):
                continue
            schema = self.ontology.schema(domain)
            constraints = {s: v for s, v in belief.get(domain).items() if s in schema.informable}
            results[domain] = self.query_db(domain, constraints)
        return results

    def entities(self, domain: str) -> List[Entity]:
        return self.query_db(domain, {}).matches

    def find_entity(self, domain: str, key_value: str) -> Optional[Entity]:
        schema = self.ontology.schema(domain)
        with self.get_connection() as conn:
            row = conn.execute(f'SELECT * FROM "{domain}" WHERE "{schema.key}" = ?', (key_value,)).fetchone()
        if row is None:
            return None
        return Entity(domain, {k: row[k] for k in row.keys() if row[k] is not None}, schema.key)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "schema_version": WORLD_SCHEMA_VERSION,
            "ontology": self.ontology.to_dict(),
            "entities": {d: [dict(e.attributes) for e in self.entities(d)] for d in self.ontology.domain_names},
        }

    def close(self):
        self._conn.close()
