import logging
from typing import Dict, List, Optional

import numpy as np

from ..models.config_models import GoalConfig
from ..models.domain_models import DomainGoal, UserGoal
from ..models.world_models import Entity
from ..repositories.world_repository import WorldRepository

logger = logging.getLogger(__name__)

MAX_ATTEMPTS = 100


class GoalGeneratorService:
    """Samples user goals from the world.

    Satisfiable domains copy their constraints from a randomly drawn entity. With
    probability ``p_nooffer`` one domain of the goal is bent one slot away from
    every entity and flagged unsatisfiable, which exercises the goal-change path.
    """

    def __init__(self, world: WorldRepository, config: Optional[GoalConfig] = None):
        self.world = world
        self.ontology = world.ontology
        self.config = config or GoalConfig()

    def generate_goal(self, rng: np.random.Generator) -> UserGoal:
        weights = np.asarray(self.config.domain_count_weights, dtype=float)
        max_domains = min(len(weights), len(self.ontology.domain_names))
        weights = weights[:max_domains] / weights[:max_domains].sum()
        n_domains = int(rng.choice(np.arange(1, max_domains + 1), p=weights))
        domains = [str(d) for d in rng.choice(self.ontology.domain_names, size=n_domains, replace=False)]

        goal = UserGoal()
        for domain in domains:
            goal.domains[domain] = self._satisfiable_domain_goal(domain, rng)

        if rng.random() < self.config.p_nooffer:
            target = domains[int(rng.integers(len(domains)))]
            broken = self._unsatisfiable_domain_goal(target, rng)
            if broken is not None:
                goal.domains[target] = broken
                goal.unsatisfiable_domains.append(target)
            else:
                logger.warning(f"Could not build an unsatisfiable goal for {target}; keeping it satisfiable")
        return goal

    def _sample_count(self, low: int, high: int, available: int, rng: np.random.Generator) -> int:
        high = min(high, available)
        low = min(low, high)
        return int(rng.integers(low, high + 1))

    def _domain_goal_from_entity(self, domain: str, entity: Entity, rng: np.random.Generator) -> DomainGoal:
        schema = self.ontology.schema(domain)
        informable = list(schema.informable)
        k = self._sample_count(self.config.min_constraints, self.config.max_constraints, len(informable), rng)
        chosen = sorted(rng.choice(len(informable), size=k, replace=False))
        inform = {informable[i]: entity.attributes[informable[i]] for i in chosen}

        requestable = [s for s in schema.requestable if s != schema.key]
        r = self._sample_count(self.config.min_requests, self.config.max_requests, len(requestable), rng)
        requests = [requestable[i] for i in sorted(rng.choice(len(requestable), size=r, replace=False))]

        book: Dict[str, str] = {}
        if schema.bookable and rng.random() < self.config.book_probability:
            for slot, values in schema.book.items():
                book[slot] = values[int(rng.integers(len(values)))]
        return DomainGoal(inform=inform, book=book, requests=requests)

    def _satisfiable_domain_goal(self, domain: str, rng: np.random.Generator) -> DomainGoal:
        entities = self.world.entities(domain)
        entity = entities[int(rng.integers(len(entities)))]
        return self._domain_goal_from_entity(domain, entity, rng)

    def _unsatisfiable_domain_goal(self, domain: str, rng: np.random.Generator) -> Optional[DomainGoal]:
        """Copy an entity, then move one constraint to a value no entity combines with the rest."""
        for _ in range(MAX_ATTEMPTS):
            goal = self._satisfiable_domain_goal(domain, rng)
            slots = list(goal.inform)
            slot = slots[int(rng.integers(len(slots)))]
            alternatives = [v for v in self.ontology.values(domain, slot) if v != goal.inform[slot]]
            for index in rng.permutation(len(alternatives)):
                candidate = dict(goal.inform)
                candidate[slot] = alternatives[int(index)]
                if self.world.query_db(domain, candidate).bucket == "0":
                    goal.inform = candidate
                    return goal
        return None

    def generate_goals(self, n: int, rng: np.random.Generator) -> List[UserGoal]:
        return [self.generate_goal(rng) for _ in range(n)]
