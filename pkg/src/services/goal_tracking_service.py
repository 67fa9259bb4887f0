"""
Goal-state tracking: per-turn update, goal change on no-offer, backward annotation
of goal states from user acts and completion predicates.
"""
import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..models.domain_models import DialogAct, DomainGoal, GoalChangeEvent, GoalState, UserGoal
from ..models.world_models import Ontology

logger = logging.getLogger(__name__)


def update_goal_state(g_prev: GoalState, user_act_prev: DialogAct, user_belief: DialogAct) -> GoalState:
    """Remove constraints the user already informed and requests the system already answered."""
    g = g_prev.copy()
    for item in user_act_prev:
        if item.intent in ("inform", "book") and item.domain in g.domains:
            domain_goal = g.domains[item.domain]
            domain_goal.inform.pop(item.slot, None)
            domain_goal.book.pop(item.slot, None)
    for item in user_belief:
        if item.intent == "inform" and item.domain in g.domains:
            requests = g.domains[item.domain].requests
            if item.slot in requests:
                requests.remove(item.slot)
    return g.prune()


def apply_goal_change(
    g: GoalState,
    goal: UserGoal,
    nooffer: DialogAct,
    ontology: Ontology,
    rng: np.random.Generator,
    turn: int = 0,
    domain: Optional[str] = None,
) -> Tuple[GoalState, UserGoal, Optional[GoalChangeEvent]]:
    """Replace the value of one no-offer slot with another ontology value.

    Falls back to a uniformly chosen constraint slot of the domain when none of the
    no-offer slots is an inform constraint of the goal. Returns new objects; the
    changed item is re-added to the live goal state so it gets informed again.
    """
    items = [item for item in nooffer if item.intent == "nooffer" and (domain is None or item.domain == domain)]
    if not items:
        return g, goal, None
    domain = domain or items[0].domain
    domain_goal = goal.domains.get(domain)
    if domain_goal is None or not domain_goal.inform:
        logger.warning(f"No-offer for {domain} but the goal has no inform constraints there")
        return g, goal, None

    candidates = [s for s in dict.fromkeys(item.slot for item in items if item.domain == domain) if s in domain_goal.inform]
    fallback = not candidates
    if fallback:
        candidates = list(domain_goal.inform)
    slot = candidates[int(rng.integers(len(candidates)))]
    old_value = domain_goal.inform[slot]
    alternatives = [v for v in ontology.values(domain, slot) if v != old_value]
    new_value = alternatives[int(rng.integers(len(alternatives)))]

    new_goal = goal.copy()
    new_goal.domains[domain].inform[slot] = new_value
    new_g = g.copy()
    new_g.domains.setdefault(domain, DomainGoal()).inform[slot] = new_value

    event = GoalChangeEvent(domain, slot, old_value, new_value, turn, fallback)
    logger.info(f"Goal change at turn {turn}: {domain}.{slot} {old_value} -> {new_value}{' (fallback)' if fallback else ''}")
    return new_g, new_goal, event


def annotate_goal_states(user_acts: Sequence[DialogAct]) -> List[GoalState]:
    """Goal states g_1..g_T accumulated backwards from per-turn user acts.

    ``dontcare`` informs answer system questions and are not goal items. When a
    slot carries different values across turns, the earliest turn wins.
    """
    states: List[GoalState] = [GoalState() for _ in user_acts]
    running = GoalState()
    for t in range(len(user_acts) - 1, -1, -1):
        for item in user_acts[t]:
            if item.intent not in ("inform", "book", "request") or item.is_dontcare:
                continue
            if item.intent != "request":
                current = running.domain(item.domain).constraint(item.slot)
                if current is not None and current[1] != item.value:
                    logger.warning(
                        f"Conflicting values for {item.domain}.{item.slot}: turn {t + 1} says "
                        f"{item.value!r}, later turn says {current[1]!r}; keeping the earlier one"
                    )
            running.add_item(item)
        states[t] = running.copy()
    return states


def replay_goal_states(
    g_1: GoalState,
    user_acts: Sequence[DialogAct],
    user_beliefs: Sequence[DialogAct],
    closing_belief: Optional[DialogAct] = None,
) -> List[GoalState]:
    """Forward replay of update_goal_state; the last entry is the state after the closing update."""
    states = [g_1.copy()]
    for t in range(1, len(user_acts)):
        states.append(update_goal_state(states[-1], user_acts[t - 1], user_beliefs[t]))
    if user_acts:
        states.append(update_goal_state(states[-1], user_acts[-1], closing_belief or DialogAct()))
    return states


def is_goal_empty(g: GoalState) -> bool:
    return g.is_empty()


def abandoned_domains(goal: GoalState) -> List[str]:
    return list(goal.abandoned_domains) if isinstance(goal, UserGoal) else []


def is_goal_completed(g: GoalState, goal: GoalState) -> bool:
    """Empty goal state reached without giving up on any domain."""
    return g.is_empty() and not abandoned_domains(goal)


def completion_proportion(g_final: GoalState, goal: GoalState) -> float:
    """Share of goal items no longer pending in the final goal state.

    Every item of an abandoned domain counts as pending.
    """
    total = goal.item_count()
    if total == 0:
        return 1.0
    dropped = set(abandoned_domains(goal))
    remaining = sum(
        goal.domain(d).item_count() if d in dropped else g_final.domain(d).item_count() for d in goal.domains
    )
    return max(0.0, min(1.0, 1.0 - remaining / total))


def react_to_nooffer(
    g: GoalState,
    goal: UserGoal,
    system_act: DialogAct,
    ontology: Ontology,
    rng: np.random.Generator,
    turn: int,
    change_counts: Dict[str, int],
    max_changes: int,
) -> Tuple[GoalState, UserGoal, List[GoalChangeEvent], List[str]]:
    """Goal change for every no-offer domain of the user goal.

    A domain that already went through ``max_changes`` changes is abandoned: it
    leaves the goal state and is flagged on the goal. ``change_counts`` is updated
    in place. Returns (goal state, goal, events, newly abandoned domains).
    """
    events: List[GoalChangeEvent] = []
    abandoned: List[str] = []
    domains = list(dict.fromkeys(item.domain for item in system_act.filter("nooffer")))
    for domain in domains:
        if domain not in goal.domains or domain in goal.abandoned_domains:
            continue
        if change_counts.get(domain, 0) >= max_changes:
            logger.warning(f"Abandoning {domain} after {max_changes} goal changes")
            goal = goal.copy()
            goal.abandoned_domains.append(domain)
            g = g.copy()
            g.domains.pop(domain, None)
            abandoned.append(domain)
            continue
        g, goal, event = apply_goal_change(g, goal, system_act, ontology, rng, turn=turn, domain=domain)
        if event is not None:
            change_counts[domain] = change_counts.get(domain, 0) + 1
            events.append(event)
    return g, goal, events, abandoned
