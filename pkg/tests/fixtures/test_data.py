"""
Test data factories and constants for building dialogs by hand.
"""
import factory

from src.models.domain_models import (
    ActItem,
    BeliefState,
    Dialog,
    DialogAct,
    DomainGoal,
    GoalState,
    Turn,
    UserGoal,
)


class ActItemFactory(factory.Factory):
    """Factory for restaurant inform items."""

    class Meta:
        model = ActItem

    domain = "restaurant"
    intent = "inform"
    slot = factory.Iterator(["area", "pricerange", "food"])
    value = factory.LazyAttribute(lambda o: RESTAURANT_CONSTRAINTS.get(o.slot))


class DomainGoalFactory(factory.Factory):
    """Factory for a restaurant goal matching exactly one entity."""

    class Meta:
        model = DomainGoal

    inform = factory.LazyFunction(lambda: dict(RESTAURANT_CONSTRAINTS))
    book = factory.LazyFunction(dict)
    requests = factory.LazyFunction(lambda: ["phone"])


class UserGoalFactory(factory.Factory):
    """Factory for single-domain user goals."""

    class Meta:
        model = UserGoal

    domains = factory.LazyFunction(lambda: {"restaurant": DomainGoalFactory()})
    unsatisfiable_domains = factory.LazyFunction(list)
    abandoned_domains = factory.LazyFunction(list)


class TurnFactory(factory.Factory):
    """Factory for a turn with empty annotations; override what a test needs."""

    class Meta:
        model = Turn

    index = 1
    goal_state = factory.LazyFunction(GoalState)
    user_belief = factory.LazyFunction(DialogAct)
    user_act = factory.LazyFunction(DialogAct)
    user_utterance = "i am looking for a restaurant ."
    sys_belief = factory.LazyFunction(BeliefState)
    db = factory.LazyFunction(dict)
    sys_act = factory.LazyFunction(lambda: DialogAct.of(ActItem("general", "reqmore")))
    sys_response = "is there anything else i can help with ?"
    sys_response_lex = ""


class DialogFactory(factory.Factory):
    """Factory for one-turn dialogs."""

    class Meta:
        model = Dialog

    dialog_id = factory.Sequence(lambda n: f"dlg-{n:05d}")
    goal = factory.SubFactory(UserGoalFactory)
    turns = factory.LazyFunction(lambda: [TurnFactory(index=1)])
    termination_reason = "goal_empty"
    final_goal_state = factory.LazyFunction(GoalState)


def make_turns(*turns: Turn) -> list:
    """Renumber turns 1..T."""
    for i, turn in enumerate(turns, start=1):
        turn.index = i
    return list(turns)


# Test data constants
RESTAURANT_CONSTRAINTS = {"area": "north", "pricerange": "cheap", "food": "chinese"}
RESTAURANT_ENTITY = "golden wok"

QUERY_COUNTS = [
    ({}, 30, "many"),
    ({"food": "chinese"}, 6, "many"),
    ({"area": "north", "pricerange": "cheap"}, 2, "few"),
    ({"area": "north", "pricerange": "cheap", "food": "chinese"}, 1, "1"),
    ({"area": "north", "pricerange": "cheap", "food": "swedish"}, 0, "0"),
    ({"area": "dontcare", "food": "chinese"}, 6, "many"),
]

OFFER_RESPONSE = "how about [value_name] ? the phone number is [value_phone] ."
NOOFFER_RESPONSE = "sorry , nobody serves [value_food] food ."

# Combined-score row used as an arithmetic fixture
INFORM_PCT, SUCCESS_PCT, BLEU_SCORE, COMBINED_SCORE = 84.10, 72.10, 19.24, 97.34
