"""
Tests for goal-state tracking, goal changes and backward goal annotation.
"""
import numpy as np
import pytest

from src.models.domain_models import ActItem, DialogAct, DomainGoal, GoalState, UserGoal
from src.services.goal_tracking_service import (
    annotate_goal_states,
    apply_goal_change,
    completion_proportion,
    is_goal_completed,
    react_to_nooffer,
    replay_goal_states,
    update_goal_state,
)
from tests.fixtures.test_data import RESTAURANT_CONSTRAINTS, UserGoalFactory


def inform(slot, value, domain="restaurant"):
    return ActItem(domain, "inform", slot, value)


def request(slot, domain="restaurant"):
    return ActItem(domain, "request", slot)


def nooffer(slot, domain="restaurant"):
    return ActItem(domain, "nooffer", slot)


class TestUpdateGoalState:
    """One step of goal-state tracking."""

    def test_informed_constraints_are_removed(self):
        g = UserGoalFactory().as_goal_state()
        updated = update_goal_state(g, DialogAct.of(inform("food", "chinese"), inform("area", "north")), DialogAct())
        assert updated.domain("restaurant").inform == {"pricerange": "cheap"}
        assert g.domain("restaurant").inform == RESTAURANT_CONSTRAINTS

    def test_answered_requests_are_removed(self):
        g = GoalState({"restaurant": DomainGoal(requests=["phone", "address"])})
        updated = update_goal_state(g, DialogAct(), DialogAct.of(inform("phone", "01223")))
        assert updated.domain("restaurant").requests == ["address"]

    def test_other_domains_untouched(self):
        g = GoalState({"hotel": DomainGoal(inform={"area": "north"}, requests=["phone"])})
        updated = update_goal_state(g, DialogAct.of(inform("area", "north")), DialogAct.of(inform("phone", "0")))
        assert updated == g

    def test_emptied_domains_are_pruned(self):
        g = GoalState({"train": DomainGoal(requests=["price"])})
        updated = update_goal_state(g, DialogAct(), DialogAct.of(inform("price", "10 pounds", "train")))
        assert updated.is_empty()
        assert updated.domains == {}


class TestAnnotation:
    """Backward goal annotation and forward replay."""

    def test_states_accumulate_backwards(self):
        acts = [
            DialogAct.of(inform("food", "chinese")),
            DialogAct.of(inform("area", "north"), request("phone")),
            DialogAct.of(ActItem("general", "bye")),
        ]
        states = annotate_goal_states(acts)
        assert states[2].is_empty()
        assert states[1] == GoalState.from_items([inform("area", "north"), request("phone")])
        assert states[0] == GoalState.from_items([inform("food", "chinese"), inform("area", "north"), request("phone")])

    def test_dontcare_is_not_a_goal_item(self):
        states = annotate_goal_states([DialogAct.of(inform("area", "dontcare"), inform("food", "chinese"))])
        assert states[0] == GoalState.from_items([inform("food", "chinese")])

    def test_earliest_value_wins(self):
        acts = [DialogAct.of(inform("food", "swedish")), DialogAct.of(inform("food", "chinese"))]
        states = annotate_goal_states(acts)
        assert states[0].domain("restaurant").inform["food"] == "swedish"
        assert states[1].domain("restaurant").inform["food"] == "chinese"

    def test_replay_from_annotation_reaches_empty(self):
        """Informing each constraint and answering each request empties the goal state."""
        acts = [
            DialogAct.of(inform("food", "chinese"), request("phone")),
            DialogAct.of(inform("area", "north")),
            DialogAct.of(ActItem("general", "bye")),
        ]
        beliefs = [DialogAct(), DialogAct(), DialogAct.of(inform("phone", "01223"))]
        states = replay_goal_states(annotate_goal_states(acts)[0], acts, beliefs)
        assert len(states) == 4
        assert not states[1].is_empty()
        assert states[-1].is_empty()

    def test_replay_of_no_turns(self):
        assert replay_goal_states(GoalState(), [], []) == [GoalState()]


class TestGoalChange:
    """Reaction to no-offer acts."""

    def test_changes_a_nooffer_slot(self, ontology):
        goal = UserGoalFactory()
        g = GoalState()
        new_g, new_goal, event = apply_goal_change(
            g, goal, DialogAct.of(nooffer("food")), ontology, np.random.default_rng(0), turn=3,
        )
        assert event.slot == "food" and event.old_value == "chinese" and not event.fallback
        assert new_goal.domains["restaurant"].inform["food"] == event.new_value != "chinese"
        assert new_g.domain("restaurant").inform == {"food": event.new_value}
        assert goal.domains["restaurant"].inform["food"] == "chinese"
        assert event.turn == 3

    def test_falls_back_to_any_constraint(self, ontology):
        goal = UserGoal({"restaurant": DomainGoal(inform={"area": "north"})})
        _, new_goal, event = apply_goal_change(
            GoalState(), goal, DialogAct.of(nooffer("food")), ontology, np.random.default_rng(0),
        )
        assert event.fallback
        assert event.slot == "area"
        assert new_goal.domains["restaurant"].inform["area"] != "north"

    def test_without_nooffer_nothing_changes(self, ontology):
        goal = UserGoalFactory()
        g = goal.as_goal_state()
        assert apply_goal_change(g, goal, DialogAct.of(request("food")), ontology, np.random.default_rng(0)) == (g, goal, None)

    def test_domain_abandoned_after_max_changes(self, ontology):
        goal = UserGoalFactory()
        g = goal.as_goal_state()
        counts = {}
        act = DialogAct.of(nooffer("food"))
        rng = np.random.default_rng(0)
        for turn in (1, 2):
            g, goal, events, abandoned = react_to_nooffer(g, goal, act, ontology, rng, turn, counts, max_changes=2)
            assert len(events) == 1 and abandoned == []
        g, goal, events, abandoned = react_to_nooffer(g, goal, act, ontology, rng, 3, counts, max_changes=2)
        assert events == []
        assert abandoned == ["restaurant"]
        assert goal.abandoned_domains == ["restaurant"]
        assert "restaurant" not in g.domains
        assert counts == {"restaurant": 2}

    def test_nooffer_for_other_domain_is_ignored(self, ontology):
        goal = UserGoalFactory()
        g = goal.as_goal_state()
        _, _, events, abandoned = react_to_nooffer(
            g, goal, DialogAct.of(nooffer("area", "hotel")), ontology, np.random.default_rng(0), 1, {}, 2,
        )
        assert events == [] and abandoned == []


class TestCompletion:
    """Share of completed goal items."""

    def test_proportion(self):
        goal = UserGoalFactory()
        remaining = GoalState({"restaurant": DomainGoal(requests=["phone"])})
        assert completion_proportion(remaining, goal) == pytest.approx(0.75)
        assert completion_proportion(GoalState(), goal) == 1.0
        assert completion_proportion(goal.as_goal_state(), goal) == 0.0

    def test_empty_goal_is_complete(self):
        assert completion_proportion(GoalState(), GoalState()) == 1.0

    def test_abandoned_domain_counts_as_pending(self):
        """Dropping a domain from the goal state must not read as finishing it."""
        goal = UserGoal(
            {
                "restaurant": DomainGoal(inform=dict(RESTAURANT_CONSTRAINTS), requests=["phone"]),
                "hotel": DomainGoal(inform={"area": "centre"}, requests=["phone"]),
            },
            abandoned_domains=["hotel"],
        )
        assert completion_proportion(GoalState(), goal) == pytest.approx(4 / 6)
        only_hotel = UserGoal({"hotel": DomainGoal(inform={"area": "centre"}, requests=["phone"])}, abandoned_domains=["hotel"])
        assert completion_proportion(GoalState(), only_hotel) == 0.0


class TestGoalCompleted:
    """Empty goal state versus a goal that was given up."""

    def test_empty_state_without_abandonment(self):
        assert is_goal_completed(GoalState(), UserGoalFactory())

    def test_pending_items(self):
        goal = UserGoalFactory()
        assert not is_goal_completed(goal.as_goal_state(), goal)

    def test_abandoned_domain(self):
        goal = UserGoalFactory()
        goal.abandoned_domains.append("restaurant")
        assert not is_goal_completed(GoalState(), goal)

    def test_plain_goal_state(self):
        assert is_goal_completed(GoalState(), GoalState())
