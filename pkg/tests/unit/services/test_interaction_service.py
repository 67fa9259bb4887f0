"""
Tests for the interaction loop and its termination rules.
"""
import numpy as np
import pytest

from src.models.domain_models import ActItem, DialogAct, DomainGoal, UserGoal
from src.services.goal_tracking_service import completion_proportion
from src.services.reward_service import REPEAT_PENALTY, compute_rewards
from src.services.abus_service import AbusUserSimulator
from src.services.interaction_service import run_episode, termination_reason
from src.services.wizard_service import WizardDialogSystem
from tests.fixtures.test_data import TurnFactory, UserGoalFactory, make_turns
from tests.utils.test_helpers import ScriptedSystem, ScriptedUser

FOOD = DialogAct.of(ActItem("restaurant", "inform", "food", "chinese"))
BYE = DialogAct.of(ActItem("general", "bye"))
REQMORE = DialogAct.of(ActItem("general", "reqmore"))


def episode(user, system, max_turns=20):
    return run_episode(system, user, UserGoalFactory(), np.random.default_rng(0), max_turns=max_turns)


class TestTerminationReasons:
    """Each rule fires in a constructed scenario."""

    def test_goal_empty(self):
        dialog = episode(ScriptedUser([FOOD] * 5, empty_after=2), ScriptedSystem([REQMORE] * 5))
        assert dialog.termination_reason == "goal_empty"
        assert dialog.num_turns == 2
        assert dialog.final_goal_state.is_empty()

    def test_both_bye(self):
        dialog = episode(ScriptedUser([FOOD, BYE]), ScriptedSystem([REQMORE, BYE]))
        assert dialog.termination_reason == "both_bye"
        assert dialog.num_turns == 2

    def test_repeated_turn(self):
        dialog = episode(ScriptedUser([FOOD, FOOD], ["same"]), ScriptedSystem([REQMORE, REQMORE], ["same"]))
        assert dialog.termination_reason == "repeated_turn"
        assert dialog.num_turns == 2

    def test_max_turns(self):
        dialog = episode(ScriptedUser([FOOD] * 6), ScriptedSystem([REQMORE] * 6), max_turns=4)
        assert dialog.termination_reason == "max_turns"
        assert dialog.num_turns == 4

    def test_goal_empty_takes_precedence(self):
        dialog = episode(ScriptedUser([FOOD, BYE], empty_after=2), ScriptedSystem([REQMORE, BYE]))
        assert dialog.termination_reason == "goal_empty"


class TestTerminationRuleOrder:
    """The rule function on hand-built turns."""

    def test_continue_when_nothing_fires(self):
        turns = make_turns(TurnFactory(user_act=FOOD))
        assert termination_reason(turns, goal_empty=False, max_turns=5) is None

    def test_both_bye_before_repeat(self):
        turns = make_turns(TurnFactory(user_act=BYE, sys_act=BYE), TurnFactory(user_act=BYE, sys_act=BYE))
        assert termination_reason(turns, goal_empty=False, max_turns=5) == "both_bye"

    def test_repeat_before_max_turns(self):
        turns = make_turns(TurnFactory(), TurnFactory())
        assert termination_reason(turns, goal_empty=False, max_turns=2) == "repeated_turn"

    def test_user_bye_alone_continues(self):
        turns = make_turns(TurnFactory(user_act=BYE))
        assert termination_reason(turns, goal_empty=False, max_turns=5) is None


class TestRunEpisode:
    """Trace contents."""

    def test_turns_record_both_sides(self):
        system = ScriptedSystem([REQMORE, BYE], ["first reply", "second reply"])
        dialog = episode(ScriptedUser([FOOD, BYE], ["hi", "bye now"]), system)
        assert [t.user_utterance for t in dialog.turns] == ["hi", "bye now"]
        assert [t.sys_response for t in dialog.turns] == ["first reply", "second reply"]
        assert [t.index for t in dialog.turns] == [1, 2]
        assert system.calls == ["hi", "bye now"]

    def test_goal_is_recorded(self):
        dialog = episode(ScriptedUser([FOOD, BYE]), ScriptedSystem([REQMORE, BYE]))
        assert dialog.initial_goal.to_dict() == UserGoalFactory().to_dict()
        assert dialog.turns[0].goal_state == UserGoalFactory().as_goal_state()

    def test_rejects_non_positive_max_turns(self):
        with pytest.raises(ValueError):
            episode(ScriptedUser([FOOD]), ScriptedSystem([REQMORE]), max_turns=0)

    def test_wizard_and_abus_finish(self, world, templates, lexicalizer):
        dialog = episode(
            AbusUserSimulator(world.ontology, templates, max_pops=2),
            WizardDialogSystem(world, templates, lexicalizer),
        )
        assert dialog.termination_reason == "goal_empty"
        assert dialog.num_turns <= 20


class TestAbandonedGoal:
    """A user who gives up on a domain has not reached its goal."""

    @pytest.fixture
    def dialog(self, world, templates):
        goal = UserGoal({"hotel": DomainGoal(inform={"area": "centre"}, requests=["phone"])})
        user = AbusUserSimulator(world.ontology, templates, semantic=True, max_goal_changes=2)
        system = ScriptedSystem(
            [DialogAct.of(ActItem("hotel", "nooffer", "area"))], ["there is no hotel in that area ."],
        )
        return run_episode(system, user, goal, np.random.default_rng(0), max_turns=10)

    def test_not_goal_empty(self, dialog):
        assert dialog.goal.abandoned_domains == ["hotel"]
        assert dialog.final_goal_state.is_empty()
        assert dialog.termination_reason in ("repeated_turn", "max_turns")

    def test_no_completion_credit(self, dialog, world):
        assert completion_proportion(dialog.final_goal_state, dialog.goal) == 0.0
        rewards = compute_rewards(dialog, world, "synthetic")
        assert rewards[-1] == pytest.approx(REPEAT_PENALTY)
        assert all(r <= 0.0 for r in rewards)
        assert compute_rewards(dialog, world, "sigmoid")[-1] < 0.5
