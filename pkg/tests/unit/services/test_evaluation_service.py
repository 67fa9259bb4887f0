"""
Tests for Inform/Success judging, reports and the cross-model matrix.
"""
import csv

import pytest

from src.models.config_models import GoalConfig
from src.models.domain_models import ActItem, DialogAct
from src.models.world_models import DBResult
from src.services.abus_service import AbusUserSimulator
from src.services.evaluation_service import (
    CrossModelMatrix,
    EvalReport,
    combined_score,
    corpus_eval,
    evaluation_goals,
    interaction_eval,
    judge_dialog,
)
from src.services.wizard_service import WizardDialogSystem
from tests.fixtures.test_data import (
    BLEU_SCORE,
    COMBINED_SCORE,
    INFORM_PCT,
    OFFER_RESPONSE,
    RESTAURANT_CONSTRAINTS,
    RESTAURANT_ENTITY,
    SUCCESS_PCT,
    DialogFactory,
    TurnFactory,
    UserGoalFactory,
)


def restaurant_turn(db_result, sys_act, response="is there anything else i can help with ?"):
    return TurnFactory(db={"restaurant": db_result}, sys_act=sys_act, sys_response=response)


@pytest.fixture
def golden_wok(world):
    return world.query_db("restaurant", RESTAURANT_CONSTRAINTS)


@pytest.fixture
def wrong_restaurant(world):
    other = next(e for e in world.query_db("restaurant", {"food": "italian"}).matches)
    return DBResult("restaurant", [other])


class TestJudgeDialog:
    """Per-dialog Inform and Success."""

    def test_offer_with_requested_slot_succeeds(self, world, golden_wok):
        act = DialogAct.of(ActItem("restaurant", "inform", "name"), ActItem("restaurant", "inform", "phone"))
        verdict = judge_dialog(DialogFactory(turns=[restaurant_turn(golden_wok, act)]), world)
        assert verdict.inform and verdict.success
        assert verdict.offered == {"restaurant": RESTAURANT_ENTITY}
        assert verdict.provided == {"restaurant": ["name", "phone"]}

    def test_offer_by_placeholder(self, world, golden_wok):
        act = DialogAct.of(ActItem("restaurant", "inform", "phone"))
        verdict = judge_dialog(DialogFactory(turns=[restaurant_turn(golden_wok, act, OFFER_RESPONSE)]), world)
        assert verdict.inform and verdict.success

    def test_missing_request_fails_success_only(self, world, golden_wok):
        act = DialogAct.of(ActItem("restaurant", "inform", "name"))
        verdict = judge_dialog(DialogFactory(turns=[restaurant_turn(golden_wok, act)]), world)
        assert verdict.inform
        assert not verdict.success

    def test_wrong_entity_fails_inform(self, world, wrong_restaurant):
        act = DialogAct.of(ActItem("restaurant", "inform", "name"), ActItem("restaurant", "inform", "phone"))
        verdict = judge_dialog(DialogFactory(turns=[restaurant_turn(wrong_restaurant, act)]), world)
        assert not verdict.inform
        assert not verdict.success

    def test_last_offer_counts(self, world, golden_wok, wrong_restaurant):
        offer = DialogAct.of(ActItem("restaurant", "inform", "name"), ActItem("restaurant", "inform", "phone"))
        turns = [restaurant_turn(golden_wok, offer), restaurant_turn(wrong_restaurant, offer)]
        turns[1].index = 2
        assert not judge_dialog(DialogFactory(turns=turns), world).inform

    def test_no_offer_fails(self, world):
        verdict = judge_dialog(DialogFactory(), world)
        assert not verdict.inform
        assert verdict.offered == {}

    def test_abandoned_domain_is_vacuous_inform(self, world):
        goal = UserGoalFactory(abandoned_domains=["restaurant"])
        verdict = judge_dialog(DialogFactory(goal=goal), world)
        assert verdict.vacuous
        assert verdict.inform
        assert not verdict.success


class TestReports:
    """Aggregation and the combined score."""

    def test_combined_score(self):
        score = combined_score(INFORM_PCT / 100, SUCCESS_PCT / 100, BLEU_SCORE)
        assert score == pytest.approx(COMBINED_SCORE, abs=1e-9)

    def test_rates_are_validated(self):
        with pytest.raises(ValueError):
            EvalReport("x", inform=1.2, success=0.5, n_episodes=1, seed=0)

    def test_from_verdicts(self, world, golden_wok):
        good = DialogFactory(turns=[restaurant_turn(golden_wok, DialogAct.of(
            ActItem("restaurant", "inform", "name"), ActItem("restaurant", "inform", "phone")))])
        bad = DialogFactory()
        verdicts = [judge_dialog(d, world) for d in (good, bad, bad, good)]
        report = EvalReport.from_verdicts("wizard/abus", verdicts, seed=3, bleu=20.0)
        assert report.inform == 0.5
        assert report.success == 0.5
        assert report.combined == pytest.approx(70.0)
        assert report.summary()["episodes"] == 4
        assert len(report.to_dict()["verdicts"]) == 4

    def test_empty_report(self):
        report = EvalReport.from_verdicts("none", [], seed=0)
        assert report.inform == report.success == 0.0
        assert report.combined is None


class TestInteractionEval:
    """Rolling a system against a simulator over shared goals."""

    def test_goal_list_is_seeded(self, world):
        first = evaluation_goals(world, 5, seed=11)
        second = evaluation_goals(world, 5, seed=11)
        assert [g.to_dict() for g in first] == [g.to_dict() for g in second]
        with pytest.raises(ValueError):
            evaluation_goals(world, 0, seed=11)

    def test_wizard_against_abus(self, world, templates, lexicalizer):
        goals = evaluation_goals(world, 10, seed=4, goal_config=GoalConfig(p_nooffer=0.0))
        report = interaction_eval(
            WizardDialogSystem(world, templates, lexicalizer),
            AbusUserSimulator(world.ontology, templates),
            world, goals=goals, seed=4, keep_dialogs=True,
        )
        assert report.name == "wizard/abus"
        assert report.n_episodes == 10
        assert len(report.dialogs) == 10
        assert 0.0 <= report.success <= report.inform <= 1.0
        assert report.bleu is None

    def test_interaction_eval_is_deterministic(self, world, templates, lexicalizer):
        def run():
            return interaction_eval(
                WizardDialogSystem(world, templates, lexicalizer),
                AbusUserSimulator(world.ontology, templates),
                world, n_goals=5, seed=9,
            ).to_dict()

        assert run() == run()


class TestCorpusEval:
    """Turn-level evaluation against gold context."""

    def test_untrained_ds_on_corpus(self, tiny_ds, small_corpus, world):
        report = corpus_eval(tiny_ds, small_corpus[:2], world, seed=0)
        assert report.n_episodes == 2
        assert 0.0 <= report.bleu <= 100.0
        assert report.combined == pytest.approx(combined_score(report.inform, report.success, report.bleu))
        for generated, gold in zip(report.dialogs, small_corpus[:2]):
            assert generated.num_turns == gold.num_turns
            assert [t.user_utterance for t in generated.turns] == [t.user_utterance for t in gold.turns]


class TestCrossModelMatrix:
    """Matrix rows, aggregates and output."""

    @pytest.fixture
    def matrix(self):
        rates = {
            ("sl", "abus"): (0.5, 0.4), ("sl", "gus"): (0.6, 0.5),
            ("rl-1", "abus"): (0.9, 0.8), ("rl-1", "gus"): (0.7, 0.2),
            ("rl-2", "abus"): (0.7, 0.6), ("rl-2", "gus"): (0.9, 0.6),
        }
        reports = {key: EvalReport("/".join(key), i, s, 10, 0) for key, (i, s) in rates.items()}
        return CrossModelMatrix(["sl", "rl-1", "rl-2"], ["abus", "gus"], reports)

    def test_aggregate_rows(self, matrix):
        matrix.aggregate("rl", ["rl-1", "rl-2"], selection_us="gus")
        rows = dict(matrix.rows())
        assert rows["rl best"] == {"abus": (0.7, 0.6), "gus": (0.9, 0.6)}
        assert rows["rl avg"]["abus"] == pytest.approx((0.8, 0.7))
        assert rows["rl avg"]["gus"] == pytest.approx((0.8, 0.4))

    def test_aggregate_without_members(self, matrix):
        matrix.aggregate("rl", [], selection_us="gus")
        assert len(matrix.rows()) == 3

    def test_write_csv(self, matrix, tmp_path):
        path = matrix.write_csv(tmp_path / "out" / "matrix.csv")
        with path.open() as handle:
            rows = list(csv.reader(handle))
        assert rows[0] == ["ds", "abus_inform", "abus_success", "gus_inform", "gus_success"]
        assert rows[1] == ["sl", "50.00", "40.00", "60.00", "50.00"]

    def test_format_text(self, matrix):
        text = matrix.format_text()
        assert "Inform" in text
        assert "rl-2" in text
        assert "90.00" in text
