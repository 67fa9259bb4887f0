"""
Integration tests: corpus generation against goal tracking, evaluation and
training across agents, and a resumable end-to-end pipeline run.
"""
import numpy as np
import pytest

from src.config.profiles import build_config
from src.models.config_models import GoalConfig, RLConfig, SLConfig
from src.models.domain_models import TERMINATION_REASONS
from src.repositories.corpus_repository import CorpusRepository
from src.services.abus_service import AbusUserSimulator
from src.services.corpus_service import CorpusService, annotated_initial_goal, replay_final_state
from src.services.evaluation_service import interaction_eval, judge_dialog
from src.services.goal_tracking_service import replay_goal_states
from src.services.pipeline_service import STAGES, Pipeline
from src.services.rl_training_service import train_rl
from src.services.supervised_training_service import sl_train_ds
from src.services.wizard_service import WizardDialogSystem

pytestmark = pytest.mark.integration


@pytest.fixture(scope="module")
def corpus(corpus_service):
    return corpus_service.generate_corpus(100, seed=3)


def clean(dialog) -> bool:
    """Ended with an empty goal, without goal changes or abandoned domains."""
    return (
        dialog.termination_reason == "goal_empty"
        and not dialog.goal_changes
        and not dialog.goal.abandoned_domains
    )


class TestCorpusAgainstGoalTracking:
    """Recorded goal states agree with annotation and forward replay."""

    def test_termination_bounds(self, corpus):
        for dialog in corpus:
            assert 1 <= dialog.num_turns <= 20
            assert dialog.termination_reason in TERMINATION_REASONS

    def test_most_dialogs_are_clean(self, corpus):
        assert sum(clean(d) for d in corpus) >= 0.7 * len(corpus)

    def test_replayed_states_match_recorded(self, corpus):
        for dialog in filter(clean, corpus):
            replayed = replay_goal_states(
                dialog.initial_goal.as_goal_state(),
                [t.user_act for t in dialog.turns],
                [t.user_belief for t in dialog.turns],
            )
            expected = [t.goal_state.to_dict() for t in dialog.turns]
            assert [g.to_dict() for g in replayed[:dialog.num_turns]] == expected, dialog.dialog_id

    def test_annotated_initial_goal(self, corpus):
        for dialog in filter(clean, corpus):
            assert annotated_initial_goal(dialog).items() == dialog.initial_goal.items(), dialog.dialog_id

    def test_round_trip_and_hash(self, corpus, tmp_path):
        first = CorpusRepository(tmp_path / "a.jsonl")
        first.write_corpus(corpus)
        second = CorpusRepository(tmp_path / "b.jsonl")
        second.write_corpus(first.read_corpus())
        assert first.corpus_hash() == second.corpus_hash()

    def test_generation_is_deterministic(self, world, templates):
        def generate():
            service = CorpusService(world, templates, GoalConfig(), max_turns=20)
            return [d.to_dict() for d in service.generate_corpus(10, seed=21)]

        assert generate() == generate()


class TestCorpusConsistency:
    """Corpus-wide checks over 300 wizard/ABUS dialogs."""

    @pytest.fixture(scope="class")
    def judged(self, corpus_service, world):
        dialogs = corpus_service.generate_corpus(300, seed=0)
        return [(d, judge_dialog(d, world)) for d in dialogs]

    def test_success_rate(self, judged):
        assert sum(v.success for _, v in judged) / len(judged) >= 0.95
        assert sum(v.inform for _, v in judged) / len(judged) >= 0.99

    def test_successful_dialogs_replay_to_empty_goal(self, judged):
        for dialog, verdict in judged:
            if verdict.success:
                assert replay_final_state(dialog).is_empty(), dialog.dialog_id

    def test_annotated_goal_equals_initial_goal(self, judged):
        checked = 0
        for dialog, verdict in judged:
            if dialog.goal_changes or not verdict.success:
                continue
            assert annotated_initial_goal(dialog).items() == dialog.initial_goal.items(), dialog.dialog_id
            checked += 1
        assert checked >= 200


@pytest.mark.slow
class TestWizardAgainstAbus:
    """The scripted pair that produces the corpus mostly succeeds."""

    def test_satisfiable_goals(self, world, templates, lexicalizer):
        report = interaction_eval(
            WizardDialogSystem(world, templates, lexicalizer), AbusUserSimulator(world.ontology, templates),
            world, n_goals=100, seed=0, goal_config=GoalConfig(p_nooffer=0.0),
        )
        assert report.inform >= 0.8
        assert report.success >= 0.7

    def test_default_goals(self, world, templates, lexicalizer):
        report = interaction_eval(
            WizardDialogSystem(world, templates, lexicalizer), AbusUserSimulator(world.ontology, templates),
            world, n_goals=100, seed=0,
        )
        assert report.success >= 0.5


@pytest.mark.slow
class TestTrainingSmoke:
    """Supervised then policy-gradient training on a small corpus."""

    def test_sl_then_rl(self, tiny_ds, small_corpus, world, templates):
        sl = sl_train_ds(tiny_ds, small_corpus[:5], SLConfig(epochs=1, batch_size=8, grad_accum=1), progress=False)
        assert np.isfinite(sl.best_loss)
        config = RLConfig(updates=1, episodes_per_update=2, grad_accum=1, max_turns=3, eval_goals=2, eval_every=1)
        result = train_rl(tiny_ds, AbusUserSimulator(world.ontology, templates), world, config, progress=False)
        assert result.updates_done == 1
        assert [e["update"] for e in result.evaluations] == [0, 1]
        assert tiny_ds.model.all_finite()


@pytest.mark.slow
class TestPipelineRun:
    """Every stage on a tiny configuration, then a resumed run."""

    @pytest.fixture
    def config(self, tmp_path):
        return build_config("smoke", overrides={
            "out_dir": str(tmp_path / "run"),
            "corpus_size": 6,
            "test_corpus_size": 2,
            "model": {"n_embd": 16},
            "decoding": {"beam_width": 2, "max_segment_tokens": 12},
            "sl": {"epochs": 1},
            "rl": {"updates": 1, "episodes_per_update": 1, "eval_goals": 1, "max_turns": 4},
            "eval": {"n_goals": 2, "max_turns": 4, "corpus_dialogs": 2},
            "rl_seeds": [0],
            "train_against": ["abus"],
        })

    def test_full_run_and_resume(self, config, mocker):
        pipeline = Pipeline(config, progress=False)
        report = pipeline.run()
        assert report.exists()
        assert all(pipeline.is_done(stage) for stage in STAGES)
        assert "Cross-model evaluation" in report.read_text()
        assert pipeline.checkpoints.exists("ds_abus_s0")

        resumed = Pipeline(config, progress=False)
        spy = mocker.spy(resumed, "train_sl")
        first_report = report.read_text()
        resumed.run()
        spy.assert_not_called()
        assert report.read_text() == first_report
