"""
Tests for the generative dialog system agent.
"""
import numpy as np

from src.agents.ds_agent import SCHEME_SEGMENTS, DSTrace
from src.models.domain_models import ActItem, BeliefState, DialogAct
from src.neural.decoding import DecodeResult


class TestDSTrace:
    """Segment bookkeeping on the turn token stream."""

    def test_segments_and_policy_positions(self):
        trace = DSTrace()
        trace.append_input([1, 2, 3])
        trace.append_generated("belief", DecodeResult([4, 5], [0.0, 0.0], truncated=False))
        trace.append_input([6])
        trace.append_generated("act", DecodeResult([7], [0.0], truncated=True))
        trace.append_input([8])
        trace.append_generated("response", DecodeResult([9, 10], [0.0, 0.0], truncated=False))
        assert trace.tokens == list(range(1, 11))
        assert trace.policy_positions("bar") == [3, 4, 6, 8, 9]
        assert trace.policy_positions("ar") == [6, 8, 9]
        assert trace.policy_positions("a") == [6]
        assert trace.truncated == {"belief": False, "act": True, "response": False}

    def test_training_sequence_weights(self):
        trace = DSTrace(tokens=[1, 2, 3, 4])
        seq = trace.training_sequence([2, 3], [0.5, -1.0])
        assert seq.loss_mask == [0.0, 0.0, 0.5, -1.0]

    def test_schemes_nest(self):
        assert set(SCHEME_SEGMENTS["a"]) < set(SCHEME_SEGMENTS["ar"]) < set(SCHEME_SEGMENTS["bar"])


class TestDSAgent:
    """One DS turn from the utterance."""

    def test_turn_structure(self, tiny_ds, vocab):
        turn = tiny_ds.ds_turn(BeliefState(), "", "i would like chinese food .", np.random.default_rng(0))
        trace = turn.trace
        assert set(trace.segments) == {"belief", "act", "response"}
        assert len(trace.tokens) <= tiny_ds.model.context_length
        for segment in trace.segments.values():
            assert 1 <= len(segment) <= tiny_ds.decoding.max_segment_tokens
        db_start = trace.segments["belief"][-1] + 1
        assert trace.tokens[db_start] == vocab.id("<sos_db>")
        assert trace.tokens[trace.segments["act"][0] - 1] == vocab.id("<sos_a>")
        assert trace.tokens[trace.segments["response"][0] - 1] == vocab.id("<sos_r>")

    def test_same_rng_same_turn(self, tiny_ds):
        first = tiny_ds.ds_turn(BeliefState(), "", "hello", np.random.default_rng(3))
        second = tiny_ds.ds_turn(BeliefState(), "", "hello", np.random.default_rng(3))
        assert first.trace.tokens == second.trace.tokens
        assert first.response == second.response

    def test_respond_carries_belief_and_response(self, tiny_ds):
        tiny_ds.reset(np.random.default_rng(0))
        reply = tiny_ds.respond("i would like chinese food .")
        assert tiny_ds.b_prev == reply.belief
        assert tiny_ds.r_prev == reply.response
        assert isinstance(reply.trace, DSTrace)
        assert set(reply.db) == set(reply.belief.domains) & set(tiny_ds.world.ontology.domain_names)

    def test_semantic_user_act_is_ignored(self, tiny_ds):
        act = DialogAct.of(ActItem("restaurant", "inform", "food", "chinese"))
        tiny_ds.reset(np.random.default_rng(5))
        with_act = tiny_ds.respond("hello", act)
        tiny_ds.reset(np.random.default_rng(5))
        without = tiny_ds.respond("hello")
        assert with_act.trace.tokens == without.trace.tokens

    def test_training_sequence_for_corpus_turns(self, tiny_ds, small_corpus):
        dialog = small_corpus[0]
        first = tiny_ds.training_sequence(None, dialog.turns[0])
        assert first.num_targets > 0
        assert len(first.tokens) <= tiny_ds.model.context_length
        if dialog.num_turns > 1:
            second = tiny_ds.training_sequence(dialog.turns[0], dialog.turns[1])
            assert len(second.tokens) > 0

    def test_manifest(self, tiny_ds):
        manifest = tiny_ds.manifest()
        assert manifest["agent"] == "ds"
        assert manifest["decoding"]["beam_width"] == 2
