"""
Tests for token-level context assembly of both agents.
"""
import pytest

from src.agents.context import DB_SEGMENT_BUDGET, ContextAssembler


def ids(vocab, *tokens):
    return [vocab.id(t) for t in tokens]


@pytest.fixture
def assembler(vocab):
    return ContextAssembler(vocab, context_length=256, max_segment_tokens=12)


class TestDSContext:
    """Dialog system prefixes and training sequences."""

    def test_reserve(self, assembler):
        assert assembler.reserve == 3 * 13 + DB_SEGMENT_BUDGET

    def test_first_turn_prefix(self, assembler, vocab):
        prefix = assembler.ds_prefix("", "", "chinese food")
        assert prefix.ids == ids(
            vocab, "<sos_b>", "<eos_b>", "<sos_r>", "<eos_r>", "<sos_u>", "chinese", "food", "<eos_u>", "<sos_b>",
        )
        assert not prefix.truncated

    def test_user_utterance_cut_from_the_left(self, vocab):
        assembler = ContextAssembler(vocab, context_length=70, max_segment_tokens=2)
        utterance = " ".join(["north"] * 10 + ["chinese"] * 40)
        prefix = assembler.ds_prefix("", "", utterance)
        assert prefix.dropped == 8
        assert len(prefix.ids) == 70 - assembler.reserve
        assert prefix.ids[5] == vocab.id("north")
        assert prefix.ids[-3] == vocab.id("chinese")

    def test_structural_overflow_raises(self, vocab):
        assembler = ContextAssembler(vocab, context_length=30, max_segment_tokens=2)
        with pytest.raises(ValueError):
            assembler.ds_prefix("[restaurant] food chinese area north pricerange cheap", "", "hello")

    def test_training_sequence_targets(self, assembler, vocab):
        seq, dropped = assembler.ds_training_sequence(
            "", "", "chinese food", "[restaurant] food chinese", "[restaurant] [db_many]",
            "[restaurant] [request] area", "[value_name] area north",
        )
        assert dropped == 0
        targets = [vocab.tokens[seq.tokens[p]] for p in seq.target_positions()]
        assert targets == [
            "[restaurant]", "food", "chinese", "<eos_b>",
            "[restaurant]", "[request]", "area", "<eos_a>",
            "[value_name]", "area", "north", "<eos_r>",
        ]
        assert vocab.tokens[seq.tokens[-1]] == "<eos_r>"
        assert vocab.id("<sos_db>") in seq.tokens


class TestUserContext:
    """User simulator prefixes and both training families."""

    def test_belief_prefix(self, assembler, vocab):
        prefix = assembler.us_belief_prefix("[value_name] area north")
        assert prefix.ids == ids(vocab, "<sos_r>", "[value_name]", "area", "north", "<eos_r>", "<sos_b>")

    def test_act_prefix(self, assembler, vocab):
        prefix = assembler.us_act_prefix("", "[restaurant] [request] area", "[restaurant] [inform] area north")
        assert prefix.ids[:3] == ids(vocab, "<sos_r>", "<eos_r>", "<sos_b>")
        assert prefix.ids[-1] == vocab.id("<sos_a>")
        assert vocab.id("<sos_g>") in prefix.ids

    def test_training_families(self, assembler, vocab):
        first, second = assembler.us_training_sequences(
            "[value_name] area north", "[restaurant] [request] area", "[restaurant] [inform] area north",
            "[restaurant] [inform] area", "i want something in the north .",
        )
        assert [vocab.tokens[first.tokens[p]] for p in first.target_positions()] == [
            "[restaurant]", "[request]", "area", "<eos_b>",
        ]
        second_targets = [vocab.tokens[second.tokens[p]] for p in second.target_positions()]
        assert second_targets[:4] == ["[restaurant]", "[inform]", "area", "<eos_a>"]
        assert second_targets[-1] == "<eos_u>"
        assert second.num_targets == 4 + 8

    def test_long_response_is_truncated(self, vocab):
        assembler = ContextAssembler(vocab, context_length=60, max_segment_tokens=2)
        prefix = assembler.us_belief_prefix(" ".join(["north"] * 100))
        assert prefix.truncated
        assert len(prefix.ids) == 60 - assembler.reserve
