"""
Tests for training sequences, the masked objective and supervised steps.
"""
import numpy as np
import pytest

from src.models.config_models import ModelConfig
from src.models.exceptions import NaNLossError
from src.neural.optim import AdamW, ConstantSchedule
from src.neural.training import (
    SequenceBuilder,
    TrainingSequence,
    check_finite,
    collate,
    masked_nll,
    sl_step,
    token_accuracy,
)
from src.neural.transformer import CausalTransformer


@pytest.fixture
def model():
    config = ModelConfig(n_layer=1, n_head=2, n_embd=32, context_length=16, init_std=0.1)
    return CausalTransformer(config, vocab_size=10, seed=0)


class TestTrainingSequence:
    """Token streams with per-token weights."""

    def test_first_token_cannot_be_target(self):
        with pytest.raises(ValueError):
            TrainingSequence([1, 2], [1.0, 1.0])

    def test_lengths_must_match(self):
        with pytest.raises(ValueError):
            TrainingSequence([1, 2, 3], [0.0, 1.0])

    def test_builder_marks_segments(self):
        seq = SequenceBuilder().add_input([4, 5]).add_target([6, 7]).add_input([8]).build()
        assert seq.tokens == [4, 5, 6, 7, 8]
        assert seq.loss_mask == [0.0, 0.0, 1.0, 1.0, 0.0]
        assert seq.num_targets == 2
        assert seq.target_positions() == [2, 3]

    def test_builder_needs_input_before_target(self):
        with pytest.raises(ValueError):
            SequenceBuilder().add_target([1])

    def test_collate_shifts_and_pads(self):
        short = SequenceBuilder().add_input([1]).add_target([2]).build()
        long = SequenceBuilder().add_input([3, 4]).add_target([5, 6]).build()
        inputs, targets, weights = collate([short, long], pad_id=0)
        assert inputs.shape == targets.shape == weights.shape == (2, 3)
        np.testing.assert_array_equal(inputs[0], [1, 0, 0])
        np.testing.assert_array_equal(targets[1], [4, 5, 6])
        np.testing.assert_array_equal(weights, [[1, 0, 0], [0, 1, 1]])

    def test_collate_rejects_single_tokens(self):
        with pytest.raises(ValueError):
            collate([TrainingSequence([1], [0.0])], pad_id=0)


class TestObjective:
    """Masked likelihood and update steps."""

    def test_masked_nll_of_uniform_model(self, model):
        """Zeroed weights give uniform predictions, so the loss is log V."""
        for p in model.parameters():
            if p.ndim >= 2:
                p.data[:] = 0.0
        seq = SequenceBuilder().add_input([1, 2]).add_target([3, 4, 5]).build()
        assert masked_nll(model, [seq]) == pytest.approx(np.log(10), abs=1e-9)

    def test_masked_nll_ignores_input_tokens(self, model):
        a = SequenceBuilder().add_input([1, 2]).add_target([3]).build()
        b = TrainingSequence([1, 2, 3], [0.0, 0.0, 1.0])
        assert masked_nll(model, [a]) == masked_nll(model, [b])

    def test_sl_step_reduces_loss(self, model):
        seq = SequenceBuilder().add_input([1, 2]).add_target([3, 4, 5, 6]).build()
        optimizer = AdamW(model.parameters(), ConstantSchedule(1e-2))
        before = masked_nll(model, [seq])
        loss, norm = sl_step(model, optimizer, [[seq]])
        assert loss == pytest.approx(before, abs=1e-9)
        assert norm > 0
        assert masked_nll(model, [seq]) < before

    def test_sl_step_needs_targets(self, model):
        optimizer = AdamW(model.parameters(), ConstantSchedule(1e-2))
        with pytest.raises(ValueError):
            sl_step(model, optimizer, [[TrainingSequence([1, 2], [0.0, 0.0])]])

    def test_accumulation_matches_single_batch(self, model):
        """Splitting a batch into micro-batches leaves the first update unchanged."""
        seqs = [
            SequenceBuilder().add_input([1]).add_target([2, 3]).build(),
            SequenceBuilder().add_input([4, 5]).add_target([6]).build(),
        ]
        state = model.state_dict()
        sl_step(model, AdamW(model.parameters(), ConstantSchedule(1e-2)), [seqs])
        joint = model.state_dict()
        model.load_state_dict(state)
        sl_step(model, AdamW(model.parameters(), ConstantSchedule(1e-2)), [[seqs[0]], [seqs[1]]])
        for name, value in model.state_dict().items():
            np.testing.assert_allclose(value, joint[name], atol=1e-10, err_msg=name)

    def test_non_finite_loss_raises(self, model):
        with pytest.raises(NaNLossError):
            check_finite(float("nan"), model, "test")

    def test_overfits_a_single_sequence(self, model):
        """A memorized sequence is reproduced token for token."""
        seq = SequenceBuilder().add_input([1, 5, 3]).add_target([8, 2, 9, 4, 7, 6, 2, 3]).build()
        optimizer = AdamW(model.parameters(), ConstantSchedule(1e-2))
        for _ in range(300):
            sl_step(model, optimizer, [[seq]])
        assert token_accuracy(model, [seq]) == 1.0
        assert masked_nll(model, [seq]) < 0.1
