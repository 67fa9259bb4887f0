"""
Tests for building, saving and restoring agents.
"""
import numpy as np
import pytest

from src.agents.factory import load_ds, load_gus, make_user, save_agent
from src.models.domain_models import BeliefState
from src.repositories.checkpoint_repository import CheckpointRepository
from src.services.abus_service import AbusUserSimulator


@pytest.fixture
def repo(tmp_path):
    return CheckpointRepository(tmp_path / "checkpoints")


class TestCheckpoints:
    """Agents survive a save/load cycle."""

    def test_ds_round_trip(self, repo, tiny_ds, world):
        save_agent(repo, "ds_sl", tiny_ds)
        restored = load_ds(repo, "ds_sl", world)
        assert restored.name == "ds_sl"
        assert restored.decoding == tiny_ds.decoding
        assert restored.vocab.tokens == tiny_ds.vocab.tokens
        a = tiny_ds.ds_turn(BeliefState(), "", "chinese food", np.random.default_rng(0))
        b = restored.ds_turn(BeliefState(), "", "chinese food", np.random.default_rng(0))
        assert a.trace.tokens == b.trace.tokens

    def test_gus_round_trip_keeps_variant(self, repo, tiny_gus_nogst, world):
        save_agent(repo, "gus-nogst", tiny_gus_nogst)
        restored = load_gus(repo, "gus-nogst", world)
        assert restored.with_gst is False
        assert restored.name == "gus-nogst"

    def test_kinds_are_checked(self, repo, tiny_ds, tiny_gus, world):
        save_agent(repo, "ds_sl", tiny_ds)
        save_agent(repo, "gus", tiny_gus)
        with pytest.raises(ValueError):
            load_gus(repo, "ds_sl", world)
        with pytest.raises(ValueError):
            load_ds(repo, "gus", world)


class TestMakeUser:
    """Simulators by kind."""

    def test_abus_needs_no_checkpoint(self, world, templates):
        user = make_user("abus", None, world, templates, max_pops=2)
        assert isinstance(user, AbusUserSimulator)

    def test_gus_needs_checkpoints(self, world, templates):
        with pytest.raises(ValueError):
            make_user("gus", None, world, templates)

    def test_unknown_kind(self, world, templates, repo):
        with pytest.raises(ValueError):
            make_user("human", repo, world, templates)

    def test_gus_from_checkpoint(self, repo, tiny_gus, world, templates):
        save_agent(repo, "gus", tiny_gus)
        assert make_user("gus", repo, world, templates).name == "gus"
