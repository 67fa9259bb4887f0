"""
Shared test fixtures and configuration for the dialoop test suite.
"""
import os

import numpy as np
import pytest

# Set test environment variables before importing application code
os.environ.update({
    "DIALOOP_LOG_LEVEL": "WARNING",
    "DIALOOP_RUNS_DIR": "tests/temp/runs",
    "DIALOOP_THREADS": "1",
})

from src.agents.factory import new_ds, new_gus
from src.config.settings import settings
from src.models.config_models import DecodingConfig, GoalConfig, ModelConfig
from src.repositories.world_repository import WorldRepository
from src.services.corpus_service import CorpusService
from src.services.lexicalization_service import LexicalizationService
from src.services.serialization_service import SpanSerializer
from src.services.supervised_training_service import build_vocab
from src.services.template_service import TemplateService

# ============================================================================
# World Fixtures
# ============================================================================

@pytest.fixture(scope="session")
def world():
    """The shipped world loaded into an in-memory database."""
    return WorldRepository()


@pytest.fixture(scope="session")
def ontology(world):
    return world.ontology


@pytest.fixture(scope="session")
def templates(world):
    """Template NLG/NLU bound to the shipped ontology."""
    return TemplateService(settings.TEMPLATES_PATH, world.ontology)


@pytest.fixture(scope="session")
def serializer(ontology):
    return SpanSerializer(ontology)


@pytest.fixture(scope="session")
def lexicalizer(ontology):
    return LexicalizationService(ontology)


# ============================================================================
# Corpus Fixtures
# ============================================================================

@pytest.fixture(scope="session")
def corpus_service(world, templates):
    return CorpusService(world, templates, GoalConfig(), max_turns=20)


@pytest.fixture(scope="session")
def small_corpus(corpus_service):
    """Thirty wizard/ABUS dialogs, seed 7."""
    return corpus_service.generate_corpus(30, seed=7)


@pytest.fixture(scope="session")
def vocab(world, small_corpus):
    return build_vocab(world, small_corpus)


# ============================================================================
# Model Fixtures
# ============================================================================

@pytest.fixture(scope="session")
def tiny_model_config():
    """One block, width 16; the context fits every corpus turn."""
    return ModelConfig(n_layer=1, n_head=2, n_embd=16, context_length=256)


@pytest.fixture(scope="session")
def tiny_decoding():
    return DecodingConfig(beam_width=2, max_segment_tokens=12)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# ============================================================================
# Agent Fixtures
# ============================================================================

@pytest.fixture
def tiny_ds(tiny_model_config, vocab, world, tiny_decoding):
    """Untrained dialog system; a fresh copy per test since agents carry state."""
    return new_ds(tiny_model_config, vocab, world, tiny_decoding, seed=0)


@pytest.fixture
def tiny_gus(tiny_model_config, vocab, world, tiny_decoding):
    return new_gus(tiny_model_config, vocab, world, tiny_decoding, seed=1)


@pytest.fixture
def tiny_gus_nogst(tiny_model_config, vocab, world, tiny_decoding):
    return new_gus(tiny_model_config, vocab, world, tiny_decoding, seed=2, with_gst=False)


# ============================================================================
# Performance Testing Fixtures
# ============================================================================

@pytest.fixture
def performance_baseline():
    """Upper bounds in seconds for timed operations on one core."""
    return {
        "goal_generation_per_1000": 10.0,
        "corpus_generation_per_100": 30.0,
        "tiny_forward_batch": 1.0,
        "tiny_ds_turn": 5.0,
    }
