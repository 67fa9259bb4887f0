"""
Building, saving and restoring agents from run configuration and checkpoints.
"""
import logging
from typing import Optional

from ..models.config_models import DecodingConfig, ModelConfig, SimulatorKind
from ..neural.transformer import CausalTransformer
from ..neural.vocab import Vocab
from ..repositories.checkpoint_repository import CheckpointRepository
from ..repositories.world_repository import WorldRepository
from ..services.abus_service import AbusUserSimulator
from ..services.template_service import TemplateService
from .base import UserSimulator
from .ds_agent import DSAgent
from .gus_agent import GUSAgent

logger = logging.getLogger(__name__)


def new_ds(
    model_config: ModelConfig,
    vocab: Vocab,
    world: WorldRepository,
    decoding: Optional[DecodingConfig] = None,
    seed: int = 0,
    name: str = "ds",
) -> DSAgent:
    model = CausalTransformer(model_config, len(vocab), seed=seed, pad_id=vocab.pad_id)
    logger.info(f"Initialized DS {name} with {model.num_parameters()} parameters")
    return DSAgent(model, vocab, world, decoding, name=name)


def new_gus(
    model_config: ModelConfig,
    vocab: Vocab,
    world: WorldRepository,
    decoding: Optional[DecodingConfig] = None,
    seed: int = 0,
    with_gst: bool = True,
) -> GUSAgent:
    model = CausalTransformer(model_config, len(vocab), seed=seed, pad_id=vocab.pad_id)
    agent = GUSAgent(model, vocab, world.ontology, decoding, with_gst=with_gst)
    logger.info(f"Initialized {agent.name} with {model.num_parameters()} parameters")
    return agent


def save_agent(repo: CheckpointRepository, name: str, agent) -> None:
    repo.save(name, agent.model, agent.vocab, agent.manifest())


def load_ds(
    repo: CheckpointRepository,
    name: str,
    world: WorldRepository,
    decoding: Optional[DecodingConfig] = None,
) -> DSAgent:
    model, vocab, metadata = repo.load(name)
    if metadata.get("agent", "ds") != "ds":
        raise ValueError(f"checkpoint {name} holds a {metadata['agent']} model, not a dialog system")
    if decoding is None and "decoding" in metadata:
        decoding = DecodingConfig(**metadata["decoding"])
    return DSAgent(model, vocab, world, decoding, name=name)


def load_gus(
    repo: CheckpointRepository,
    name: str,
    world: WorldRepository,
    decoding: Optional[DecodingConfig] = None,
) -> GUSAgent:
    model, vocab, metadata = repo.load(name)
    if metadata.get("agent") != "gus":
        raise ValueError(f"checkpoint {name} does not hold a user simulator")
    if decoding is None and "decoding" in metadata:
        decoding = DecodingConfig(**metadata["decoding"])
    return GUSAgent(model, vocab, world.ontology, decoding, with_gst=bool(metadata.get("with_gst", True)))


def make_user(
    kind: str,
    repo: Optional[CheckpointRepository],
    world: WorldRepository,
    templates: TemplateService,
    semantic_abus: bool = False,
    max_pops: Optional[int] = None,
    decoding: Optional[DecodingConfig] = None,
) -> UserSimulator:
    """ABUS is rule-based; the GUS variants are restored from the checkpoint named after the kind."""
    kind = SimulatorKind(kind).value
    if kind == SimulatorKind.ABUS.value:
        return AbusUserSimulator(world.ontology, templates, semantic=semantic_abus, max_pops=max_pops)
    if repo is None:
        raise ValueError(f"user simulator {kind} needs a checkpoint directory")
    return load_gus(repo, kind, world, decoding)
