import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import numpy as np

from ..models.config_models import ModelConfig
from ..neural.transformer import CausalTransformer
from ..neural.vocab import Vocab

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = 1


class CheckpointRepository:
    """Model checkpoints as ``<name>.npz`` (parameters) plus ``<name>.json`` (manifest).

    The manifest embeds the model hyperparameters, the vocabulary and its hash,
    and any caller metadata (agent variant, decoding config, training step).
    """

    def __init__(self, directory: Path):
        self.directory = Path(directory)

    def paths(self, name: str) -> Tuple[Path, Path]:
        return self.directory / f"{name}.npz", self.directory / f"{name}.json"

    def exists(self, name: str) -> bool:
        return all(p.exists() for p in self.paths(name))

    def save(self, name: str, model: CausalTransformer, vocab: Vocab, metadata: Optional[Dict[str, Any]] = None) -> Path:
        self.directory.mkdir(parents=True, exist_ok=True)
        weights_path, manifest_path = self.paths(name)
        with weights_path.open("wb") as handle:
            np.savez(handle, **model.state_dict())
        manifest = {
            "format": CHECKPOINT_FORMAT,
            "model": model.config.model_dump(),
            "vocab": vocab.tokens,
            "vocab_hash": vocab.vocab_hash(),
            "num_parameters": model.num_parameters(),
            "metadata": metadata or {},
        }
        manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        logger.info(f"Saved checkpoint {name} to {self.directory}")
        return weights_path

    def load_manifest(self, name: str) -> Dict[str, Any]:
        _, manifest_path = self.paths(name)
        if not manifest_path.exists():
            raise FileNotFoundError(f"checkpoint manifest not found: {manifest_path}")
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        if manifest.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(f"unsupported checkpoint format: {manifest.get('format')}")
        return manifest

    def load(self, name: str) -> Tuple[CausalTransformer, Vocab, Dict[str, Any]]:
        manifest = self.load_manifest(name)
        vocab = Vocab(manifest["vocab"])
        if vocab.vocab_hash() != manifest["vocab_hash"]:
            raise ValueError(f"vocabulary hash mismatch in checkpoint {name}")
        model = CausalTransformer(ModelConfig(**manifest["model"]), len(vocab), pad_id=vocab.pad_id)
        weights_path, _ = self.paths(name)
        with np.load(weights_path) as data:
            model.load_state_dict({key: data[key] for key in data.files})
        logger.info(f"Loaded checkpoint {name} from {self.directory}")
        return model, vocab, manifest.get("metadata", {})
