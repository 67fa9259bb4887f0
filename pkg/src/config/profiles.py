"""
Built-in run profiles.

``smoke`` finishes in minutes, ``desk`` in tens of minutes, ``paper-shape`` uses the
desk hyperparameters with the full 16 x 12 episodes per RL update and additionally runs
every ablation.
"""
import json
from pathlib import Path
from typing import Any, Dict, Optional

from ..models.config_models import RunConfig

PROFILES: Dict[str, Dict[str, Any]] = {
    "smoke": {
        "corpus_size": 60,
        "test_corpus_size": 12,
        "model": {"n_layer": 1, "n_head": 2, "n_embd": 32, "context_length": 192},
        "decoding": {"beam_width": 3, "max_segment_tokens": 30},
        "sl": {"epochs": 2, "batch_size": 8, "grad_accum": 1, "lr": 3e-3},
        "rl": {"updates": 2, "episodes_per_update": 4, "grad_accum": 1, "eval_every": 1, "eval_goals": 4, "max_turns": 8, "lr": 6e-4},
        "eval": {"n_goals": 8, "max_turns": 8, "corpus_dialogs": 6},
        "rl_seeds": [0],
    },
    "desk": {
        "corpus_size": 2000,
        "test_corpus_size": 200,
        "model": {"n_layer": 2, "n_head": 2, "n_embd": 64, "context_length": 256},
        "sl": {"epochs": 5, "batch_size": 8, "grad_accum": 4, "lr": 1e-3},
        "rl": {"updates": 20, "episodes_per_update": 16, "grad_accum": 1, "eval_every": 5, "eval_goals": 50, "lr": 2e-4},
        "eval": {"n_goals": 500},
        "rl_seeds": [0, 1, 2],
    },
}
PROFILES["paper-shape"] = {
    **PROFILES["desk"],
    "rl": {**PROFILES["desk"]["rl"], "grad_accum": 12},
    "ablations": True,
}


def _merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def build_config(
    profile: str = "desk",
    config_file: Optional[Path] = None,
    overrides: Optional[Dict[str, Any]] = None,
) -> RunConfig:
    """Profile defaults < config file < explicit overrides (CLI flags)."""
    if profile not in PROFILES:
        raise ValueError(f"unknown profile '{profile}', choose from {sorted(PROFILES)}")
    data: Dict[str, Any] = _merge({"profile": profile}, PROFILES[profile])
    if config_file is not None:
        data = _merge(data, json.loads(Path(config_file).read_text(encoding="utf-8")))
    if overrides:
        data = _merge(data, {k: v for k, v in overrides.items() if v is not None})
    return RunConfig.model_validate(data)
