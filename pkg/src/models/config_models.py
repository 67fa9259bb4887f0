"""
Serializable run configuration.

Every run directory receives the exact ``RunConfig`` that produced it as
``config.json``; loading that file back reproduces the run.
"""
from enum import Enum
from pathlib import Path
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


SIGMOID_ALIAS = "sigmoid_synthetic"


class RewardSetting(str, Enum):
    """Per-turn reward used during RL."""
    SUCCESS = "success"
    SYNTHETIC = "synthetic"
    SIGMOID = "sigmoid"

    @classmethod
    def _missing_(cls, value):
        if value == SIGMOID_ALIAS:
            return cls.SIGMOID
        return None


class PolicyScheme(str, Enum):
    """Generated segments that receive policy-gradient credit."""
    BELIEF_ACT_RESPONSE = "bar"
    ACT_RESPONSE = "ar"
    ACT = "a"


class DecodeMode(str, Enum):
    GREEDY = "greedy"
    BEAM_SAMPLE = "beam_sample"


class SimulatorKind(str, Enum):
    """User simulators a dialog system can be trained or tested against."""
    ABUS = "abus"
    GUS = "gus"
    GUS_NOGST = "gus-nogst"


class GoalConfig(BaseModel):
    """Distribution of generated user goals."""
    model_config = ConfigDict(use_enum_values=True)

    domain_count_weights: List[float] = Field(
        default=[1 / 3, 1 / 3, 1 / 3],
        description="Probability of a goal spanning 1, 2, 3... domains",
    )
    min_constraints: int = Field(default=1, ge=1, description="Minimum informable constraints per domain")
    max_constraints: int = Field(default=3, ge=1, description="Maximum informable constraints per domain")
    min_requests: int = Field(default=1, ge=1, description="Minimum requested slots per domain")
    max_requests: int = Field(default=2, ge=1, description="Maximum requested slots per domain")
    book_probability: float = Field(default=0.3, ge=0.0, le=1.0, description="Chance a bookable domain carries book items")
    p_nooffer: float = Field(default=0.15, ge=0.0, le=1.0, description="Chance a goal is made unsatisfiable")

    @field_validator("domain_count_weights")
    @classmethod
    def weights_are_distribution(cls, value: List[float]) -> List[float]:
        if not value or any(w < 0 for w in value) or sum(value) <= 0:
            raise ValueError("domain_count_weights must be non-negative and sum to a positive number")
        return value

    @model_validator(mode="after")
    def ranges_are_ordered(self) -> "GoalConfig":
        if self.min_constraints > self.max_constraints:
            raise ValueError("min_constraints must not exceed max_constraints")
        if self.min_requests > self.max_requests:
            raise ValueError("min_requests must not exceed max_requests")
        return self


class ModelConfig(BaseModel):
    """Causal transformer hyperparameters."""
    n_layer: int = Field(default=2, ge=1)
    n_head: int = Field(default=2, ge=1)
    n_embd: int = Field(default=64, ge=2)
    context_length: int = Field(default=256, ge=8)
    init_std: float = Field(default=0.02, gt=0.0)

    @model_validator(mode="after")
    def heads_divide_width(self) -> "ModelConfig":
        if self.n_embd % self.n_head != 0:
            raise ValueError("n_embd must be divisible by n_head")
        return self


class DecodingConfig(BaseModel):
    """Decoding strategy per generated segment."""
    model_config = ConfigDict(use_enum_values=True)

    belief_mode: DecodeMode = DecodeMode.GREEDY
    act_mode: DecodeMode = DecodeMode.BEAM_SAMPLE
    text_mode: DecodeMode = DecodeMode.GREEDY
    beam_width: int = Field(default=10, ge=1)
    max_segment_tokens: int = Field(default=40, ge=1)


class SLConfig(BaseModel):
    """Supervised pretraining hyperparameters."""
    epochs: int = Field(default=5, ge=1)
    batch_size: int = Field(default=8, ge=1)
    grad_accum: int = Field(default=4, ge=1)
    lr: float = Field(default=1e-3, ge=0.0)
    warmup_fraction: float = Field(default=0.2, ge=0.0, le=1.0)
    weight_decay: float = Field(default=0.01, ge=0.0)
    holdout_fraction: float = Field(default=0.1, ge=0.0, lt=1.0)
    max_dialogs: Optional[int] = Field(default=None, ge=1, description="Cap on training dialogs")


class RLConfig(BaseModel):
    """Policy-gradient training of the dialog system."""
    model_config = ConfigDict(use_enum_values=True)

    reward_setting: RewardSetting = RewardSetting.SYNTHETIC
    policy_scheme: PolicyScheme = PolicyScheme.BELIEF_ACT_RESPONSE
    gamma: float = Field(default=0.99, gt=0.0, le=1.0)
    max_turns: int = Field(default=20, ge=2)
    episodes_per_update: int = Field(default=16, ge=1)
    grad_accum: int = Field(default=12, ge=1)
    updates: int = Field(default=20, ge=0)
    lr: float = Field(default=2e-4, ge=0.0)
    weight_decay: float = Field(default=0.0, ge=0.0)
    constant_baseline: Optional[float] = Field(default=None, description="Subtracted from every return when set")
    eval_every: int = Field(default=5, ge=1)
    eval_goals: int = Field(default=50, ge=1)
    divergence_drop: float = Field(default=0.5, gt=0.0, le=1.0)
    divergence_patience: int = Field(default=3, ge=1)
    seed: int = 0

    @field_validator("reward_setting", mode="before")
    @classmethod
    def legacy_reward_name(cls, value):
        return RewardSetting.SIGMOID if value == SIGMOID_ALIAS else value


class EvalConfig(BaseModel):
    """Interaction and corpus evaluation settings."""
    n_goals: int = Field(default=500, ge=1)
    max_turns: int = Field(default=20, ge=2)
    corpus_dialogs: Optional[int] = Field(default=None, ge=1, description="Cap on test dialogs for corpus evaluation")
    seed: int = 1234


class RunConfig(BaseModel):
    """Everything needed to reproduce a run."""
    model_config = ConfigDict(use_enum_values=True, protected_namespaces=())

    profile: str = "desk"
    seed: int = 0
    threads: int = Field(default=1, ge=1)
    world_path: Optional[str] = None
    templates_path: Optional[str] = None
    out_dir: str = "runs/default"
    corpus_size: int = Field(default=2000, ge=1)
    test_corpus_size: int = Field(default=200, ge=1)
    semantic_abus: bool = False
    max_pops: int = Field(default=3, ge=1)
    goal: GoalConfig = Field(default_factory=GoalConfig)
    model: ModelConfig = Field(default_factory=ModelConfig)
    decoding: DecodingConfig = Field(default_factory=DecodingConfig)
    sl: SLConfig = Field(default_factory=SLConfig)
    rl: RLConfig = Field(default_factory=RLConfig)
    eval: EvalConfig = Field(default_factory=EvalConfig)
    rl_seeds: List[int] = Field(default=[0, 1, 2])
    train_against: List[SimulatorKind] = Field(default=[SimulatorKind.ABUS, SimulatorKind.GUS])
    ablations: bool = False

    def save(self, path: Path) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.model_dump_json(indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: Path) -> "RunConfig":
        return cls.model_validate_json(Path(path).read_text(encoding="utf-8"))
