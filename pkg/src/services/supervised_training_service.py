"""
Supervised pretraining of the dialog system and the user simulator on a corpus.
"""
import copy
import logging
import math
from dataclasses import dataclass, field
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from ..agents.ds_agent import DSAgent
from ..agents.gus_agent import GUSAgent
from ..models.config_models import SLConfig
from ..models.domain_models import Dialog
from ..neural.optim import AdamW, LinearWarmupSchedule
from ..neural.training import TrainingSequence, masked_nll, sl_step
from ..neural.transformer import CausalTransformer
from ..neural.vocab import Vocab
from ..repositories.world_repository import WorldRepository
from .goal_tracking_service import annotate_goal_states
from .training_monitor import StepMetrics, TrainingMonitor

logger = logging.getLogger(__name__)


def corpus_texts(dialogs: Sequence[Dialog]) -> Iterator[str]:
    for dialog in dialogs:
        for turn in dialog.turns:
            yield turn.user_utterance
            yield turn.sys_response


def build_vocab(world: WorldRepository, dialogs: Sequence[Dialog]) -> Vocab:
    """Shared vocabulary of the DS and GUS: ontology tokens plus corpus words."""
    vocab = Vocab.build(world.ontology, corpus_texts(dialogs))
    logger.info(f"Built vocabulary of {len(vocab)} tokens from {len(dialogs)} dialogs")
    return vocab


def split_holdout(dialogs: Sequence[Dialog], fraction: float, seed: int) -> Tuple[List[Dialog], List[Dialog]]:
    """Seeded split into (train, held-out); at least one training dialog is kept."""
    if not dialogs:
        return [], []
    order = np.random.default_rng(seed).permutation(len(dialogs))
    n_held = min(int(round(len(dialogs) * fraction)), len(dialogs) - 1)
    held = sorted(order[:n_held].tolist())
    train = sorted(order[n_held:].tolist())
    return [dialogs[i] for i in train], [dialogs[i] for i in held]


def ds_training_sequences(ds: DSAgent, dialogs: Sequence[Dialog]) -> List[TrainingSequence]:
    sequences = []
    for dialog in dialogs:
        previous = None
        for turn in dialog.turns:
            sequences.append(ds.training_sequence(previous, turn))
            previous = turn
    return sequences


def us_training_sequences(us: GUSAgent, dialogs: Sequence[Dialog]) -> List[TrainingSequence]:
    """Both GUS families per turn, goal states annotated backwards from the user acts."""
    sequences = []
    for dialog in dialogs:
        states = annotate_goal_states([turn.user_act for turn in dialog.turns])
        previous = None
        for turn, g in zip(dialog.turns, states):
            sequences.extend(us.training_sequences(previous, turn, g if us.with_gst else states[0]))
            previous = turn
    return sequences


def heldout_loss(model: CausalTransformer, sequences: Sequence[TrainingSequence], batch_size: int) -> float:
    """Mean NLL per target token over all sequences."""
    total_targets = sum(s.num_targets for s in sequences)
    if total_targets == 0:
        return float("nan")
    total = 0.0
    for start in range(0, len(sequences), batch_size):
        chunk = sequences[start:start + batch_size]
        n = sum(s.num_targets for s in chunk)
        if n:
            total += masked_nll(model, chunk) * n
    return total / total_targets


@dataclass
class SLResult:
    best_epoch: int
    best_loss: float
    train_losses: List[float] = field(default_factory=list)
    heldout_losses: List[float] = field(default_factory=list)
    steps: int = 0

    def to_dict(self):
        return {
            "best_epoch": self.best_epoch, "best_loss": self.best_loss, "steps": self.steps,
            "train_losses": self.train_losses, "heldout_losses": self.heldout_losses,
        }


class SupervisedTrainer:
    """Masked-likelihood training with AdamW, linear warmup/decay and grad accumulation.

    The parameters with the lowest held-out loss (training loss when there is no
    held-out data) are restored at the end.
    """

    def __init__(
        self,
        model: CausalTransformer,
        config: SLConfig,
        seed: int = 0,
        monitor: Optional[TrainingMonitor] = None,
        progress: bool = True,
    ):
        self.model = model
        self.config = config
        self.seed = seed
        self.monitor = monitor or TrainingMonitor("sl")
        self.progress = progress

    def _micro_batches(self, sequences: Sequence[TrainingSequence], rng: np.random.Generator) -> List[List[TrainingSequence]]:
        order = rng.permutation(len(sequences))
        size = self.config.batch_size
        return [[sequences[i] for i in order[start:start + size]] for start in range(0, len(order), size)]

    def fit(self, train: Sequence[TrainingSequence], heldout: Sequence[TrainingSequence] = ()) -> SLResult:
        train = [s for s in train if s.num_targets]
        if not train:
            raise ValueError("no training sequences with target tokens")
        cfg = self.config
        rng = np.random.default_rng(self.seed)
        n_micro = math.ceil(len(train) / cfg.batch_size)
        steps_per_epoch = math.ceil(n_micro / cfg.grad_accum)
        schedule = LinearWarmupSchedule(cfg.lr, cfg.epochs * steps_per_epoch, cfg.warmup_fraction)
        optimizer = AdamW(self.model.parameters(), schedule, weight_decay=cfg.weight_decay)
        logger.info(
            f"SL training on {len(train)} sequences ({len(heldout)} held out): "
            f"{cfg.epochs} epochs x {steps_per_epoch} steps"
        )

        result = SLResult(best_epoch=0, best_loss=float("inf"))
        best_state = None
        step = 0
        for epoch in tqdm(range(1, cfg.epochs + 1), desc=f"{self.monitor.name} epochs", disable=not self.progress):
            micro = self._micro_batches(train, rng)
            epoch_loss, epoch_targets = 0.0, 0
            for start in range(0, len(micro), cfg.grad_accum):
                group = micro[start:start + cfg.grad_accum]
                lr = optimizer.lr
                loss, norm = sl_step(self.model, optimizer, group)
                step += 1
                n = sum(s.num_targets for m in group for s in m)
                epoch_loss += loss * n
                epoch_targets += n
                self.monitor.record_step(StepMetrics(step, "sl", loss, lr, norm))
            train_loss = epoch_loss / epoch_targets
            result.train_losses.append(train_loss)

            if heldout:
                loss = heldout_loss(self.model, heldout, cfg.batch_size)
                result.heldout_losses.append(loss)
            else:
                loss = train_loss
            self.monitor.record_evaluation("sl", step, {"train_loss": train_loss, "heldout_loss": loss})
            if loss < result.best_loss:
                result.best_loss, result.best_epoch = loss, epoch
                best_state = copy.deepcopy(self.model.state_dict())
            logger.info(f"Epoch {epoch}/{cfg.epochs}: train loss {train_loss:.4f}, selection loss {loss:.4f}")

        result.steps = step
        if best_state is not None:
            self.model.load_state_dict(best_state)
        logger.info(f"Kept parameters of epoch {result.best_epoch} (loss {result.best_loss:.4f})")
        return result


def _prepare(dialogs: Sequence[Dialog], config: SLConfig, seed: int) -> Tuple[List[Dialog], List[Dialog]]:
    if not dialogs:
        raise ValueError("cannot train on an empty corpus")
    dialogs = list(dialogs)[:config.max_dialogs] if config.max_dialogs else list(dialogs)
    return split_holdout(dialogs, config.holdout_fraction, seed)


def sl_train_ds(
    ds: DSAgent,
    dialogs: Sequence[Dialog],
    config: SLConfig,
    seed: int = 0,
    monitor: Optional[TrainingMonitor] = None,
    progress: bool = True,
) -> SLResult:
    """Train the DS in place on (b_prev, r_prev, u, db) -> (b, a, r) sequences."""
    train, held = _prepare(dialogs, config, seed)
    trainer = SupervisedTrainer(ds.model, config, seed, monitor or TrainingMonitor("sl_ds"), progress)
    return trainer.fit(ds_training_sequences(ds, train), ds_training_sequences(ds, held))


def sl_train_us(
    us: GUSAgent,
    dialogs: Sequence[Dialog],
    config: SLConfig,
    seed: int = 0,
    monitor: Optional[TrainingMonitor] = None,
    progress: bool = True,
) -> SLResult:
    """Train the GUS in place on both sequence families, shuffled together."""
    train, held = _prepare(dialogs, config, seed)
    trainer = SupervisedTrainer(us.model, config, seed, monitor or TrainingMonitor(f"sl_{us.name}"), progress)
    return trainer.fit(us_training_sequences(us, train), us_training_sequences(us, held))
