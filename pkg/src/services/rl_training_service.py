"""
Policy-gradient training of the dialog system against a user simulator.

Each update rolls a batch of episodes on fresh goals, scores every turn, spreads
the turn reward over the policy tokens as discounted returns and ascends
sum(U * log p) over those tokens only. The user simulator is never updated.
"""
import copy
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from tqdm import tqdm

from ..agents.base import UserSimulator
from ..agents.ds_agent import DSAgent
from ..models.config_models import GoalConfig, RLConfig
from ..models.domain_models import Dialog
from ..models.exceptions import NaNLossError, TrainingDivergedError
from ..neural.optim import AdamW, ConstantSchedule, clip_grad_norm
from ..neural.training import TrainingSequence, accumulate_gradients, check_finite
from ..repositories.corpus_repository import CorpusRepository
from ..repositories.world_repository import WorldRepository
from .evaluation_service import EvalReport, interaction_eval
from .goal_generator_service import GoalGeneratorService
from .interaction_service import run_episode
from .reward_service import reward_trace
from .training_monitor import StepMetrics, TrainingMonitor

logger = logging.getLogger(__name__)

SEQUENCES_PER_FORWARD = 16


def policy_sequences(
    episodes: Sequence[Dialog], scheme: str, baseline: Optional[float] = None
) -> List[TrainingSequence]:
    """One weighted sequence per DS turn; weights are the returns on the policy tokens."""
    sequences = []
    for dialog in episodes:
        if dialog.reward_trace is None:
            raise ValueError(f"episode {dialog.dialog_id} has no reward trace")
        for turn, returns in zip(dialog.turns, dialog.reward_trace.returns):
            positions = turn.ds_trace.policy_positions(scheme)
            if len(positions) != len(returns):
                raise ValueError(f"turn {turn.index}: {len(positions)} policy tokens but {len(returns)} returns")
            weights = [u - baseline for u in returns] if baseline is not None else list(returns)
            if not any(weights):
                continue
            sequences.append(turn.ds_trace.training_sequence(positions, weights))
    return sequences


def policy_gradient_step(
    ds: DSAgent,
    optimizer: AdamW,
    episodes: Sequence[Dialog],
    scheme: str,
    baseline: Optional[float] = None,
    max_grad_norm: Optional[float] = 1.0,
) -> Dict[str, float]:
    """Ascend sum_t sum_i U_{i,t} log p(c_i), averaged over episodes."""
    if not episodes:
        raise ValueError("policy_gradient_step needs at least one episode")
    sequences = policy_sequences(episodes, scheme, baseline)
    optimizer.zero_grad()
    chunks = [sequences[i:i + SEQUENCES_PER_FORWARD] for i in range(0, len(sequences), SEQUENCES_PER_FORWARD)]
    loss = accumulate_gradients(ds.model, chunks, 1.0 / len(episodes))
    check_finite(loss, ds.model, "policy-gradient step")
    norm = clip_grad_norm(ds.model.parameters(), max_grad_norm)
    lr = optimizer.step()
    if not ds.model.all_finite():
        raise NaNLossError("parameters became non-finite after a policy-gradient step", {"loss": loss})
    return {"loss": loss, "grad_norm": norm, "lr": lr, "policy_tokens": float(sum(s.num_targets for s in sequences))}


@dataclass
class RLResult:
    baseline_success: float
    best_update: int = 0
    best_success: float = 0.0
    updates_done: int = 0
    diverged: bool = False
    evaluations: List[Dict[str, float]] = field(default_factory=list)

    def to_dict(self):
        return {
            "baseline_success": self.baseline_success, "best_update": self.best_update,
            "best_success": self.best_success, "updates_done": self.updates_done,
            "diverged": self.diverged, "evaluations": self.evaluations,
        }


class RLTrainer:
    """Rollout, reward, update loop with periodic evaluation against the training user.

    The parameters of the best evaluation (the supervised start counts as update 0)
    are restored at the end. Training stops with ``TrainingDivergedError`` when
    success stays below ``(1 - divergence_drop)`` of the starting success for
    ``divergence_patience`` consecutive evaluations.
    """

    def __init__(
        self,
        ds: DSAgent,
        us: UserSimulator,
        world: WorldRepository,
        config: RLConfig,
        goal_config: Optional[GoalConfig] = None,
        monitor: Optional[TrainingMonitor] = None,
        episode_log: Optional[Path] = None,
        progress: bool = True,
        evaluate: Optional[Callable[[], EvalReport]] = None,
    ):
        self.ds = ds
        self.us = us
        self.world = world
        self.config = config
        self.goals = GoalGeneratorService(world, goal_config)
        self.goal_config = goal_config
        self.monitor = monitor or TrainingMonitor(f"rl_{us.name}")
        self.episode_log = CorpusRepository(episode_log) if episode_log is not None else None
        self.progress = progress
        self._evaluate = evaluate

    @property
    def episodes_per_update(self) -> int:
        return self.config.episodes_per_update * self.config.grad_accum

    def rollout(self, update: int) -> List[Dialog]:
        cfg = self.config
        goals = self.goals.generate_goals(self.episodes_per_update, np.random.default_rng([cfg.seed, update]))
        episodes = []
        for i, goal in enumerate(goals):
            rng = np.random.default_rng([cfg.seed, update, i])
            dialog = run_episode(self.ds, self.us, goal, rng, cfg.max_turns, f"rl-{update:04d}-{i:03d}")
            dialog.reward_trace = reward_trace(dialog, self.world, cfg.reward_setting, cfg.policy_scheme, cfg.gamma)
            episodes.append(dialog)
        return episodes

    def evaluate(self) -> EvalReport:
        if self._evaluate is not None:
            return self._evaluate()
        return interaction_eval(
            self.ds, self.us, self.world, n_goals=self.config.eval_goals, seed=self.config.seed,
            goal_config=self.goal_config, max_turns=self.config.max_turns, name=f"{self.ds.name}/{self.us.name}",
        )

    def _dump_episodes(self, episodes: Sequence[Dialog], update: int) -> Optional[Path]:
        if self.episode_log is None:
            return None
        path = self.episode_log.path.with_name(f"{self.episode_log.path.stem}_nan_{update:04d}.jsonl")
        CorpusRepository(path).write_corpus(episodes)
        return path

    def train(self) -> RLResult:
        cfg = self.config
        start = self.evaluate()
        result = RLResult(baseline_success=start.success, best_success=start.success)
        result.evaluations.append({"update": 0, "inform": start.inform, "success": start.success})
        self.monitor.record_evaluation("rl", 0, {"inform": start.inform, "success": start.success})
        best_state = copy.deepcopy(self.ds.model.state_dict())
        optimizer = AdamW(self.ds.model.parameters(), ConstantSchedule(cfg.lr), weight_decay=cfg.weight_decay)
        strikes = 0
        logger.info(
            f"RL against {self.us.name}: {cfg.updates} updates x {self.episodes_per_update} episodes, "
            f"reward {cfg.reward_setting}, scheme {cfg.policy_scheme}, start success {start.success:.3f}"
        )

        for update in tqdm(range(1, cfg.updates + 1), desc=self.monitor.name, disable=not self.progress):
            episodes = self.rollout(update)
            try:
                stats = policy_gradient_step(self.ds, optimizer, episodes, cfg.policy_scheme, cfg.constant_baseline)
            except NaNLossError as e:
                dump = self._dump_episodes(episodes, update)
                logger.error(f"Update {update} produced a non-finite loss; episodes dumped to {dump}")
                e.details["episode_dump"] = str(dump) if dump else None
                raise
            if self.episode_log is not None:
                self.episode_log.append(episodes)
            rewards = [r for d in episodes for r in d.reward_trace.rewards]
            self.monitor.record_step(StepMetrics(
                update, "rl", stats["loss"], stats["lr"], stats["grad_norm"],
                extra={
                    "mean_reward": float(np.mean(rewards)) if rewards else 0.0,
                    "mean_turns": float(np.mean([d.num_turns for d in episodes])),
                    "policy_tokens": stats["policy_tokens"],
                },
            ))
            result.updates_done = update

            if update % cfg.eval_every and update != cfg.updates:
                continue
            report = self.evaluate()
            result.evaluations.append({"update": update, "inform": report.inform, "success": report.success})
            self.monitor.record_evaluation("rl", update, {"inform": report.inform, "success": report.success})
            if report.success > result.best_success:
                result.best_success, result.best_update = report.success, update
                best_state = copy.deepcopy(self.ds.model.state_dict())

            if result.baseline_success > 0 and report.success < (1 - cfg.divergence_drop) * result.baseline_success:
                strikes += 1
                logger.warning(
                    f"Success {report.success:.3f} below {(1 - cfg.divergence_drop):.0%} of the start "
                    f"({result.baseline_success:.3f}), strike {strikes}/{cfg.divergence_patience}"
                )
            else:
                strikes = 0
            if strikes >= cfg.divergence_patience:
                result.diverged = True
                self.ds.model.load_state_dict(best_state)
                raise TrainingDivergedError(
                    f"success collapsed for {strikes} consecutive evaluations at update {update}",
                    {"result": result.to_dict()},
                )

        self.ds.model.load_state_dict(best_state)
        logger.info(f"Kept parameters of update {result.best_update} (success {result.best_success:.3f})")
        return result


def train_rl(
    ds: DSAgent,
    us: UserSimulator,
    world: WorldRepository,
    config: RLConfig,
    goal_config: Optional[GoalConfig] = None,
    monitor: Optional[TrainingMonitor] = None,
    episode_log: Optional[Path] = None,
    progress: bool = True,
) -> RLResult:
    """Train ``ds`` in place; returns the training log."""
    return RLTrainer(ds, us, world, config, goal_config, monitor, episode_log, progress).train()
