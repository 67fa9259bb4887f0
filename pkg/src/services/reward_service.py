"""
Per-turn rewards and per-token discounted returns for policy-gradient training.

Reward settings:
    success            every turn gets 1 if the dialog is judged successful, else 0
    synthetic          0.1 per goal-requested slot informed for the first time
                       - 0.5 per system act item already emitted in an earlier turn
                       + completion proportion of the goal on the final turn
    sigmoid            logistic of the synthetic reward (also accepted as sigmoid_synthetic)
"""
import logging
import math
from typing import List, Optional, Sequence, Set, Tuple

from ..models.config_models import RewardSetting
from ..models.domain_models import Dialog, GoalState, RewardTrace, Turn, UserGoal
from ..repositories.world_repository import WorldRepository
from .evaluation_service import judge_dialog
from .goal_tracking_service import completion_proportion
from .lexicalization_service import LexicalizationService

logger = logging.getLogger(__name__)

REQUEST_REWARD = 0.1
REPEAT_PENALTY = -0.5


def sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    z = math.exp(x)
    return z / (1.0 + z)


def informed_slots(turn: Turn) -> Set[Tuple[str, str]]:
    """(domain, slot) pairs the system informs in this turn, by act or by placeholder."""
    slots = {(item.domain, item.slot) for item in turn.sys_act.filter("inform")}
    domains = turn.sys_act.task_domains
    if domains:
        slots.update((domains[0], slot) for slot in LexicalizationService.placeholders(turn.sys_response))
    return slots


def synthetic_rewards(dialog: Dialog, goal: UserGoal, final_state: Optional[GoalState] = None) -> List[float]:
    requested = {(d, s) for d in goal.domains for s in goal.domain(d).requests}
    rewarded: Set[Tuple[str, str]] = set()
    emitted: Set[Tuple[str, str, Optional[str]]] = set()
    rewards = []
    for turn in dialog.turns:
        new_slots = (informed_slots(turn) & requested) - rewarded
        rewarded |= new_slots
        items = {(item.domain, item.intent, item.slot) for item in turn.sys_act}
        repeats = len(items & emitted)
        emitted |= items
        rewards.append(REQUEST_REWARD * len(new_slots) + REPEAT_PENALTY * repeats)
    if rewards:
        if final_state is None:
            final_state = dialog.final_goal_state
        if final_state is None:
            logger.warning(f"Dialog {dialog.dialog_id} has no final goal state; completion counted as 0")
            completion = 0.0
        else:
            completion = completion_proportion(final_state, goal)
        rewards[-1] += completion
    return rewards


def compute_rewards(
    dialog: Dialog,
    world: WorldRepository,
    setting: str = RewardSetting.SUCCESS.value,
    goal: Optional[UserGoal] = None,
) -> List[float]:
    """Per-turn rewards R_1..R_T under the given setting."""
    goal = goal or dialog.goal
    setting = RewardSetting(setting)
    if setting == RewardSetting.SUCCESS:
        value = 1.0 if judge_dialog(dialog, world, goal).success else 0.0
        return [value] * dialog.num_turns
    rewards = synthetic_rewards(dialog, goal)
    if setting == RewardSetting.SIGMOID:
        return [sigmoid(r) for r in rewards]
    return rewards


def compute_returns(rewards: Sequence[float], policy_lengths: Sequence[int], gamma: float) -> List[List[float]]:
    """U_{i,t} = gamma^(|A_t| - i) * R_t for i = 1..|A_t|."""
    if len(rewards) != len(policy_lengths):
        raise ValueError(f"{len(rewards)} rewards but {len(policy_lengths)} policy lengths")
    if not 0.0 < gamma <= 1.0:
        raise ValueError(f"gamma must lie in (0, 1], got {gamma}")
    return [[gamma ** (length - i) * r for i in range(1, length + 1)] for r, length in zip(rewards, policy_lengths)]


def policy_lengths(dialog: Dialog, scheme: str) -> List[int]:
    lengths = []
    for turn in dialog.turns:
        if turn.ds_trace is None:
            raise ValueError(f"turn {turn.index} of {dialog.dialog_id} has no DS token trace")
        lengths.append(len(turn.ds_trace.policy_positions(scheme)))
    return lengths


def reward_trace(dialog: Dialog, world: WorldRepository, setting: str, scheme: str, gamma: float) -> RewardTrace:
    rewards = compute_rewards(dialog, world, setting)
    lengths = policy_lengths(dialog, scheme)
    return RewardTrace(rewards, lengths, compute_returns(rewards, lengths, gamma))
