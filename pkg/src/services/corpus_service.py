"""
Synthetic corpus generation: a scripted wizard talking to the agenda-based user.
"""
import logging
from typing import List, Optional

import numpy as np
from tqdm import tqdm

from ..models.config_models import GoalConfig
from ..models.domain_models import Dialog, GoalState
from ..repositories.world_repository import WorldRepository
from .abus_service import AbusUserSimulator
from .goal_generator_service import GoalGeneratorService
from .goal_tracking_service import annotate_goal_states, replay_goal_states
from .interaction_service import run_episode
from .template_service import TemplateService
from .wizard_service import WizardDialogSystem

logger = logging.getLogger(__name__)


def dialog_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream per dialog so any single dialog can be regenerated alone."""
    return np.random.default_rng([seed, index])


class CorpusService:
    """Generates annotated dialogs and checks their goal-state consistency."""

    def __init__(
        self,
        world: WorldRepository,
        templates: TemplateService,
        goal_config: Optional[GoalConfig] = None,
        max_turns: int = 20,
        max_pops: Optional[int] = None,
        semantic: bool = False,
    ):
        self.world = world
        self.templates = templates
        self.goal_generator = GoalGeneratorService(world, goal_config)
        self.max_turns = max_turns
        self.wizard = WizardDialogSystem(world, templates)
        self.user = AbusUserSimulator(world.ontology, templates, semantic=semantic, max_pops=max_pops)

    def generate_dialog(self, seed: int, index: int, prefix: str = "dlg") -> Dialog:
        rng = dialog_rng(seed, index)
        goal = self.goal_generator.generate_goal(rng)
        return run_episode(self.wizard, self.user, goal, rng, self.max_turns, f"{prefix}-{index:05d}")

    def generate_corpus(self, n_dialogs: int, seed: int = 0, prefix: str = "dlg", progress: bool = False) -> List[Dialog]:
        if n_dialogs < 0:
            raise ValueError(f"n_dialogs must be non-negative, got {n_dialogs}")
        logger.info(f"Generating {n_dialogs} dialogs with seed {seed}")
        dialogs = [
            self.generate_dialog(seed, i, prefix)
            for i in tqdm(range(n_dialogs), desc="corpus", disable=not progress)
        ]
        reasons = {}
        for dialog in dialogs:
            reasons[dialog.termination_reason] = reasons.get(dialog.termination_reason, 0) + 1
        logger.info(f"Generated {len(dialogs)} dialogs; termination reasons {reasons}")
        return dialogs


def replay_final_state(dialog: Dialog) -> GoalState:
    """Annotate goal states from the user acts and replay the update rule forward.

    The closing update reads the last system act as the user belief.
    """
    user_acts = [turn.user_act for turn in dialog.turns]
    states = annotate_goal_states(user_acts)
    if not states:
        return GoalState()
    beliefs = [turn.user_belief for turn in dialog.turns]
    replayed = replay_goal_states(states[0], user_acts, beliefs, closing_belief=dialog.turns[-1].sys_act)
    return replayed[-1]


def annotated_initial_goal(dialog: Dialog) -> GoalState:
    states = annotate_goal_states([turn.user_act for turn in dialog.turns])
    return states[0] if states else GoalState()
