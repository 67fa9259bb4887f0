"""
Inform/Success judging, interaction and corpus evaluation, and the cross-model matrix.
"""
import csv
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Set, Tuple

import numpy as np
from tqdm import tqdm

from ..agents.base import DialogSystem, UserSimulator
from ..agents.ds_agent import DSAgent
from ..models.config_models import GoalConfig
from ..models.domain_models import BeliefState, Dialog, UserGoal
from ..models.world_models import Entity
from ..repositories.world_repository import WorldRepository
from .bleu_scorer import corpus_bleu
from .corpus_service import dialog_rng
from .goal_generator_service import GoalGeneratorService
from .interaction_service import run_episode
from .lexicalization_service import LexicalizationService

logger = logging.getLogger(__name__)


# ============================================================================
# Judging
# ============================================================================

@dataclass
class DialogVerdict:
    """Inform/Success of one dialog plus what the verdict was based on."""
    dialog_id: str
    inform: bool
    success: bool
    vacuous: bool = False
    offered: Dict[str, Optional[str]] = field(default_factory=dict)
    provided: Dict[str, List[str]] = field(default_factory=dict)
    num_turns: int = 0
    termination_reason: str = ""

    def to_dict(self):
        return {
            "dialog_id": self.dialog_id, "inform": self.inform, "success": self.success,
            "vacuous": self.vacuous, "offered": self.offered, "provided": self.provided,
            "num_turns": self.num_turns, "termination_reason": self.termination_reason,
        }


def offered_entities(dialog: Dialog, world: WorldRepository) -> Dict[str, Optional[Entity]]:
    """Last entity offered per domain.

    A turn offers in a domain when its act informs the domain key, or when the
    response of the act's first task domain carries the key placeholder. The
    entity is the turn's selected DB match (None when the DS had no result).
    """
    offers: Dict[str, Optional[Entity]] = {}
    for turn in dialog.turns:
        domains = turn.sys_act.task_domains
        for domain in domains:
            if not world.ontology.has_domain(domain):
                continue
            key = world.ontology.schema(domain).key
            by_act = turn.sys_act.has(domain, "inform", key)
            by_text = domain == domains[0] and f"[value_{key}]" in turn.sys_response
            if by_act or by_text:
                result = turn.db.get(domain)
                offers[domain] = result.selected if result is not None else None
    return offers


def provided_slots(dialog: Dialog) -> Dict[str, Set[str]]:
    """Slots the system informed per domain, from acts and response placeholders."""
    provided: Dict[str, Set[str]] = {}
    for turn in dialog.turns:
        for item in turn.sys_act.filter("inform"):
            provided.setdefault(item.domain, set()).add(item.slot)
        domains = turn.sys_act.task_domains
        if domains:
            provided.setdefault(domains[0], set()).update(LexicalizationService.placeholders(turn.sys_response))
    return provided


def judge_dialog(dialog: Dialog, world: WorldRepository, goal: Optional[UserGoal] = None) -> DialogVerdict:
    """Inform: every pursued goal domain got an offer that satisfies its final constraints.
    Success: inform, no abandoned domain, and every requested slot provided.
    """
    goal = goal or dialog.goal
    domains = [d for d in goal.domains if not goal.domain(d).is_empty()]
    active = [d for d in domains if d not in goal.abandoned_domains]
    offers = offered_entities(dialog, world)
    provided = provided_slots(dialog)

    inform = True
    for domain in active:
        entity = offers.get(domain)
        if entity is None:
            inform = False
            break
        matches = world.query_db(domain, goal.domain(domain).inform).matches
        if entity.name not in {m.name for m in matches}:
            inform = False
            break

    requests_met = all(set(goal.domain(d).requests) <= provided.get(d, set()) for d in domains)
    success = inform and len(active) == len(domains) and requests_met
    return DialogVerdict(
        dialog_id=dialog.dialog_id,
        inform=inform,
        success=success,
        vacuous=not active,
        offered={d: (e.name if e is not None else None) for d, e in offers.items()},
        provided={d: sorted(s) for d, s in sorted(provided.items())},
        num_turns=dialog.num_turns,
        termination_reason=dialog.termination_reason,
    )


def combined_score(inform: float, success: float, bleu: float) -> float:
    """0.5 * (inform% + success%) + BLEU, rates given in [0, 1]."""
    return 0.5 * (100.0 * inform + 100.0 * success) + bleu


# ============================================================================
# Reports
# ============================================================================

@dataclass
class EvalReport:
    name: str
    inform: float
    success: float
    n_episodes: int
    seed: int
    bleu: Optional[float] = None
    combined: Optional[float] = None
    vacuous_informs: int = 0
    avg_turns: float = 0.0
    verdicts: List[DialogVerdict] = field(default_factory=list)
    dialogs: List[Dialog] = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self):
        for rate in (self.inform, self.success):
            if not 0.0 <= rate <= 1.0:
                raise ValueError(f"rates must lie in [0, 1], got {rate}")

    @classmethod
    def from_verdicts(
        cls,
        name: str,
        verdicts: Sequence[DialogVerdict],
        seed: int,
        bleu: Optional[float] = None,
        dialogs: Sequence[Dialog] = (),
    ) -> "EvalReport":
        n = len(verdicts)
        inform = sum(v.inform for v in verdicts) / n if n else 0.0
        success = sum(v.success for v in verdicts) / n if n else 0.0
        return cls(
            name=name,
            inform=inform,
            success=success,
            n_episodes=n,
            seed=seed,
            bleu=bleu,
            combined=combined_score(inform, success, bleu) if bleu is not None else None,
            vacuous_informs=sum(v.vacuous for v in verdicts),
            avg_turns=sum(v.num_turns for v in verdicts) / n if n else 0.0,
            verdicts=list(verdicts),
            dialogs=list(dialogs),
        )

    def summary(self) -> Dict[str, object]:
        row = {
            "name": self.name, "inform": round(self.inform, 6), "success": round(self.success, 6),
            "episodes": self.n_episodes, "seed": self.seed, "vacuous_informs": self.vacuous_informs,
            "avg_turns": round(self.avg_turns, 4),
        }
        if self.bleu is not None:
            row["bleu"] = round(self.bleu, 4)
            row["combined"] = round(self.combined, 4)
        return row

    def to_dict(self) -> Dict[str, object]:
        data = self.summary()
        data["verdicts"] = [v.to_dict() for v in self.verdicts]
        return data


# ============================================================================
# Interaction and corpus evaluation
# ============================================================================

def evaluation_goals(
    world: WorldRepository, n_goals: int, seed: int, goal_config: Optional[GoalConfig] = None
) -> List[UserGoal]:
    """The shared goal list every (DS, US) pair is tested on for this seed."""
    if n_goals < 1:
        raise ValueError(f"n_goals must be positive, got {n_goals}")
    return GoalGeneratorService(world, goal_config).generate_goals(n_goals, np.random.default_rng(seed))


def interaction_eval(
    ds: DialogSystem,
    us: UserSimulator,
    world: WorldRepository,
    n_goals: Optional[int] = None,
    seed: int = 0,
    goals: Optional[Sequence[UserGoal]] = None,
    goal_config: Optional[GoalConfig] = None,
    max_turns: int = 20,
    name: Optional[str] = None,
    progress: bool = False,
    keep_dialogs: bool = False,
) -> EvalReport:
    """Roll one episode per goal and aggregate the verdicts."""
    if goals is None:
        goals = evaluation_goals(world, n_goals or 1, seed, goal_config)
    name = name or f"{ds.name}/{us.name}"
    verdicts, dialogs = [], []
    for i, goal in enumerate(tqdm(goals, desc=name, disable=not progress)):
        dialog = run_episode(ds, us, goal, dialog_rng(seed, i), max_turns, f"eval-{i:05d}")
        verdicts.append(judge_dialog(dialog, world))
        if keep_dialogs:
            dialogs.append(dialog)
    report = EvalReport.from_verdicts(name, verdicts, seed, dialogs=dialogs)
    logger.info(f"Interaction eval {name}: inform {report.inform:.3f}, success {report.success:.3f} over {report.n_episodes} goals")
    return report


def corpus_eval(
    ds: DSAgent,
    dialogs: Sequence[Dialog],
    world: WorldRepository,
    seed: int = 0,
    name: Optional[str] = None,
    progress: bool = False,
) -> EvalReport:
    """Per turn the DS reads the gold previous belief, response and user utterance.

    Generated beliefs, acts and responses replace the gold system side for judging;
    BLEU compares generated and gold delexicalized responses.
    """
    name = name or f"{ds.name}/corpus"
    verdicts, generated_dialogs = [], []
    hypotheses, references = [], []
    for i, dialog in enumerate(tqdm(dialogs, desc=name, disable=not progress)):
        rng = dialog_rng(seed, i)
        previous = None
        turns = []
        for turn in dialog.turns:
            b_prev = previous.sys_belief if previous else BeliefState()
            r_prev = previous.sys_response if previous else ""
            out = ds.ds_turn(b_prev, r_prev, turn.user_utterance, rng)
            turns.append(replace(
                turn, sys_belief=out.belief, db=out.db, sys_act=out.act,
                sys_response=out.response, sys_response_lex="", goal_changes=list(turn.goal_changes),
            ))
            hypotheses.append(out.response)
            references.append(turn.sys_response)
            previous = turn
        generated = Dialog(
            dialog_id=dialog.dialog_id, goal=dialog.goal.copy(), turns=turns,
            termination_reason=dialog.termination_reason, initial_goal=dialog.initial_goal.copy(),
        )
        verdicts.append(judge_dialog(generated, world))
        generated_dialogs.append(generated)
    bleu = corpus_bleu(hypotheses, references) if hypotheses else 0.0
    report = EvalReport.from_verdicts(name, verdicts, seed, bleu=bleu, dialogs=generated_dialogs)
    logger.info(
        f"Corpus eval {name}: inform {report.inform:.3f}, success {report.success:.3f}, "
        f"BLEU {bleu:.2f}, combined {report.combined:.2f}"
    )
    return report


# ============================================================================
# Cross-model matrix
# ============================================================================

@dataclass
class CrossModelMatrix:
    """Rows are dialog systems, columns are user simulators."""
    ds_names: List[str]
    us_names: List[str]
    reports: Dict[Tuple[str, str], EvalReport]
    seed: int = 0
    extra_rows: List[Tuple[str, Dict[str, Tuple[float, float]]]] = field(default_factory=list)

    def cell(self, ds_name: str, us_name: str) -> EvalReport:
        return self.reports[(ds_name, us_name)]

    def rows(self) -> List[Tuple[str, Dict[str, Tuple[float, float]]]]:
        """(row label, {us: (inform, success)}) including aggregate rows."""
        base = [
            (ds, {us: (self.cell(ds, us).inform, self.cell(ds, us).success) for us in self.us_names})
            for ds in self.ds_names
        ]
        return base + self.extra_rows

    def aggregate(self, label: str, members: Sequence[str], selection_us: str) -> None:
        """Append ``<label> best`` (highest success on ``selection_us``) and ``<label> avg`` rows."""
        if not members:
            return
        best = max(members, key=lambda ds: (self.cell(ds, selection_us).success, -members.index(ds)))
        self.extra_rows.append((f"{label} best", {
            us: (self.cell(best, us).inform, self.cell(best, us).success) for us in self.us_names
        }))
        self.extra_rows.append((f"{label} avg", {
            us: (
                float(np.mean([self.cell(ds, us).inform for ds in members])),
                float(np.mean([self.cell(ds, us).success for ds in members])),
            )
            for us in self.us_names
        }))

    def write_csv(self, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            header = ["ds"]
            for us in self.us_names:
                header += [f"{us}_inform", f"{us}_success"]
            writer.writerow(header)
            for label, cells in self.rows():
                row = [label]
                for us in self.us_names:
                    inform, success = cells[us]
                    row += [f"{100 * inform:.2f}", f"{100 * success:.2f}"]
                writer.writerow(row)
        return path

    def format_text(self) -> str:
        width = max([len(label) for label, _ in self.rows()] + [4])
        header = " " * width + "".join(f" | {us:^17}" for us in self.us_names)
        sub = " " * width + "".join(f" | {'Inform':>8} {'Succ.':>8}" for _ in self.us_names)
        lines = [header, sub, "-" * len(sub)]
        for label, cells in self.rows():
            line = f"{label:<{width}}"
            for us in self.us_names:
                inform, success = cells[us]
                line += f" | {100 * inform:8.2f} {100 * success:8.2f}"
            lines.append(line)
        return "\n".join(lines) + "\n"


def cross_model_eval(
    systems: Sequence[Tuple[str, DialogSystem]],
    users: Sequence[Tuple[str, UserSimulator]],
    world: WorldRepository,
    n_goals: int,
    seed: int = 0,
    goal_config: Optional[GoalConfig] = None,
    max_turns: int = 20,
    progress: bool = False,
) -> CrossModelMatrix:
    """Every DS against every US on one shared goal list."""
    goals = evaluation_goals(world, n_goals, seed, goal_config)
    reports = {}
    for ds_name, ds in systems:
        for us_name, us in users:
            reports[(ds_name, us_name)] = interaction_eval(
                ds, us, world, seed=seed, goals=goals, max_turns=max_turns,
                name=f"{ds_name}/{us_name}", progress=progress,
            )
    return CrossModelMatrix([n for n, _ in systems], [n for n, _ in users], reports, seed)
