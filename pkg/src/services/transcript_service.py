"""
Transcript export for human grading, and reading graded scoring sheets back.
"""
import csv
import logging
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from ..models.domain_models import Dialog, GoalState, sort_domains, sort_slots
from ..models.exceptions import EvaluationError
from .significance_service import MatchedPairsResult, matched_pairs

logger = logging.getLogger(__name__)

SCORE_COLUMNS = ["Success", "DS-Coh", "DS-Flu", "US-Coh", "US-Flu"]
SCORE_RANGE = (0, 2)


class TranscriptMode(str, Enum):
    LEXICALIZED = "lexicalized"
    DELEXICALIZED = "delexicalized"


def describe_goal(goal: GoalState) -> str:
    """One-line goal header, domains in canonical order."""
    parts = []
    for domain in sort_domains(goal.domains):
        domain_goal = goal.domains[domain]
        if domain_goal.is_empty():
            continue
        fields = []
        if domain_goal.inform:
            fields.append("inform " + ", ".join(f"{s}={domain_goal.inform[s]}" for s in sort_slots(domain_goal.inform)))
        if domain_goal.book:
            fields.append("book " + ", ".join(f"{s}={domain_goal.book[s]}" for s in sort_slots(domain_goal.book)))
        if domain_goal.requests:
            fields.append("request " + ", ".join(sort_slots(domain_goal.requests)))
        parts.append(f"{domain}: " + "; ".join(fields))
    return " | ".join(parts) if parts else "(empty)"


def format_transcript(dialog: Dialog, mode: str = TranscriptMode.LEXICALIZED.value) -> str:
    mode = TranscriptMode(mode)
    lines = [f"=== {dialog.dialog_id} ===", f"goal: {describe_goal(dialog.initial_goal)}"]
    if dialog.goal_changes:
        changes = ", ".join(f"{e.domain}.{e.slot} {e.old_value}->{e.new_value} (turn {e.turn})" for e in dialog.goal_changes)
        lines.append(f"goal changes: {changes}")
    for turn in dialog.turns:
        response = turn.sys_response_lex if mode == TranscriptMode.LEXICALIZED and turn.sys_response_lex else turn.sys_response
        lines.append(f"user_{turn.index}: {turn.user_utterance}")
        lines.append(f"resp_{turn.index}: {response}")
    lines.append(f"end: {dialog.termination_reason}")
    return "\n".join(lines) + "\n"


def export_transcripts(
    dialogs: Sequence[Dialog],
    out_dir: Path,
    mode: str = TranscriptMode.LEXICALIZED.value,
    with_scoring_sheet: bool = True,
    name: str = "transcripts",
) -> List[Path]:
    """Write ``<name>.txt`` and, optionally, a blank ``<name>_scores.csv``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    transcript_path = out_dir / f"{name}.txt"
    transcript_path.write_text("\n".join(format_transcript(d, mode) for d in dialogs), encoding="utf-8")
    written = [transcript_path]
    if with_scoring_sheet:
        sheet_path = out_dir / f"{name}_scores.csv"
        with sheet_path.open("w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(["dialog_id"] + SCORE_COLUMNS)
            for dialog in dialogs:
                writer.writerow([dialog.dialog_id] + [""] * len(SCORE_COLUMNS))
        written.append(sheet_path)
    logger.info(f"Exported {len(dialogs)} transcripts to {out_dir}")
    return written


def read_scoring_sheet(path: Path) -> Dict[str, Dict[str, Optional[float]]]:
    """dialog_id -> metric -> score (None when left blank)."""
    scores: Dict[str, Dict[str, Optional[float]]] = {}
    with Path(path).open(newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        missing = [c for c in ["dialog_id"] + SCORE_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise EvaluationError(f"scoring sheet {path} lacks columns {missing}", {"path": str(path)})
        for line_number, row in enumerate(reader, start=2):
            parsed: Dict[str, Optional[float]] = {}
            for column in SCORE_COLUMNS:
                raw = (row.get(column) or "").strip()
                if not raw:
                    parsed[column] = None
                    continue
                value = float(raw)
                if not SCORE_RANGE[0] <= value <= SCORE_RANGE[1]:
                    raise EvaluationError(
                        f"{path}:{line_number}: {column} score {value} outside {SCORE_RANGE}",
                        {"path": str(path), "line": line_number},
                    )
                parsed[column] = value
            scores[row["dialog_id"]] = parsed
    return scores


def compare_scoring_sheets(
    sheet_a: Dict[str, Dict[str, Optional[float]]],
    sheet_b: Dict[str, Dict[str, Optional[float]]],
) -> Dict[str, MatchedPairsResult]:
    """Matched-pairs test per metric over dialogs graded in both sheets."""
    results = {}
    shared = sorted(set(sheet_a) & set(sheet_b))
    for column in SCORE_COLUMNS:
        pairs: List[Tuple[float, float]] = [
            (sheet_a[d][column], sheet_b[d][column])
            for d in shared
            if sheet_a[d][column] is not None and sheet_b[d][column] is not None
        ]
        if len(pairs) < 2:
            logger.warning(f"Skipping {column}: only {len(pairs)} dialogs graded in both sheets")
            continue
        results[column] = matched_pairs([a for a, _ in pairs], [b for _, b in pairs])
    return results
