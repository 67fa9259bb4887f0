"""
In-memory metric collection for supervised and RL training, exported as CSV curves.
"""
import csv
import logging
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

logger = logging.getLogger(__name__)


@dataclass
class StepMetrics:
    """Metrics for a single optimizer step."""
    step: int
    phase: str
    loss: float
    lr: float
    grad_norm: Optional[float] = None
    extra: Dict[str, float] = field(default_factory=dict)


@dataclass
class PhaseStats:
    """Running statistics for one training phase."""
    steps: int = 0
    total_loss: float = 0.0
    avg_loss: float = 0.0
    min_loss: float = float("inf")
    max_grad_norm: float = 0.0
    evaluations: Dict[int, Dict[str, float]] = field(default_factory=dict)


class TrainingMonitor:
    """Collects per-step and per-evaluation metrics of one training run."""

    def __init__(self, name: str):
        self.name = name
        self.history: List[StepMetrics] = []
        self.phase_stats: Dict[str, PhaseStats] = defaultdict(PhaseStats)

    def record_step(self, metrics: StepMetrics) -> None:
        self.history.append(metrics)
        stats = self.phase_stats[metrics.phase]
        stats.steps += 1
        stats.total_loss += metrics.loss
        stats.avg_loss = stats.total_loss / stats.steps
        stats.min_loss = min(stats.min_loss, metrics.loss)
        if metrics.grad_norm is not None:
            stats.max_grad_norm = max(stats.max_grad_norm, metrics.grad_norm)

    def record_evaluation(self, phase: str, step: int, values: Dict[str, float]) -> None:
        """Held-out loss per epoch, or evaluation success per RL checkpoint."""
        self.phase_stats[phase].evaluations[step] = dict(values)
        summary = ", ".join(f"{k}={v:.4f}" for k, v in sorted(values.items()))
        logger.info(f"[{self.name}] {phase} evaluation at step {step}: {summary}")

    def last(self, phase: Optional[str] = None) -> Optional[StepMetrics]:
        for metrics in reversed(self.history):
            if phase is None or metrics.phase == phase:
                return metrics
        return None

    def get_summary(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "total_steps": len(self.history),
            "phases": {
                phase: {k: v for k, v in asdict(stats).items() if k != "evaluations"}
                for phase, stats in self.phase_stats.items()
            },
        }

    def export_csv(self, path: Path) -> Path:
        """Write the step curve; extra metric columns are the union over all steps."""
        extra_keys = sorted({k for m in self.history for k in m.extra})
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(["step", "phase", "loss", "lr", "grad_norm"] + extra_keys)
            for m in self.history:
                row = [m.step, m.phase, f"{m.loss:.6f}", f"{m.lr:.8g}", "" if m.grad_norm is None else f"{m.grad_norm:.6f}"]
                row.extend(f"{m.extra[k]:.6f}" if k in m.extra else "" for k in extra_keys)
                writer.writerow(row)
        logger.info(f"Wrote {len(self.history)} metric rows to {path}")
        return path

    def export_evaluations_csv(self, path: Path) -> Path:
        keys = sorted({k for s in self.phase_stats.values() for e in s.evaluations.values() for k in e})
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(["phase", "step"] + keys)
            for phase in sorted(self.phase_stats):
                for step, values in sorted(self.phase_stats[phase].evaluations.items()):
                    writer.writerow([phase, step] + [f"{values[k]:.6f}" if k in values else "" for k in keys])
        return path
