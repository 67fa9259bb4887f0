"""
Matched-pairs significance test on per-dialog scores of two systems.
"""
import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..models.exceptions import EvaluationError

logger = logging.getLogger(__name__)

P_FLOOR = float(np.finfo(float).tiny)


@dataclass
class MatchedPairsResult:
    n: int
    mean_difference: float
    std_error: float
    z: float
    p_value: float

    def to_dict(self):
        return {
            "n": self.n, "mean_difference": self.mean_difference, "std_error": self.std_error,
            "z": self.z, "p_value": self.p_value,
        }


def matched_pairs(scores_a: Sequence[float], scores_b: Sequence[float]) -> MatchedPairsResult:
    """Two-sided test of zero mean paired difference, normal approximation.

    With zero spread the p-value is 1 for a zero mean difference and the floor
    value otherwise.
    """
    if len(scores_a) != len(scores_b):
        raise EvaluationError(
            f"paired score lists differ in length: {len(scores_a)} vs {len(scores_b)}",
            {"a": len(scores_a), "b": len(scores_b)},
        )
    n = len(scores_a)
    if n < 2:
        raise EvaluationError(f"matched-pairs test needs at least 2 pairs, got {n}", {"n": n})
    diffs = np.asarray(scores_a, dtype=np.float64) - np.asarray(scores_b, dtype=np.float64)
    mean = float(diffs.mean())
    se = float(diffs.std(ddof=1) / math.sqrt(n))
    if se == 0.0:
        if mean == 0.0:
            return MatchedPairsResult(n, mean, se, 0.0, 1.0)
        return MatchedPairsResult(n, mean, se, math.copysign(math.inf, mean), P_FLOOR)
    z = mean / se
    p = max(math.erfc(abs(z) / math.sqrt(2.0)), P_FLOOR)
    return MatchedPairsResult(n, mean, se, z, min(p, 1.0))


def matched_pairs_test(scores_a: Sequence[float], scores_b: Sequence[float]) -> float:
    return matched_pairs(scores_a, scores_b).p_value
