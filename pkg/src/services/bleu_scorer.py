import logging
import math
from collections import Counter
from typing import List, Sequence

from nltk.util import ngrams

from ..models.exceptions import EvaluationError

logger = logging.getLogger(__name__)

MAX_ORDER = 4
EPSILON = 1e-9


class BLEUScorer:
    """Corpus BLEU-4 over whitespace tokens, one reference per hypothesis.

    Clipped n-gram counts and lengths are pooled over the corpus; an order with no
    clipped match gets precision ``EPSILON``. Brevity penalty uses the pooled
    reference length.
    """

    def __init__(self, max_order: int = MAX_ORDER, epsilon: float = EPSILON):
        self.max_order = max_order
        self.epsilon = epsilon

    def statistics(self, hypotheses: Sequence[str], references: Sequence[str]):
        if len(hypotheses) != len(references):
            raise EvaluationError(
                f"{len(hypotheses)} hypotheses but {len(references)} references",
                {"hypotheses": len(hypotheses), "references": len(references)},
            )
        count = [0] * self.max_order
        clip_count = [0] * self.max_order
        hyp_len = ref_len = 0
        for hyp_text, ref_text in zip(hypotheses, references):
            hyp, ref = hyp_text.split(), ref_text.split()
            hyp_len += len(hyp)
            ref_len += len(ref)
            for n in range(1, self.max_order + 1):
                hyp_counts = Counter(ngrams(hyp, n))
                ref_counts = Counter(ngrams(ref, n))
                count[n - 1] += sum(hyp_counts.values())
                clip_count[n - 1] += sum(min(c, ref_counts[g]) for g, c in hyp_counts.items())
        return count, clip_count, hyp_len, ref_len

    def score(self, hypotheses: Sequence[str], references: Sequence[str]) -> float:
        """BLEU in [0, 100]."""
        count, clip_count, c, r = self.statistics(hypotheses, references)
        if c == 0:
            return 0.0
        precisions: List[float] = [
            clip_count[i] / count[i] if clip_count[i] > 0 else self.epsilon
            for i in range(self.max_order)
        ]
        bp = 1.0 if c > r else math.exp(1 - r / c)
        log_mean = math.fsum(math.log(p) for p in precisions) / self.max_order
        return 100.0 * bp * math.exp(log_mean)


def corpus_bleu(hypotheses: Sequence[str], references: Sequence[str]) -> float:
    return BLEUScorer().score(hypotheses, references)
