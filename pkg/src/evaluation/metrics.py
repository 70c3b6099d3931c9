"""
Recommendation Metrics

HR@10 and NDCG@10 over simulated-user score lists, and the success rate
over query outcomes.

A score >= 1 is a hit. A 0.5 (meets the need but not the preferences) is a
miss for HR but keeps gain 0.5 in NDCG.
"""

from typing import Iterable, List, Sequence

import numpy as np

from ..errors import EvaluationError

HIT_THRESHOLD = 1.0
K = 10


def hr_at_10(score_lists: Sequence[Sequence[float]]) -> float:
    """
    Hit ratio over pooled item slots of every list.

    Parameters
    ----------
    score_lists : sequence of sequence of float
        Per-list simulated-user scores (``SimVerdict.score_lists``)

    Returns
    -------
    float
        hits / total slots, 0.0 when there are no slots
    """
    pooled = [s for scores in score_lists for s in list(scores)[:K]]
    if not pooled:
        return 0.0
    hits = sum(1 for s in pooled if s >= HIT_THRESHOLD)
    return hits / len(pooled)


def dcg(gains: Sequence[float]) -> float:
    gains = np.asarray(list(gains)[:K], dtype=float)
    if gains.size == 0:
        return 0.0
    discounts = np.log2(np.arange(2, gains.size + 2))
    return float(np.sum(gains / discounts))


def ndcg(gains: Sequence[float]) -> float:
    """NDCG of one list; 0.0 when the ideal DCG is 0."""
    ideal = dcg(sorted(gains, reverse=True))
    if ideal == 0.0:
        return 0.0
    return dcg(gains) / ideal


def ndcg_at_10(score_lists: Sequence[Sequence[float]]) -> float:
    """Mean per-list NDCG@10."""
    if not score_lists:
        return 0.0
    return float(np.mean([ndcg(scores) for scores in score_lists]))


def success_rate(successes: Iterable[bool]) -> float:
    """Fraction of successful outcomes; empty input is an error."""
    flags: List[bool] = [bool(s) for s in successes]
    if not flags:
        raise EvaluationError("success rate of an empty outcome set")
    return sum(flags) / len(flags)
