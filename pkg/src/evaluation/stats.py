"""
Paired t-test for comparing two runs query by query.
"""

from dataclasses import dataclass
from typing import Dict, Sequence

import numpy as np
from scipy import stats as scipy_stats

from ..errors import EvaluationError

SIGNIFICANCE_LEVEL = 0.05


@dataclass
class TTestResult:
    t: float
    p: float
    n: int
    mean_difference: float
    degenerate: bool = False

    @property
    def significant(self) -> bool:
        return self.p < SIGNIFICANCE_LEVEL

    def to_dict(self) -> Dict:
        return {
            "t": self.t,
            "p": self.p,
            "n": self.n,
            "mean_difference": self.mean_difference,
            "degenerate": self.degenerate,
            "significant": self.significant,
        }


def paired_ttest(a: Sequence[float], b: Sequence[float]) -> TTestResult:
    """
    Two-sided paired t-test on ``a - b``.

    Identical inputs give t = 0, p = 1. Differences with zero variance and a
    non-zero mean give t = +/-inf and the p = 0 sentinel with ``degenerate``
    set.

    Raises
    ------
    EvaluationError
        Length mismatch or fewer than two pairs
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise EvaluationError(f"paired samples differ in length: {a.size} vs {b.size}")
    n = a.size
    if n < 2:
        raise EvaluationError("paired t-test needs at least 2 pairs")

    diff = a - b
    mean = float(diff.mean())
    sd = float(diff.std(ddof=1))
    if sd == 0.0:
        if mean == 0.0:
            return TTestResult(0.0, 1.0, n, 0.0)
        return TTestResult(float(np.copysign(np.inf, mean)), 0.0, n, mean, degenerate=True)

    t = mean / (sd / np.sqrt(n))
    p = 2.0 * scipy_stats.t.sf(abs(t), df=n - 1)
    return TTestResult(float(t), float(min(1.0, p)), n, mean)
