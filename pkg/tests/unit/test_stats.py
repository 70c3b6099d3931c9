"""
Unit tests for the paired t-test.
"""

import math

import numpy as np
import pytest
from scipy import stats as scipy_stats

from src.errors import EvaluationError
from src.evaluation.stats import paired_ttest


class TestPairedTTest:
    """Tests for paired_ttest."""

    def test_matches_scipy(self):
        rng = np.random.default_rng(0)
        a = rng.random(30)
        b = a - 0.05 + rng.normal(0, 0.1, 30)
        result = paired_ttest(a, b)
        expected = scipy_stats.ttest_rel(a, b)
        assert result.t == pytest.approx(expected.statistic)
        assert result.p == pytest.approx(expected.pvalue)
        assert result.n == 30

    def test_five_pair_fixture(self):
        # d = 1..5: mean 3, sd sqrt(2.5), so t = 3 * sqrt(2) on 4 df.
        # For 4 df, P(|T| > t) = 1 - 36 / (11 * sqrt(11)) when t^2 = 18.
        result = paired_ttest([3, 5, 7, 9, 11], [2, 3, 4, 5, 6])
        assert result.t == pytest.approx(3 * math.sqrt(2), abs=1e-6)
        assert result.t == pytest.approx(4.242641, abs=1e-6)
        assert result.p == pytest.approx(1 - 36 / (11 * math.sqrt(11)), abs=1e-6)
        assert result.p == pytest.approx(0.013236, abs=1e-6)
        assert result.mean_difference == pytest.approx(3.0)
        assert result.n == 5
        assert result.significant

    def test_identical(self):
        result = paired_ttest([0.1, 0.5, 0.9], [0.1, 0.5, 0.9])
        assert (result.t, result.p) == (0.0, 1.0)
        assert not result.significant

    def test_constant_difference(self):
        result = paired_ttest([1.0, 2.0, 3.0], [0.5, 1.5, 2.5])
        assert math.isinf(result.t) and result.t > 0
        assert result.p == 0.0
        assert result.degenerate
        assert result.to_dict()["significant"]

    def test_length_mismatch(self):
        with pytest.raises(EvaluationError, match="length"):
            paired_ttest([1, 2, 3], [1, 2])

    def test_too_few_pairs(self):
        with pytest.raises(EvaluationError):
            paired_ttest([1.0], [0.0])
