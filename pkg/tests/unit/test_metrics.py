"""
Unit tests for HR@10, NDCG@10 and success rate.
"""

import itertools
import math

import pytest

from src.errors import EvaluationError
from src.evaluation.metrics import dcg, hr_at_10, ndcg, ndcg_at_10, success_rate

GAIN_LEVELS = (0, 0.5, 1, 2)
ALL_SHORT_GAIN_LISTS = [
    list(gains)
    for length in range(1, 6)
    for gains in itertools.product(GAIN_LEVELS, repeat=length)
]

GATHERING_SCORES = [
    [1, 1, 2, 1, 1, 1, 1, 1, 0.5, 0],
    [1, 1, 1, 1, 0.5, 0.5, 0, 0, 0, 0],
]


def _reference_ndcg(gains):
    """NDCG with the ideal DCG taken as the best over all orderings."""
    def _dcg(values):
        return sum(g / math.log2(p + 1) for p, g in enumerate(values, start=1))

    ideal = max(_dcg(order) for order in itertools.permutations(gains))
    return _dcg(gains) / ideal if ideal > 0 else 0.0


class TestHitRatio:
    """Tests for pooled HR@10."""

    def test_pooled_over_lists(self):
        assert hr_at_10(GATHERING_SCORES) == pytest.approx(0.6)

    def test_half_is_a_miss(self):
        assert hr_at_10([[0.5] * 10]) == 0.0

    def test_only_first_ten(self):
        assert hr_at_10([[0] * 10 + [1] * 5]) == 0.0

    def test_empty(self):
        assert hr_at_10([]) == 0.0


class TestNDCG:
    """Tests for per-list NDCG."""

    def test_ideal_order(self):
        assert ndcg([2, 1, 1, 0.5, 0]) == pytest.approx(1.0)

    def test_swapped(self):
        assert ndcg([0, 1]) == pytest.approx(1 / 1.5849625007, rel=1e-6)

    def test_all_zero(self):
        assert ndcg([0] * 10) == 0.0

    def test_dcg(self):
        assert dcg([1, 1]) == pytest.approx(1 + 1 / 1.5849625007, rel=1e-6)

    def test_mean_over_lists(self):
        assert ndcg_at_10([[1, 0], [0, 1]]) == pytest.approx((1 + 1 / 1.5849625007) / 2, rel=1e-6)
        assert ndcg_at_10([]) == 0.0

    def test_second_relevant_item_at_position_three(self):
        gains = [2, 0, 1] + [0] * 7
        expected = 2.5 / (2 + 1 / math.log2(3))
        assert ndcg_at_10([gains]) == pytest.approx(expected, abs=1e-12)
        assert ndcg_at_10([gains]) == pytest.approx(0.9502, abs=5e-5)
        assert hr_at_10([gains]) == pytest.approx(0.2)

    @pytest.mark.parametrize("gains", ALL_SHORT_GAIN_LISTS, ids=str)
    def test_matches_reference(self, gains):
        assert ndcg_at_10([gains]) == pytest.approx(_reference_ndcg(gains), abs=1e-12)
        assert 0.0 <= ndcg_at_10([gains]) <= 1.0


class TestSuccessRate:
    """Tests for success rate."""

    def test_fraction(self):
        assert success_rate([True, False, True]) == pytest.approx(2 / 3)

    def test_empty(self):
        with pytest.raises(EvaluationError):
            success_rate([])
