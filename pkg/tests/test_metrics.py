"""Ranking metrics against brute-force oracles."""

import numpy as np
import pytest

from marginrank import (
    expected_margin_at_k,
    margin_gains,
    ndcg_at_k,
    ndcg_swap_cost,
    rank_positions,
)


def brute_ndcg(scores, gains, k):
    """Independent NDCG: explicit stable sort, explicit dcg/idcg loop."""
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    dcg = sum(
        (2.0 ** gains[idx] - 1.0) / np.log2(2.0 + pos)
        for pos, idx in enumerate(order[:k])
    )
    ideal = sorted(gains, reverse=True)
    idcg = sum(
        (2.0 ** g - 1.0) / np.log2(2.0 + pos) for pos, g in enumerate(ideal[:k])
    )
    return 0.0 if idcg == 0 else dcg / idcg


class TestRankPositions:
    def test_descending_positions(self):
        np.testing.assert_array_equal(
            rank_positions(np.array([0.3, 2.0, -1.0])), [2, 1, 3]
        )

    def test_ties_resolve_by_original_index(self):
        np.testing.assert_array_equal(
            rank_positions(np.array([1.0, 1.0, 2.0])), [2, 3, 1]
        )

    def test_positions_are_a_permutation(self, rng):
        for _ in range(20):
            n = int(rng.integers(2, 15))
            pos = rank_positions(rng.normal(size=n))
            assert sorted(pos) == list(range(1, n + 1))


class TestNdcg:
    def test_perfect_ranking_scores_one(self):
        gains = np.array([3.0, 2.0, 0.0])
        assert ndcg_at_k(np.array([9.0, 5.0, 1.0]), gains, 3) == 1.0

    def test_hand_computed_two_items(self):
        # Reversed order: dcg = (2^0-1)/log2(2) + (2^1-1)/log2(3), idcg = 1.
        got = ndcg_at_k(np.array([1.0, 2.0]), np.array([1.0, 0.0]), 2)
        assert got == pytest.approx(1.0 / np.log2(3.0))

    def test_all_zero_gains_give_zero(self):
        assert ndcg_at_k(np.array([1.0, 2.0]), np.zeros(2), 2) == 0.0

    def test_matches_brute_force(self, rng):
        for _ in range(100):
            n = int(rng.integers(2, 12))
            scores = rng.normal(size=n)
            gains = rng.integers(0, 4, size=n).astype(float)
            k = int(rng.integers(1, n + 1))
            np.testing.assert_allclose(
                ndcg_at_k(scores, gains, k),
                brute_ndcg(list(scores), list(gains), k),
                rtol=1e-12,
            )

    def test_k_beyond_n_equals_full_depth(self, rng):
        scores, gains = rng.normal(size=5), rng.integers(0, 4, size=5).astype(float)
        assert ndcg_at_k(scores, gains, 50) == ndcg_at_k(scores, gains, 5)

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            ndcg_at_k(np.array([1.0, 2.0]), np.array([1.0, 0.0]), 0)
        with pytest.raises(ValueError):
            ndcg_at_k(np.array([1.0, 2.0]), np.array([-1.0, 0.0]), 2)


class TestSwapCost:
    def test_equals_explicit_swap_difference(self, rng):
        for _ in range(50):
            n = int(rng.integers(2, 10))
            scores = rng.normal(size=n)
            gains = rng.integers(0, 4, size=n).astype(float)
            i, j = rng.choice(n, size=2, replace=False)
            swapped = scores.copy()
            swapped[i], swapped[j] = swapped[j], swapped[i]
            direct = abs(ndcg_at_k(scores, gains, n) - ndcg_at_k(swapped, gains, n))
            assert ndcg_swap_cost(int(i), int(j), scores, gains) == pytest.approx(
                direct, abs=1e-12
            )

    def test_same_gain_pair_is_free(self):
        scores = np.array([3.0, 2.0, 1.0])
        gains = np.array([2.0, 2.0, 0.0])
        assert ndcg_swap_cost(0, 1, scores, gains) == 0.0

    def test_swapping_item_with_itself_rejected(self):
        with pytest.raises(ValueError):
            ndcg_swap_cost(1, 1, np.array([1.0, 2.0]), np.array([1.0, 0.0]))


class TestExpectedMargin:
    def test_top_k_sum_with_unit_probs(self):
        scores = np.array([3.0, 2.0, 1.0])
        margins = np.array([10.0, 20.0, 30.0])
        got = expected_margin_at_k(scores, margins, np.ones(3), 2)
        assert got == 30.0

    def test_full_depth_with_unit_probs_is_total(self, rng):
        margins = rng.uniform(1, 50, size=6)
        got = expected_margin_at_k(rng.normal(size=6), margins, np.ones(6), 6)
        assert got == pytest.approx(margins.sum())

    def test_probabilities_weight_the_sum(self):
        scores = np.array([2.0, 1.0])
        got = expected_margin_at_k(scores, np.array([10.0, 40.0]), np.array([0.5, 0.25]), 2)
        assert got == pytest.approx(0.5 * 10.0 + 0.25 * 40.0)

    def test_bad_probability_rejected(self):
        with pytest.raises(ValueError):
            expected_margin_at_k(
                np.array([1.0, 2.0]), np.array([1.0, 1.0]), np.array([0.5, 1.5]), 2
            )


class TestMarginGains:
    def test_quartile_bins_on_distinct_values(self):
        np.testing.assert_array_equal(
            margin_gains(np.array([1.0, 2.0, 3.0, 4.0])), [0, 1, 2, 3]
        )

    def test_bins_are_monotone_in_margin(self, rng):
        margins = rng.uniform(1, 100, size=20)
        gains = margin_gains(margins)
        order = np.argsort(margins)
        assert np.all(np.diff(gains[order]) >= 0)

    def test_range_is_zero_to_three(self, rng):
        gains = margin_gains(rng.uniform(1, 100, size=50))
        assert gains.min() >= 0 and gains.max() <= 3

    def test_equal_margins_collapse_to_one_bin(self):
        gains = margin_gains(np.full(5, 7.0))
        assert len(set(gains.tolist())) == 1

    def test_too_small_input_rejected(self):
        with pytest.raises(ValueError):
            margin_gains(np.array([1.0]))
