"""Pure ranking metrics.

All functions are stateless and operate on aligned numpy vectors:

    rank_positions    1-based positions under a descending stable sort
    ndcg_at_k         DCG@k / IDCG@k with gain 2^g - 1 and log2 discounts
    ndcg_swap_cost    the exact |NDCG change| from swapping two items
    expected_margin_at_k   sum of purchase_prob * margin over the top k
    margin_gains      within-query quartile binning of margins into {0..3}

NDCG uses DCG = sum over positions rho <= k of (2^g - 1) / log2(1 + rho),
normalized by the DCG of an ideal (gain-descending) ordering.  The swap
cost is computed at full depth so that it agrees exactly with re-evaluating
NDCG after an explicit swap.
"""

from __future__ import annotations

import numpy as np


def rank_positions(scores: np.ndarray) -> np.ndarray:
    """1-based rank of each item when scores are sorted descending.

    Ties are broken by original index, ascending, so the result is always
    a permutation of 1..n.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if not np.all(np.isfinite(scores)):
        raise ValueError("scores must be finite")
    order = np.argsort(-scores, kind="stable")
    ranks = np.empty(len(scores), dtype=np.int64)
    ranks[order] = np.arange(1, len(scores) + 1)
    return ranks


def _gain(gains: np.ndarray) -> np.ndarray:
    return np.power(2.0, np.asarray(gains, dtype=np.float64)) - 1.0


def _ideal_dcg(gains: np.ndarray, k: int) -> float:
    top = np.sort(_gain(gains))[::-1][:k]
    discounts = 1.0 / np.log2(1.0 + np.arange(1, len(top) + 1))
    return float(np.dot(top, discounts))


def ndcg_at_k(scores: np.ndarray, gains: np.ndarray, k: int) -> float:
    """NDCG@k of ``scores`` against nonnegative ``gains``.

    Defined as 0.0 (rather than NaN) when every gain is zero.
    """
    gains = np.asarray(gains, dtype=np.float64)
    if k < 1:
        raise ValueError("k must be >= 1")
    if np.any(gains < 0):
        raise ValueError("gains must be >= 0")
    idcg = _ideal_dcg(gains, k)
    if idcg == 0.0:
        return 0.0
    order = np.argsort(rank_positions(scores))[:k]
    discounts = 1.0 / np.log2(1.0 + np.arange(1, len(order) + 1))
    dcg = float(np.dot(_gain(gains[order]), discounts))
    return dcg / idcg


def ndcg_swap_cost(i: int, j: int, scores: np.ndarray, gains: np.ndarray) -> float:
    """Absolute full-depth NDCG change from swapping the positions of items i and j.

    |(2^g_i - 2^g_j) * (1/log2(1+r_i) - 1/log2(1+r_j))| / IDCG, where r is
    the current rank of each item.  Symmetric in (i, j); zero when the two
    gains are equal.
    """
    if i == j:
        raise ValueError("swap cost requires i != j")
    gains = np.asarray(gains, dtype=np.float64)
    n = len(gains)
    idcg = _ideal_dcg(gains, n)
    if idcg == 0.0:
        return 0.0
    ranks = rank_positions(scores)
    disc_i = 1.0 / np.log2(1.0 + ranks[i])
    disc_j = 1.0 / np.log2(1.0 + ranks[j])
    return abs((2.0 ** gains[i] - 2.0 ** gains[j]) * (disc_i - disc_j)) / idcg


def expected_margin_at_k(
    scores: np.ndarray,
    margins: np.ndarray,
    purchase_probs: np.ndarray,
    k: int,
) -> float:
    """Expected commission from the top k ranked items.

    Sums purchase_prob * margin over the k best-ranked items under
    ``scores``; purchase probabilities must lie in [0, 1].
    """
    purchase_probs = np.asarray(purchase_probs, dtype=np.float64)
    if np.any((purchase_probs < 0) | (purchase_probs > 1)):
        raise ValueError("purchase probabilities must lie in [0, 1]")
    margins = np.asarray(margins, dtype=np.float64)
    top = np.argsort(rank_positions(scores))[:k]
    return float(np.dot(purchase_probs[top], margins[top]))


def margin_gains(margins: np.ndarray) -> np.ndarray:
    """Quartile-bin margins into graded gains {0, 1, 2, 3} within one query.

    gain_i counts how many of the three within-query quartile thresholds
    (25%, 50%, 75%) the margin reaches, so the top-margin item always gets
    gain 3.  Binning keeps the exponential NDCG gain bounded regardless of
    the currency scale of the margins.
    """
    margins = np.asarray(margins, dtype=np.float64)
    if margins.size < 2:
        raise ValueError("margin binning needs at least two items")
    thresholds = np.quantile(margins, [0.25, 0.5, 0.75])
    return (margins[:, None] >= thresholds[None, :]).sum(axis=1).astype(np.int64)
