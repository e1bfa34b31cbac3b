"""Exact and smoothed Kendall tau rank correlation.

Both the exact pairwise order map and its sigmoid-smoothed counterpart
embed a score vector of length n into R^{n(n-1)/2}, one entry per item
pair (i, j) with i < j in lexicographic order, scaled by
1/sqrt(n(n-1)/2).  The exact entry is the sign of the score difference
(0 on ties); the smooth entry replaces the sign with

    sigmoid(u_i - u_j) - sigmoid(u_j - u_i) = tanh(sharpness * (u_i - u_j) / 2)

where sigmoid(x) = 1 / (1 + exp(-sharpness * x)).  The inner product of
two exact maps is exactly the Kendall tau correlation; pairing an exact
map (reference side) with a smooth map (learnable side) gives a similarity
that is differentiable in the second argument and approaches Kendall tau
as the sharpness grows.

Every function here is O(n^2); item lists per query are small, so no
O(n log n) variant is provided.
"""

from __future__ import annotations

import numpy as np


def pair_count(n: int) -> int:
    return n * (n - 1) // 2


def _check_pair(u: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError(f"score vectors differ in length: {u.shape} vs {v.shape}")
    if len(u) < 2:
        raise ValueError("need at least two items")
    return u, v


def _check_sharpness(sharpness: float) -> float:
    if not sharpness > 0:
        raise ValueError(f"sharpness must be > 0 (got {sharpness!r})")
    return float(sharpness)


def kendall_tau(u: np.ndarray, v: np.ndarray) -> float:
    """Kendall tau correlation between the rankings induced by u and v.

    (n_c - n_d) / (n(n-1)/2), where n_c and n_d count concordant and
    discordant pairs; pairs tied in either vector count toward neither.
    The denominator is always the full pair count, so heavy ties shrink
    the magnitude rather than rescaling it.
    """
    u, v = _check_pair(u, v)
    su = np.sign(u[:, None] - u[None, :])
    sv = np.sign(v[:, None] - v[None, :])
    # Each unordered pair appears twice in the full matrix product.
    total = float(np.sum(su * sv)) / 2.0
    return total / pair_count(len(u))


def pair_order_features(u: np.ndarray) -> np.ndarray:
    """Exact pairwise order map of a score vector.

    Entry (i, j), i < j, is sign(u_i - u_j) / sqrt(n(n-1)/2): positive when
    item i outranks item j, zero when tied.
    """
    u = np.asarray(u, dtype=np.float64)
    if len(u) < 2:
        raise ValueError("need at least two items")
    i, j = np.triu_indices(len(u), k=1)
    return np.sign(u[i] - u[j]) / np.sqrt(pair_count(len(u)))


def pair_order_features_smooth(u: np.ndarray, sharpness: float) -> np.ndarray:
    """Sigmoid-smoothed pairwise order map, differentiable in the scores.

    Entries lie strictly inside (-1, 1) / sqrt(n(n-1)/2) and approach the
    exact map as sharpness -> infinity on distinct scores.
    """
    u = np.asarray(u, dtype=np.float64)
    if len(u) < 2:
        raise ValueError("need at least two items")
    sharpness = _check_sharpness(sharpness)
    i, j = np.triu_indices(len(u), k=1)
    return np.tanh(0.5 * sharpness * (u[i] - u[j])) / np.sqrt(pair_count(len(u)))


def kendall_kernel(u: np.ndarray, v: np.ndarray, sharpness: float) -> float:
    """Smoothed Kendall similarity: exact map of u against smooth map of v.

    Asymmetric by construction: u is the fixed reference ranking, v the
    ranking being learned.  Always in [-1, 1].
    """
    u, v = _check_pair(u, v)
    return float(np.dot(pair_order_features(u), pair_order_features_smooth(v, sharpness)))


def kendall_kernel_grad(u: np.ndarray, v: np.ndarray, sharpness: float) -> np.ndarray:
    """Gradient of :func:`kendall_kernel` with respect to v.

    d/dv_i = (2 * sharpness / (n(n-1)/2)) * sum_{j != i}
             sign(u_i - u_j) * s'(v_i - v_j)

    with s'(x) = sigmoid(x) * (1 - sigmoid(x)); s' is even, which makes
    the components sum to zero (the kernel depends only on score
    differences, so a constant shift of v changes nothing).
    """
    u, v = _check_pair(u, v)
    sharpness = _check_sharpness(sharpness)
    sign_u = np.sign(u[:, None] - u[None, :])
    t = np.tanh(0.5 * sharpness * (v[:, None] - v[None, :]))
    sigmoid_deriv = 0.25 * (1.0 - t * t)
    return (2.0 * sharpness / pair_count(len(u))) * np.sum(sign_u * sigmoid_deriv, axis=1)
