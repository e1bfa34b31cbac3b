"""Training of the margin-weight model by pairwise gradient descent.

The objective per session is

    margin_rank_loss(adjusted scores) + gamma * (1 - kendall_kernel(orig, adjusted))

i.e. a pairwise logistic surrogate that pushes high-margin items toward the
top, plus a closeness regularizer that anchors the new ranking to the
original one.  The surrogate weighs every ordered margin pair by the exact
NDCG cost of swapping the two items, following the standard lambda-gradient
construction: the swap cost is treated as locally constant, so the analytic
gradient matches finite differences of the loss away from rank boundaries.

Optimization is plain full-batch gradient descent with a fixed learning
rate, the gradient averaged over sessions in list order; given identical
inputs it is bitwise deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import QuerySession
from .kendall import kendall_kernel, kendall_kernel_grad, pair_count
from .metrics import margin_gains, rank_positions
from .parallel import map_ordered
from .rerank import (
    MarginWeightModel,
    RerankConfig,
    adjust_scores,
    apply_link,
    link_derivative,
    model_inputs,
)


@dataclass(frozen=True)
class LossBreakdown:
    rank_loss: float
    regularizer: float

    @property
    def total(self) -> float:
        return self.rank_loss + self.regularizer


@dataclass(frozen=True)
class TrainTrace:
    """Per-epoch loss components; row e is the state entering epoch e.

    ``mean_tau`` is the exact Kendall tau between original and adjusted
    scores, averaged over sessions: the audit trail for how far training
    has drifted from the original ranking.
    """

    rank_loss: np.ndarray
    regularizer: np.ndarray
    total: np.ndarray
    mean_tau: np.ndarray

    def __len__(self) -> int:
        return len(self.total)


class TrainingDiverged(RuntimeError):
    """Total loss became non-finite; carries the last finite trace."""

    def __init__(self, epoch: int, trace: TrainTrace):
        super().__init__(f"training diverged at epoch {epoch}: total loss is not finite")
        self.epoch = epoch
        self.trace = trace


def _margin_pair_mask(margins: np.ndarray) -> np.ndarray:
    return margins[:, None] > margins[None, :]


def _swap_cost_base(margins: np.ndarray) -> tuple[np.ndarray, float]:
    """|2^g_i - 2^g_j| matrix over binned margin gains, plus the ideal DCG."""
    gains = margin_gains(margins)
    gain_pow = np.power(2.0, gains.astype(np.float64))
    top = np.sort(gain_pow - 1.0)[::-1]
    idcg = float(np.dot(top, 1.0 / np.log2(1.0 + np.arange(1, len(top) + 1))))
    return np.abs(gain_pow[:, None] - gain_pow[None, :]), idcg


def _swap_cost_matrix(u_prime: np.ndarray, gain_diff: np.ndarray, idcg: float) -> np.ndarray:
    disc = 1.0 / np.log2(1.0 + rank_positions(u_prime))
    return gain_diff * np.abs(disc[:, None] - disc[None, :]) / idcg


def margin_rank_loss(
    session: QuerySession, u_prime: np.ndarray, theta_rank: float
) -> float:
    """Pairwise logistic loss over margin-ordered pairs, NDCG-swap-weighted.

    Sums log(1 + exp(-theta * (u'_i - u'_j))) * swap_cost(i, j) over all
    pairs whose first item has the strictly larger margin.
    """
    margins = session.margins
    mask = _margin_pair_mask(margins)
    gain_diff, idcg = _swap_cost_base(margins)
    delta = _swap_cost_matrix(u_prime, gain_diff, idcg)
    d = u_prime[:, None] - u_prime[None, :]
    core = np.logaddexp(0.0, -theta_rank * d)
    return float(np.sum(core * delta, where=mask, initial=0.0))


def lambda_gradients(
    session: QuerySession, u_prime: np.ndarray, theta_rank: float
) -> np.ndarray:
    """Pairwise lambda gradients as an (n, n) matrix.

    Entry (i, j) is -theta / (1 + exp(theta * (u'_i - u'_j))) * swap_cost
    for pairs with margin_i > margin_j and zero elsewhere: the slope of
    the pairwise logistic loss, so each entry is strictly negative and
    shrinks toward zero once the pair is ranked well apart.
    """
    margins = session.margins
    mask = _margin_pair_mask(margins)
    gain_diff, idcg = _swap_cost_base(margins)
    delta = _swap_cost_matrix(u_prime, gain_diff, idcg)
    d = u_prime[:, None] - u_prime[None, :]
    slope = -theta_rank * 0.5 * (1.0 - np.tanh(0.5 * theta_rank * d))
    return np.where(mask, slope * delta, 0.0)


def rank_loss_score_gradient(
    session: QuerySession, u_prime: np.ndarray, theta_rank: float
) -> np.ndarray:
    """d(margin_rank_loss)/d(u'): lambda row sums minus column sums."""
    lam = lambda_gradients(session, u_prime, theta_rank)
    return lam.sum(axis=1) - lam.sum(axis=0)


def total_loss(
    session: QuerySession, model: MarginWeightModel, config: RerankConfig
) -> LossBreakdown:
    """Margin-rank loss plus the weighted closeness regularizer."""
    u_prime = adjust_scores(session, model, config.alpha)
    rank_loss = margin_rank_loss(session, u_prime, config.theta_rank)
    if config.gamma > 0:
        similarity = kendall_kernel(session.base_utilities, u_prime, config.theta_kendall)
        regularizer = config.gamma * (1.0 - similarity)
    else:
        regularizer = 0.0
    return LossBreakdown(rank_loss, regularizer)


def loss_gradient(
    session: QuerySession, model: MarginWeightModel, config: RerankConfig
) -> np.ndarray:
    """Gradient of :func:`total_loss` in parameter space.

    Returns a flat vector: one slot per model weight, then the bias.  The
    per-item score gradient is chained through d(adjusted)/d(weight) =
    log(margin/price) * link'(pre-activation) * inputs.
    """
    z = model_inputs(session)
    a = z @ model.weights + model.bias
    lmp = np.log(session.margin_percents)
    u_prime = (
        session.base_utilities
        + config.alpha * np.log(session.prices)
        + apply_link(model.link, a) * lmp
    )
    score_grad = rank_loss_score_gradient(session, u_prime, config.theta_rank)
    if config.gamma > 0:
        score_grad = score_grad - config.gamma * kendall_kernel_grad(
            session.base_utilities, u_prime, config.theta_kendall
        )
    coeff = score_grad * lmp * link_derivative(model.link, a)
    return np.concatenate([z.T @ coeff, [coeff.sum()]])


class _SessionCache:
    """Per-session constants hoisted out of the epoch loop."""

    def __init__(self, session: QuerySession, alpha: float):
        self.z = model_inputs(session)
        self.u = session.base_utilities
        self.lmp = np.log(session.margin_percents)
        self.fixed = self.u + alpha * np.log(session.prices)
        self.mask = _margin_pair_mask(session.margins)
        self.gain_diff, self.idcg = _swap_cost_base(session.margins)
        self.sign_u = np.sign(self.u[:, None] - self.u[None, :])
        self.npairs = pair_count(session.n)


def _session_pass(
    cache: _SessionCache, weights: np.ndarray, bias: float, config: RerankConfig
) -> tuple[float, float, float, np.ndarray]:
    """One loss + gradient evaluation; returns (rank_loss, regularizer, tau, grad).

    Overflow here surfaces as a non-finite total loss, which fit() turns
    into TrainingDiverged; the numpy warnings would only be noise.
    """
    with np.errstate(over="ignore", invalid="ignore"):
        return _session_pass_inner(cache, weights, bias, config)


def _session_pass_inner(
    cache: _SessionCache, weights: np.ndarray, bias: float, config: RerankConfig
) -> tuple[float, float, float, np.ndarray]:
    a = cache.z @ weights + bias
    beta = apply_link(config.link, a)
    u_prime = cache.fixed + beta * cache.lmp
    if not np.all(np.isfinite(u_prime)):
        # Parameters have overflowed; report a non-finite loss so fit()
        # raises TrainingDiverged instead of tripping metric input checks.
        nan = float("nan")
        return nan, nan, nan, np.zeros(len(weights) + 1)
    d = u_prime[:, None] - u_prime[None, :]

    delta = _swap_cost_matrix(u_prime, cache.gain_diff, cache.idcg)
    rank_loss = float(np.sum(np.logaddexp(0.0, -config.theta_rank * d) * delta,
                             where=cache.mask, initial=0.0))
    lam = np.where(
        cache.mask,
        -config.theta_rank * 0.5 * (1.0 - np.tanh(0.5 * config.theta_rank * d)) * delta,
        0.0,
    )
    score_grad = lam.sum(axis=1) - lam.sum(axis=0)

    tanh_k = np.tanh(0.5 * config.theta_kendall * d)
    regularizer = 0.0
    if config.gamma > 0:
        similarity = float(np.sum(cache.sign_u * tanh_k)) / (2.0 * cache.npairs)
        regularizer = config.gamma * (1.0 - similarity)
        kernel_grad = (2.0 * config.theta_kendall / cache.npairs) * np.sum(
            cache.sign_u * 0.25 * (1.0 - tanh_k * tanh_k), axis=1
        )
        score_grad = score_grad - config.gamma * kernel_grad

    coeff = score_grad * cache.lmp * link_derivative(config.link, a)
    grad = np.concatenate([cache.z.T @ coeff, [coeff.sum()]])
    tau = float(np.sum(cache.sign_u * np.sign(d))) / (2.0 * cache.npairs)
    return rank_loss, regularizer, tau, grad


def fit(
    sessions: Sequence[QuerySession],
    config: RerankConfig,
    threads: int = 1,
) -> tuple[MarginWeightModel, TrainTrace]:
    """Train a margin-weight model on the given sessions.

    Full-batch descent from a zero-initialized model; the trace records the
    loss components and the mean exact Kendall tau to the original ranking
    at the start of every epoch.  Raises :class:`TrainingDiverged` if the
    total loss stops being finite.
    """
    if not sessions:
        raise ValueError("fit requires at least one session")
    dims = {s.feature_dim for s in sessions}
    if len(dims) != 1:
        raise ValueError(f"sessions disagree on feature_dim: {sorted(dims)}")
    (feature_dim,) = dims

    caches = [_SessionCache(s, config.alpha) for s in sessions]
    weights = np.zeros(feature_dim + 1)
    bias = 0.0
    n_sessions = len(sessions)

    rank_hist, reg_hist, total_hist, tau_hist = [], [], [], []
    for epoch in range(config.epochs):
        results = map_ordered(
            lambda c: _session_pass(c, weights, bias, config), caches, threads
        )
        grad = np.zeros(feature_dim + 2)
        rank_sum = reg_sum = tau_sum = 0.0
        for rank_loss, regularizer, tau, g in results:
            rank_sum += rank_loss
            reg_sum += regularizer
            tau_sum += tau
            grad += g

        mean_rank = rank_sum / n_sessions
        mean_reg = reg_sum / n_sessions
        mean_total = mean_rank + mean_reg
        if not np.isfinite(mean_total):
            raise TrainingDiverged(
                epoch,
                TrainTrace(
                    np.array(rank_hist), np.array(reg_hist),
                    np.array(total_hist), np.array(tau_hist),
                ),
            )
        rank_hist.append(mean_rank)
        reg_hist.append(mean_reg)
        total_hist.append(mean_total)
        tau_hist.append(tau_sum / n_sessions)

        with np.errstate(over="ignore", invalid="ignore"):
            step = (config.learning_rate / n_sessions) * grad
            weights = weights - step[:-1]
            bias = float(bias - step[-1])

    model = MarginWeightModel(weights, bias, config.link)
    trace = TrainTrace(
        np.array(rank_hist), np.array(reg_hist), np.array(total_hist), np.array(tau_hist)
    )
    return model, trace


def write_trace_csv(trace: TrainTrace, path: str | Path) -> None:
    """Write the trace as CSV: epoch,rank_loss,regularizer,total,mean_tau."""
    lines = ["epoch,rank_loss,regularizer,total,mean_tau"]
    for e in range(len(trace)):
        lines.append(
            f"{e},{trace.rank_loss[e]:.9g},{trace.regularizer[e]:.9g},"
            f"{trace.total[e]:.9g},{trace.mean_tau[e]:.9g}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
