"""Line-search baseline: a single constant margin weight chosen on a grid.

The baseline ranks by u + alpha * log(price) + w * log(margin/price) for a
scalar w shared across items and sessions, and picks w to minimize a
weighted sum of two disagreement terms, each of the form 1 - Kendall tau:
disagreement with the original consumer ranking, and disagreement with the
ranking by margin percent.  It is the strongest re-ranker available without
features, and the reference point the learned model is measured against.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import QuerySession
from .kendall import kendall_tau
from .rerank import MarginWeightModel, constant_weight_model


@dataclass(frozen=True)
class LineSearchConfig:
    weight_grid: tuple[float, ...] = tuple(np.linspace(0.0, 4.0, 41))
    alpha: float = 0.0
    consumer_weight: float = 1.0
    margin_weight: float = 1.0

    def __post_init__(self):
        if len(self.weight_grid) == 0:
            raise ValueError("weight_grid must be nonempty")
        if not np.all(np.isfinite(self.weight_grid)):
            raise ValueError("weight_grid entries must be finite")
        if self.consumer_weight < 0 or self.margin_weight < 0:
            raise ValueError("objective weights must be nonnegative")
        if self.consumer_weight == 0 and self.margin_weight == 0:
            raise ValueError("at least one objective weight must be positive")


@dataclass(frozen=True)
class LineSearchResult:
    weight: float
    objective: float
    grid: np.ndarray
    objectives: np.ndarray


def line_search_objective(
    sessions: Sequence[QuerySession], weight: float, config: LineSearchConfig
) -> float:
    """Mean weighted disagreement of the constant-weight ranking.

    Per session: consumer_weight * (1 - tau(u, u')) +
    margin_weight * (1 - tau(margin_percent, u')).
    """
    if not sessions:
        raise ValueError("objective requires at least one session")
    total = 0.0
    for session in sessions:
        u = session.base_utilities
        u_prime = (
            u
            + config.alpha * np.log(session.prices)
            + weight * np.log(session.margin_percents)
        )
        term = config.consumer_weight * (1.0 - kendall_tau(u, u_prime))
        term += config.margin_weight * (
            1.0 - kendall_tau(session.margin_percents, u_prime)
        )
        total += term
    return total / len(sessions)


def line_search_fit(
    sessions: Sequence[QuerySession], config: LineSearchConfig
) -> tuple[MarginWeightModel, LineSearchResult]:
    """Evaluate the grid and return the best constant-weight model.

    Ties on the objective resolve toward the weight with the smaller
    absolute value, so a do-nothing baseline wins when margin weighting
    buys nothing.
    """
    if not sessions:
        raise ValueError("line_search_fit requires at least one session")
    dims = {s.feature_dim for s in sessions}
    if len(dims) != 1:
        raise ValueError(f"sessions disagree on feature_dim: {sorted(dims)}")
    (feature_dim,) = dims

    grid = np.asarray(config.weight_grid, dtype=np.float64)
    objectives = np.array(
        [line_search_objective(sessions, float(w), config) for w in grid]
    )
    best = 0
    for k in range(1, len(grid)):
        if objectives[k] < objectives[best] or (
            objectives[k] == objectives[best] and abs(grid[k]) < abs(grid[best])
        ):
            best = k
    result = LineSearchResult(
        weight=float(grid[best]),
        objective=float(objectives[best]),
        grid=grid,
        objectives=objectives,
    )
    model = constant_weight_model(result.weight, feature_dim)
    return model, result
