"""Synthetic session generator with a built-in consumer/intermediary tension.

Margin percent is drawn so that it is anti-correlated with base utility
(items the consumer prefers pay the intermediary less) while staying
predictable from the item features.  That tension is what makes re-ranking
experiments informative: pushing margin up must cost consumer quality, and
a feature-aware model can pay less for the same margin than a constant
weight can.  The anti-correlation is asserted on every generated corpus
and enforced by resampling, so downstream tradeoff measurements never run
on an accidentally tension-free draw.

Labels follow a within-session booking model: booking probability is a
softmax over base utilities, clicks are independent utility-sigmoid draws,
and a booking is forced when sampling produces none so that consumer NDCG
is well defined for every session.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Item, QuerySession, validate_session
from .rerank import sigmoid

# Corpus-level Pearson correlation between margin percent and base utility
# must fall below this for a draw to be accepted.
TENSION_THRESHOLD = -0.1
_MAX_ATTEMPTS = 20


@dataclass(frozen=True)
class SyntheticSpec:
    n_queries: int = 1000
    mean_items: float = 30.0
    feature_dim: int = 4
    seed: int = 0
    utility_scale: float = 1.0
    # Margin percent is a sigmoid squash of feature_coef * (w . x)
    # - tension * u + noise * eps into (margin_low, margin_high).
    margin_low: float = 0.05
    margin_high: float = 0.45
    feature_coef: float = 1.5
    tension: float = 1.0
    noise: float = 0.5
    # log price = log(price_scale) + price_spread * (price_feature_coef * (w' . x)
    # + eps) / norm.  The feature-predictable part is what separates a
    # feature-aware re-ranker from a margin-percent-only rule: dollar margin
    # is price times margin percent, and price reaches the scorer only
    # through the features, never as a feature itself.
    price_scale: float = 100.0
    price_spread: float = 0.4
    price_feature_coef: float = 1.0
    click_rate: float = 0.4
    booking_rate: float = 1.5
    booking_temperature: float = 1.0

    def __post_init__(self):
        if self.n_queries < 1:
            raise ValueError(f"n_queries must be >= 1, got {self.n_queries}")
        if self.mean_items < 2:
            raise ValueError(f"mean_items must be >= 2, got {self.mean_items}")
        if self.feature_dim < 1:
            raise ValueError(f"feature_dim must be >= 1, got {self.feature_dim}")
        if not 0.0 < self.margin_low < self.margin_high < 1.0:
            raise ValueError(
                "margin bounds must satisfy 0 < margin_low < margin_high < 1, "
                f"got ({self.margin_low}, {self.margin_high})"
            )
        for name in ("utility_scale", "price_scale", "booking_temperature"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for name in ("noise", "price_spread", "tension", "feature_coef",
                     "price_feature_coef", "click_rate", "booking_rate"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")


def _softmax(t: np.ndarray) -> np.ndarray:
    e = np.exp(t - np.max(t))
    return e / e.sum()


def _draw_session(
    spec: SyntheticSpec,
    rng: np.random.Generator,
    query_id: str,
    w_margin: np.ndarray,
    w_price: np.ndarray,
) -> QuerySession:
    n = max(2, int(rng.poisson(spec.mean_items)))
    x = rng.normal(size=(n, spec.feature_dim))
    u = spec.utility_scale * rng.normal(size=n)

    raw = (
        spec.feature_coef * (x @ w_margin)
        - spec.tension * u
        + spec.noise * rng.normal(size=n)
    )
    mp = spec.margin_low + (spec.margin_high - spec.margin_low) * sigmoid(raw)
    # Unit-variance log-price driver, so price_spread stays the log std dev
    # regardless of how predictable the price is.
    raw_price = spec.price_feature_coef * (x @ w_price) + rng.normal(size=n)
    raw_price = raw_price / math.sqrt(spec.price_feature_coef**2 + 1.0)
    price = spec.price_scale * np.exp(spec.price_spread * raw_price)
    cost = price * (1.0 - mp)

    soft = _softmax(u / spec.booking_temperature)
    booked = rng.random(n) < np.minimum(1.0, spec.booking_rate * soft)
    if not booked.any():
        booked[rng.choice(n, p=soft)] = True
    clicked = rng.random(n) < spec.click_rate * sigmoid(u)
    labels = np.where(booked, 2, np.where(clicked, 1, 0))

    items = tuple(
        Item(
            item_id=f"i{j:03d}",
            features=x[j],
            label=int(labels[j]),
            price=float(price[j]),
            cost=float(cost[j]),
            base_utility=float(u[j]),
        )
        for j in range(n)
    )
    return QuerySession(query_id=query_id, items=items, feature_dim=spec.feature_dim)


def _unit_direction(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = rng.normal(size=dim)
    return v / math.sqrt(float(v @ v))


def _draw_corpus(spec: SyntheticSpec, rng: np.random.Generator) -> list[QuerySession]:
    width = max(4, len(str(spec.n_queries - 1)))
    w_margin = _unit_direction(rng, spec.feature_dim)
    w_price = _unit_direction(rng, spec.feature_dim)
    return [
        _draw_session(spec, rng, f"q{i:0{width}d}", w_margin, w_price)
        for i in range(spec.n_queries)
    ]


def corpus_tension(sessions: list[QuerySession]) -> float:
    """Pearson correlation between margin percent and base utility, all items."""
    mp = np.concatenate([s.margin_percents for s in sessions])
    u = np.concatenate([s.base_utilities for s in sessions])
    return float(np.corrcoef(mp, u)[0, 1])


def generate_sessions(spec: SyntheticSpec) -> list[QuerySession]:
    """Generate a corpus of valid sessions, deterministic given the seed.

    Redraws the whole corpus (up to a bounded number of attempts) until the
    engineered anti-correlation between margin percent and base utility is
    actually present in the sample.
    """
    rng = np.random.default_rng(spec.seed)
    for _ in range(_MAX_ATTEMPTS):
        sessions = _draw_corpus(spec, rng)
        if corpus_tension(sessions) < TENSION_THRESHOLD:
            for session in sessions:
                violations = validate_session(session)
                if violations:
                    raise RuntimeError(
                        f"generator produced invalid session {session.query_id}: "
                        f"{violations[0]}"
                    )
            return sessions
    raise RuntimeError(
        f"could not draw a corpus with margin/utility correlation below "
        f"{TENSION_THRESHOLD} in {_MAX_ATTEMPTS} attempts; "
        "increase the tension setting"
    )
