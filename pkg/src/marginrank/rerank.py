"""Score adjustment with a learned, feature-conditioned margin weight.

New scores are

    adjusted_i = base_utility_i + alpha * log(price_i)
                 + w(x_i, m_i) * log(margin_i / price_i)

where w is a linear model over the item features plus the log margin,
passed through an identity or softplus link.  Since margin < price, the
log margin-percent term is always negative: a positive weight therefore
penalizes low-commission items more than high-commission ones, which is
how "pushing high-commission items up" manifests in score space.

Model artifacts are versioned JSON with floats written at 17 significant
digits, which round-trips float64 exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .core import Item, QuerySession
from .metrics import rank_positions

LINKS = ("identity", "softplus")

ARTIFACT_VERSION = 1


def softplus(a: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, a)


def sigmoid(a: np.ndarray) -> np.ndarray:
    # 0.5 * (1 + tanh(a/2)) avoids overflow for large |a|
    return 0.5 * (1.0 + np.tanh(0.5 * a))


def apply_link(link: str, a: np.ndarray) -> np.ndarray:
    if link == "identity":
        return np.asarray(a, dtype=np.float64)
    if link == "softplus":
        return softplus(a)
    raise ValueError(f"unknown link {link!r}")


def link_derivative(link: str, a: np.ndarray) -> np.ndarray:
    if link == "identity":
        return np.ones_like(np.asarray(a, dtype=np.float64))
    if link == "softplus":
        return sigmoid(a)
    raise ValueError(f"unknown link {link!r}")


@dataclass(frozen=True, eq=False)
class MarginWeightModel:
    """Parameters of the learned margin-weight function.

    ``weights`` has one slot per item feature plus a final slot consuming
    the log margin, so the weight can condition on how much commission is
    actually at stake.  With the softplus link the output is always
    positive, keeping the sign of the margin-percent adjustment stable.
    """

    weights: np.ndarray
    bias: float
    link: str = "softplus"

    def __post_init__(self):
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=np.float64))
        if self.link not in LINKS:
            raise ValueError(f"link must be one of {LINKS}, got {self.link!r}")
        if not (np.all(np.isfinite(self.weights)) and math.isfinite(self.bias)):
            raise ValueError("model parameters must be finite")

    @property
    def feature_dim(self) -> int:
        return len(self.weights) - 1

    @classmethod
    def zeros(cls, feature_dim: int, link: str = "softplus") -> "MarginWeightModel":
        return cls(np.zeros(feature_dim + 1), 0.0, link)


@dataclass(frozen=True)
class RerankConfig:
    """Hyperparameters for training the margin-weight model.

    alpha          fixed coefficient of the log-price term
    gamma          strength of the closeness regularizer (0 disables it)
    theta_rank     sigmoid sharpness inside the pairwise margin loss
    theta_kendall  sigmoid sharpness of the smoothed rank-correlation term
    """

    alpha: float = 0.0
    gamma: float = 1.0
    theta_rank: float = 1.0
    theta_kendall: float = 1.0
    learning_rate: float = 0.01
    epochs: int = 200
    link: str = "softplus"
    seed: int = 0

    def __post_init__(self):
        if not math.isfinite(self.alpha):
            raise ValueError(f"alpha must be finite (got {self.alpha})")
        if self.gamma < 0:
            raise ValueError(f"gamma must be >= 0 (got {self.gamma})")
        if self.theta_rank <= 0 or self.theta_kendall <= 0:
            raise ValueError("theta_rank and theta_kendall must be > 0")
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be > 0 (got {self.learning_rate})")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1 (got {self.epochs})")
        if self.link not in LINKS:
            raise ValueError(f"link must be one of {LINKS}, got {self.link!r}")


def model_inputs(session: QuerySession) -> np.ndarray:
    """(n, feature_dim + 1) input matrix: item features plus log margin."""
    return np.column_stack([session.feature_matrix, np.log(session.margins)])


def margin_weights(model: MarginWeightModel, session: QuerySession) -> np.ndarray:
    """Evaluate the margin weight for every item of a session."""
    z = model_inputs(session)
    if z.shape[1] != len(model.weights):
        raise ValueError(
            f"model expects feature_dim {model.feature_dim}, "
            f"session has {session.feature_dim}"
        )
    return apply_link(model.link, z @ model.weights + model.bias)


def margin_weight(model: MarginWeightModel, item: Item) -> float:
    """Evaluate the margin weight for a single item."""
    z = np.append(item.features, math.log(item.margin))
    if len(z) != len(model.weights):
        raise ValueError(
            f"model expects feature_dim {model.feature_dim}, item has {len(item.features)}"
        )
    return float(apply_link(model.link, z @ model.weights + model.bias))


def adjust_scores(
    session: QuerySession, model: MarginWeightModel, alpha: float
) -> np.ndarray:
    """New scores: base utility + alpha*log(price) + weight*log(margin/price)."""
    w = margin_weights(model, session)
    return (
        session.base_utilities
        + alpha * np.log(session.prices)
        + w * np.log(session.margin_percents)
    )


def rerank(session: QuerySession, model: MarginWeightModel, alpha: float) -> np.ndarray:
    """1-based rank positions of the session's items under the adjusted scores."""
    return rank_positions(adjust_scores(session, model, alpha))


class ModelFormatError(ValueError):
    """Raised when a model artifact cannot be parsed or is inconsistent."""


def _fmt17(x: float) -> str:
    return format(float(x), ".17g")


def save_model(model: MarginWeightModel, alpha: float, path: str | Path) -> None:
    """Write the model artifact (versioned JSON, floats at 17 significant digits)."""
    weights = ", ".join(_fmt17(w) for w in model.weights)
    text = (
        "{\n"
        f'  "version": {ARTIFACT_VERSION},\n'
        f'  "feature_dim": {model.feature_dim},\n'
        f'  "link": "{model.link}",\n'
        f'  "alpha": {_fmt17(alpha)},\n'
        f'  "weights": [{weights}],\n'
        f'  "bias": {_fmt17(model.bias)}\n'
        "}\n"
    )
    Path(path).write_text(text, encoding="utf-8")


def load_model(path: str | Path) -> tuple[MarginWeightModel, float]:
    """Load a model artifact; returns (model, alpha).

    Raises :class:`ModelFormatError` on malformed JSON, missing keys, an
    unsupported version, or a feature_dim/weights mismatch.
    """
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise ModelFormatError(f"{path}: expected a JSON object")
    missing = {"version", "feature_dim", "link", "alpha", "weights", "bias"} - doc.keys()
    if missing:
        raise ModelFormatError(f"{path}: missing keys {sorted(missing)}")
    if doc["version"] != ARTIFACT_VERSION:
        raise ModelFormatError(
            f"{path}: unsupported artifact version {doc['version']!r}"
        )
    weights = np.asarray(doc["weights"], dtype=np.float64)
    if weights.ndim != 1 or len(weights) != doc["feature_dim"] + 1:
        raise ModelFormatError(
            f"{path}: weights length {weights.size} does not match "
            f"feature_dim {doc['feature_dim']} + 1"
        )
    try:
        model = MarginWeightModel(weights, float(doc["bias"]), doc["link"])
    except (TypeError, ValueError) as exc:
        raise ModelFormatError(f"{path}: {exc}") from None
    alpha = float(doc["alpha"])
    if not math.isfinite(alpha):
        raise ModelFormatError(f"{path}: alpha must be finite (got {alpha})")
    return model, alpha


def constant_weight_model(
    weight: float, feature_dim: int
) -> MarginWeightModel:
    """A model that outputs the same margin weight for every item.

    Used by the line-search baseline so its scalar weight shares the same
    artifact format and scoring path as learned models.
    """
    return replace(
        MarginWeightModel.zeros(feature_dim, link="identity"), bias=float(weight)
    )
