"""Margin-aware re-ranking of consumer result lists.

Given sessions scored by a consumer-preference model, this package learns
a per-item weight on log margin percent that re-orders each list toward
intermediary margin while a kernelized rank-correlation penalty keeps the
new order close to the original.  It ships the training loop, a
line-search baseline, ranking metrics, a synthetic corpus generator with
an engineered consumer/margin tension, tradeoff evaluation, and a CLI.
"""

from .baseline import LineSearchConfig, LineSearchResult, line_search_fit, line_search_objective
from .core import (
    Item,
    QuerySession,
    SessionFormatError,
    Violation,
    emit_sessions,
    load_sessions,
    validate_session,
)
from .evaluation import EvalReport, MethodResult, evaluate, model_scorer, original_scorer, risk_reward
from .kendall import (
    kendall_kernel,
    kendall_kernel_grad,
    kendall_tau,
    pair_order_features,
    pair_order_features_smooth,
)
from .metrics import expected_margin_at_k, margin_gains, ndcg_at_k, ndcg_swap_cost, rank_positions
from .rerank import (
    MarginWeightModel,
    ModelFormatError,
    RerankConfig,
    adjust_scores,
    constant_weight_model,
    load_model,
    margin_weight,
    margin_weights,
    rerank,
    save_model,
)
from .synth import SyntheticSpec, corpus_tension, generate_sessions
from .train import (
    TrainingDiverged,
    TrainTrace,
    fit,
    lambda_gradients,
    loss_gradient,
    margin_rank_loss,
    total_loss,
    write_trace_csv,
)

__version__ = "0.1.0"

__all__ = [
    "EvalReport",
    "Item",
    "LineSearchConfig",
    "LineSearchResult",
    "MarginWeightModel",
    "MethodResult",
    "ModelFormatError",
    "QuerySession",
    "RerankConfig",
    "SessionFormatError",
    "SyntheticSpec",
    "TrainTrace",
    "TrainingDiverged",
    "Violation",
    "adjust_scores",
    "constant_weight_model",
    "corpus_tension",
    "emit_sessions",
    "evaluate",
    "expected_margin_at_k",
    "fit",
    "generate_sessions",
    "kendall_kernel",
    "kendall_kernel_grad",
    "kendall_tau",
    "lambda_gradients",
    "line_search_fit",
    "line_search_objective",
    "load_model",
    "load_sessions",
    "loss_gradient",
    "margin_gains",
    "margin_rank_loss",
    "margin_weight",
    "margin_weights",
    "model_scorer",
    "ndcg_at_k",
    "ndcg_swap_cost",
    "original_scorer",
    "pair_order_features",
    "pair_order_features_smooth",
    "rank_positions",
    "rerank",
    "risk_reward",
    "save_model",
    "total_loss",
    "validate_session",
    "write_trace_csv",
]
