"""Tradeoff evaluation: NDCG@k lifts per objective and query-level risk/reward.

Every method is scored on two objectives: "consumer" uses the graded
interaction labels as NDCG gains, "margin" uses within-session quartile
bins of the margin.  Lifts are percent changes of mean NDCG@k against a
designated reference method.  Risk and reward count the queries where a
method's per-query NDCG@k is strictly below or strictly above a baseline
method's; they are kept as exact fractions so that risk + reward + ties
is 1 by construction rather than within rounding.

Sessions with no positive label carry no consumer signal (their NDCG is
zero for every ranking), so the consumer objective is computed over the
subset that has one; the margin objective uses every session.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .core import QuerySession
from .metrics import margin_gains, ndcg_at_k
from .rerank import MarginWeightModel, adjust_scores

Scorer = Callable[[QuerySession], np.ndarray]

OBJECTIVES = ("consumer", "margin")
DEFAULT_K = 10


def original_scorer(session: QuerySession) -> np.ndarray:
    return session.base_utilities


def model_scorer(model: MarginWeightModel, alpha: float) -> Scorer:
    """Scorer closure over a trained or constant-weight model."""
    def score(session: QuerySession) -> np.ndarray:
        return adjust_scores(session, model, alpha)
    return score


def objective_gains(session: QuerySession, objective: str) -> np.ndarray:
    if objective == "consumer":
        return session.labels
    if objective == "margin":
        return margin_gains(session.margins)
    raise ValueError(f"unknown objective {objective!r}, expected one of {OBJECTIVES}")


def eligible_sessions(
    sessions: Sequence[QuerySession], objective: str
) -> list[QuerySession]:
    if objective == "consumer":
        return [s for s in sessions if s.has_positive_label]
    if objective == "margin":
        return list(sessions)
    raise ValueError(f"unknown objective {objective!r}, expected one of {OBJECTIVES}")


def _ndcg_list(
    sessions: Sequence[QuerySession], scorer: Scorer, k: int, objective: str
) -> list[float]:
    return [
        ndcg_at_k(scorer(s), objective_gains(s, objective), k) for s in sessions
    ]


def _count_risk_reward(
    challenger_ndcg: Sequence[float], baseline_ndcg: Sequence[float]
) -> tuple[Fraction, Fraction, Fraction]:
    total = len(challenger_ndcg)
    below = sum(1 for c, b in zip(challenger_ndcg, baseline_ndcg) if c < b)
    above = sum(1 for c, b in zip(challenger_ndcg, baseline_ndcg) if c > b)
    risk = Fraction(below, total)
    reward = Fraction(above, total)
    return risk, reward, 1 - risk - reward


def risk_reward(
    sessions: Sequence[QuerySession],
    challenger: Scorer,
    baseline: Scorer,
    k: int = DEFAULT_K,
    objective: str = "margin",
) -> tuple[Fraction, Fraction, Fraction]:
    """Exact fractions of queries where challenger beats / loses to baseline.

    Returns (risk, reward, ties); risk counts strict per-query NDCG@k
    losses, reward strict wins, and the three always sum to exactly 1.
    """
    pool = eligible_sessions(sessions, objective)
    if not pool:
        raise ValueError(f"no sessions eligible for the {objective} objective")
    return _count_risk_reward(
        _ndcg_list(pool, challenger, k, objective),
        _ndcg_list(pool, baseline, k, objective),
    )


@dataclass(frozen=True)
class MethodResult:
    method: str
    objective: str
    ndcg_mean: float
    lift_pct: float | None
    risk: Fraction
    reward: Fraction
    ties: Fraction


@dataclass(frozen=True)
class EvalReport:
    k: int
    reference: str
    risk_baseline: str
    query_counts: dict[str, int]
    results: tuple[MethodResult, ...]

    def result(self, method: str, objective: str) -> MethodResult:
        for row in self.results:
            if row.method == method and row.objective == objective:
                return row
        raise KeyError(f"no result for method {method!r}, objective {objective!r}")

    def to_csv_text(self) -> str:
        lines = ["method,objective,ndcg_mean,lift_pct,risk,reward,ties"]
        for r in self.results:
            lift = "" if r.lift_pct is None else f"{r.lift_pct:.9g}"
            lines.append(
                f"{r.method},{r.objective},{r.ndcg_mean:.9g},{lift},"
                f"{float(r.risk):.9g},{float(r.reward):.9g},{float(r.ties):.9g}"
            )
        return "\n".join(lines) + "\n"

    def to_table_text(self) -> str:
        counts = " / ".join(
            f"{self.query_counts[obj]} ({obj})" for obj in OBJECTIVES
        )
        lines = [
            f"NDCG@{self.k} by method and objective over {counts} queries",
            f"lifts vs {self.reference!r}; risk/reward vs {self.risk_baseline!r}",
            "",
            f"{'method':<12} {'objective':<10} {'ndcg_mean':>10} {'lift':>9} "
            f"{'risk':>7} {'reward':>7} {'ties':>7}",
        ]
        for r in self.results:
            lift = "n/a" if r.lift_pct is None else f"{r.lift_pct:+.1f}%"
            lines.append(
                f"{r.method:<12} {r.objective:<10} {r.ndcg_mean:>10.4f} {lift:>9} "
                f"{float(r.risk):>6.1%} {float(r.reward):>6.1%} {float(r.ties):>6.1%}"
            )
        return "\n".join(lines) + "\n"


def evaluate(
    sessions: Sequence[QuerySession],
    methods: Sequence[tuple[str, Scorer]],
    k: int = DEFAULT_K,
    reference: str = "original",
    risk_baseline: str | None = None,
) -> EvalReport:
    """Score every method on both objectives and compare to the reference.

    ``methods`` is an ordered list of (name, scorer) pairs and must include
    the reference; ``risk_baseline`` names the method risk/reward is counted
    against (the reference when omitted).  Means use exact summation, so the
    report is invariant to session order.
    """
    if not sessions:
        raise ValueError("evaluate requires at least one session")
    names = [name for name, _ in methods]
    if len(set(names)) != len(names):
        raise ValueError(f"duplicate method names: {names}")
    if reference not in names:
        raise ValueError(f"reference {reference!r} not among methods {names}")
    if risk_baseline is None:
        risk_baseline = reference
    elif risk_baseline not in names:
        raise ValueError(f"risk baseline {risk_baseline!r} not among methods {names}")

    pools = {obj: eligible_sessions(sessions, obj) for obj in OBJECTIVES}
    for obj, pool in pools.items():
        if not pool:
            raise ValueError(f"no sessions eligible for the {obj} objective")

    ndcg: dict[tuple[str, str], list[float]] = {}
    for name, scorer in methods:
        for obj in OBJECTIVES:
            ndcg[name, obj] = _ndcg_list(pools[obj], scorer, k, obj)

    results = []
    for name, _ in methods:
        for obj in OBJECTIVES:
            values = ndcg[name, obj]
            mean = math.fsum(values) / len(values)
            ref_mean = math.fsum(ndcg[reference, obj]) / len(values)
            lift = None if ref_mean == 0 else 100.0 * (mean - ref_mean) / ref_mean
            risk, reward, ties = _count_risk_reward(values, ndcg[risk_baseline, obj])
            results.append(MethodResult(name, obj, mean, lift, risk, reward, ties))

    return EvalReport(
        k=k,
        reference=reference,
        risk_baseline=risk_baseline,
        query_counts={obj: len(pools[obj]) for obj in OBJECTIVES},
        results=tuple(results),
    )
