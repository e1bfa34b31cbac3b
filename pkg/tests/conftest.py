"""Shared fixtures: random valid sessions and the acceptance result registry."""

from __future__ import annotations

import numpy as np
import pytest

from marginrank import Item, QuerySession

# Acceptance tests append (number, description, passed, detail) here so the
# terminal summary can show one line per criterion even under output capture.
ACCEPTANCE_RESULTS: list[tuple[int, str, bool, str]] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num, desc, passed, detail in sorted(ACCEPTANCE_RESULTS):
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"criterion {num} {status:4s} {desc}: {detail}")


def make_item(
    rng: np.random.Generator,
    feature_dim: int,
    item_id: str,
    label: int | None = None,
) -> Item:
    price = float(100.0 * np.exp(0.4 * rng.normal()))
    margin_percent = float(rng.uniform(0.05, 0.6))
    return Item(
        item_id=item_id,
        features=rng.normal(size=feature_dim),
        label=int(rng.integers(0, 3)) if label is None else label,
        price=price,
        cost=price * (1.0 - margin_percent),
        base_utility=float(rng.normal()),
    )


def make_session(
    rng: np.random.Generator,
    n: int | None = None,
    feature_dim: int = 3,
    query_id: str = "q0",
    ensure_positive_label: bool = True,
) -> QuerySession:
    if n is None:
        n = int(rng.integers(4, 13))
    items = [make_item(rng, feature_dim, f"i{j}") for j in range(n)]
    if ensure_positive_label and not any(it.label >= 1 for it in items):
        keep = items[0]
        items[0] = Item(
            item_id=keep.item_id,
            features=keep.features,
            label=2,
            price=keep.price,
            cost=keep.cost,
            base_utility=keep.base_utility,
        )
    return QuerySession(query_id=query_id, items=tuple(items), feature_dim=feature_dim)


def make_corpus(
    rng: np.random.Generator, n_sessions: int, feature_dim: int = 3
) -> list[QuerySession]:
    return [
        make_session(rng, feature_dim=feature_dim, query_id=f"q{k}")
        for k in range(n_sessions)
    ]


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(7)


@pytest.fixture
def session(rng) -> QuerySession:
    return make_session(rng, n=6)
