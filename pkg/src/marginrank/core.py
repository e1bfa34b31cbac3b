"""Domain types and the canonical session CSV format.

A :class:`QuerySession` bundles the candidate items of one search query:
per-item features, a relevance label (0 = no interaction, 1 = click,
2 = booking), the selling price, the supplier cost, and the first-stage
utility score that produced the original consumer ranking.  The commission
margin is always derived as ``price - cost`` and never stored, so it cannot
drift out of sync.

The CSV schema (UTF-8, header required) is::

    query_id,item_id,label,price,cost,base_utility,f0,f1,...,f{d-1}

Rows belonging to one query must be contiguous.  Floats are plain decimals
written at 9 significant digits; re-emitting a loaded file reproduces it
byte for byte.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, TextIO

import numpy as np

logger = logging.getLogger(__name__)

VALID_LABELS = (0, 1, 2)

_FIXED_COLUMNS = ("query_id", "item_id", "label", "price", "cost", "base_utility")


@dataclass(frozen=True, eq=False)
class Item:
    """One candidate item within a query session.

    ``features`` must not contain the price: price is a component of the
    margin target, so exposing it as an input feature would leak the
    quantity the margin-weight model is trained against.
    """

    item_id: str
    features: np.ndarray
    label: int
    price: float
    cost: float
    base_utility: float

    def __post_init__(self):
        object.__setattr__(self, "features", np.asarray(self.features, dtype=np.float64))

    @property
    def margin(self) -> float:
        return self.price - self.cost

    @property
    def margin_percent(self) -> float:
        return (self.price - self.cost) / self.price


@dataclass(frozen=True, eq=False)
class QuerySession:
    """All candidate items retrieved for one search query, in original order."""

    query_id: str
    items: tuple[Item, ...]
    feature_dim: int

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(self.items))

    @property
    def n(self) -> int:
        return len(self.items)

    @cached_property
    def labels(self) -> np.ndarray:
        return np.array([it.label for it in self.items], dtype=np.float64)

    @cached_property
    def prices(self) -> np.ndarray:
        return np.array([it.price for it in self.items], dtype=np.float64)

    @cached_property
    def costs(self) -> np.ndarray:
        return np.array([it.cost for it in self.items], dtype=np.float64)

    @cached_property
    def margins(self) -> np.ndarray:
        return self.prices - self.costs

    @cached_property
    def margin_percents(self) -> np.ndarray:
        return self.margins / self.prices

    @cached_property
    def base_utilities(self) -> np.ndarray:
        return np.array([it.base_utility for it in self.items], dtype=np.float64)

    @cached_property
    def feature_matrix(self) -> np.ndarray:
        """Item features stacked into an (n, feature_dim) matrix."""
        return np.array([it.features for it in self.items], dtype=np.float64)

    @property
    def has_positive_label(self) -> bool:
        return any(it.label >= 1 for it in self.items)


@dataclass(frozen=True)
class Violation:
    """One invariant violation found by :func:`validate_session`.

    ``item_index`` is None for session-level violations.
    """

    item_index: int | None
    reason: str

    def __str__(self) -> str:
        where = "session" if self.item_index is None else f"item {self.item_index}"
        return f"{where}: {self.reason}"


def validate_session(session: QuerySession) -> list[Violation]:
    """Check every invariant of a session and report all violations.

    Never raises; an empty list means the session is valid.  The
    "at least one positive label" condition is intentionally not checked
    here: it only matters for consumer-side evaluation, and such sessions
    remain usable for margin training (see :mod:`marginrank.evaluation`).
    """
    violations: list[Violation] = []
    if session.n < 2:
        violations.append(Violation(None, f"n < 2 (got {session.n})"))
    for idx, item in enumerate(session.items):
        if item.features.ndim != 1 or len(item.features) != session.feature_dim:
            violations.append(Violation(
                idx,
                f"feature vector length {item.features.size} != feature_dim {session.feature_dim}",
            ))
        elif not np.all(np.isfinite(item.features)):
            violations.append(Violation(idx, "non-finite feature value"))
        if item.label not in VALID_LABELS:
            violations.append(Violation(idx, f"label {item.label!r} not in {{0, 1, 2}}"))
        if not math.isfinite(item.price) or item.price <= 0:
            violations.append(Violation(idx, f"price must be > 0 (got {item.price!r})"))
        elif not math.isfinite(item.cost) or item.cost <= 0:
            violations.append(Violation(idx, f"cost must be > 0 (got {item.cost!r})"))
        elif item.cost >= item.price:
            violations.append(Violation(idx, f"cost >= price ({item.cost!r} >= {item.price!r})"))
        if not math.isfinite(item.base_utility):
            violations.append(Violation(idx, f"non-finite base_utility ({item.base_utility!r})"))
    return violations


class SessionFormatError(ValueError):
    """Raised when the session CSV cannot be parsed or fails validation.

    ``line`` is the 1-based line number of the first offending row, when
    one can be pinned down.
    """

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message)
        self.line = line


def _parse_float(raw: str, column: str, line: int) -> float:
    try:
        return float(raw)
    except ValueError:
        raise SessionFormatError(
            f"line {line}: non-numeric {column} {raw!r}", line=line
        ) from None


def load_sessions(source: str | Path | TextIO) -> list[QuerySession]:
    """Load query sessions from CSV, grouped by contiguous query_id runs.

    Raises :class:`SessionFormatError` on a malformed header or row, on a
    feature-dimension mismatch, on a query_id that reappears after a
    different one, and on any invariant violation (all violations are
    listed, with line numbers).  Sessions lacking a positive label are
    loaded but flagged via a warning; they are still valid for margin
    training.
    """
    if isinstance(source, (str, Path)):
        with open(source, newline="", encoding="utf-8") as handle:
            return load_sessions(handle)

    reader = csv.reader(source)
    try:
        header = next(reader)
    except StopIteration:
        return []
    feature_dim = _check_header(header)

    sessions: list[QuerySession] = []
    seen_ids: set[str] = set()
    current_id: str | None = None
    current_items: list[Item] = []
    current_first_line = 0
    line = 1

    def close_current():
        if current_id is not None:
            sessions.append(QuerySession(current_id, tuple(current_items), feature_dim))

    for row in reader:
        line += 1
        if not row:
            continue
        if len(row) != 6 + feature_dim:
            raise SessionFormatError(
                f"line {line}: expected {6 + feature_dim} columns, got {len(row)}",
                line=line,
            )
        query_id, item_id, raw_label = row[0], row[1], row[2]
        try:
            label = int(raw_label)
        except ValueError:
            raise SessionFormatError(
                f"line {line}: non-integer label {raw_label!r}", line=line
            ) from None
        price = _parse_float(row[3], "price", line)
        cost = _parse_float(row[4], "cost", line)
        base_utility = _parse_float(row[5], "base_utility", line)
        features = np.array(
            [_parse_float(cell, f"f{j}", line) for j, cell in enumerate(row[6:])]
        )

        if query_id != current_id:
            if query_id in seen_ids:
                raise SessionFormatError(
                    f"line {line}: query_id {query_id!r} reappears non-contiguously",
                    line=line,
                )
            close_current()
            current_id = query_id
            current_items = []
            current_first_line = line
            seen_ids.add(query_id)
        current_items.append(Item(item_id, features, label, price, cost, base_utility))
    close_current()

    _validate_loaded(sessions)
    return sessions


def _check_header(header: list[str]) -> int:
    if tuple(header[:6]) != _FIXED_COLUMNS:
        raise SessionFormatError(
            f"header must start with {','.join(_FIXED_COLUMNS)}; got {header[:6]}",
            line=1,
        )
    feature_cols = header[6:]
    expected = [f"f{j}" for j in range(len(feature_cols))]
    if feature_cols != expected:
        raise SessionFormatError(
            f"feature columns must be f0..f{len(feature_cols) - 1}; got {feature_cols}",
            line=1,
        )
    return len(feature_cols)


def _validate_loaded(sessions: list[QuerySession]) -> None:
    # Line numbers are reconstructed from row order: header is line 1 and
    # sessions are contiguous, so item k of session s has a fixed line.
    problems: list[str] = []
    line = 1
    for session in sessions:
        first_line = line + 1
        line += session.n
        for violation in validate_session(session):
            if violation.item_index is None:
                problems.append(
                    f"query {session.query_id!r} (line {first_line}): {violation.reason}"
                )
            else:
                problems.append(
                    f"query {session.query_id!r} line "
                    f"{first_line + violation.item_index}: {violation.reason}"
                )
        if not session.has_positive_label:
            logger.warning(
                "query %r has no clicked or booked item; it will be skipped by "
                "consumer-side evaluation", session.query_id,
            )
    if problems:
        raise SessionFormatError(
            "invalid session data:\n  " + "\n  ".join(problems)
        )


def emit_sessions(sessions: Iterable[QuerySession], sink: str | Path | TextIO) -> None:
    """Write sessions in the canonical CSV format (floats at 9 significant digits)."""
    if isinstance(sink, (str, Path)):
        with open(sink, "w", newline="", encoding="utf-8") as handle:
            emit_sessions(sessions, handle)
            return

    sessions = list(sessions)
    feature_dim = sessions[0].feature_dim if sessions else 0
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(list(_FIXED_COLUMNS) + [f"f{j}" for j in range(feature_dim)])
    for session in sessions:
        for item in session.items:
            writer.writerow(
                [
                    session.query_id,
                    item.item_id,
                    item.label,
                    f"{item.price:.9g}",
                    f"{item.cost:.9g}",
                    f"{item.base_utility:.9g}",
                ]
                + [f"{x:.9g}" for x in item.features]
            )


def sessions_to_csv_text(sessions: Iterable[QuerySession]) -> str:
    """Render sessions as one CSV string (convenience for tests and checksums)."""
    buffer = io.StringIO()
    emit_sessions(sessions, buffer)
    return buffer.getvalue()
