"""Average precision over a ranked candidate list."""

from __future__ import annotations

from typing import Iterable, Mapping

RELEVANT = "relevant"
IRRELEVANT = "irrelevant"


def is_relevant(label) -> bool:
    if isinstance(label, bool):
        return label
    if isinstance(label, int):
        return label > 0
    if label == RELEVANT:
        return True
    if label == IRRELEVANT:
        return False
    raise ValueError(f"unknown relevance label {label!r}")


def average_precision(ranked_ids: Iterable[str], qrels: Mapping[str, object]) -> float:
    """AP with the denominator taken as the number of relevant candidates.

    ``ranked_ids`` may also be a ``RankedList``. A query without any relevant
    candidate scores 0.0.
    """
    if hasattr(ranked_ids, "doc_ids"):
        ranked_ids = ranked_ids.doc_ids
    hits = 0
    total = 0.0
    for rank, doc_id in enumerate(ranked_ids, 1):
        if doc_id not in qrels:
            raise KeyError(f"no relevance label for ranked document {doc_id!r}")
        if is_relevant(qrels[doc_id]):
            hits += 1
            total += hits / rank
    n_relevant = sum(1 for v in qrels.values() if is_relevant(v))
    if n_relevant == 0:
        return 0.0
    return total / n_relevant


def mean(values: Iterable[float]) -> float:
    values = list(values)
    if not values:
        raise ValueError("mean of empty sequence")
    return sum(values) / len(values)
