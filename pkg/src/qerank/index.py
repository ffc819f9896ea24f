"""Inverted index and BM25 scoring over per-query candidate sets."""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, Mapping, Sequence

from ._io import atomic_write_text
from .metrics import average_precision, mean

if TYPE_CHECKING:
    from .expansion import ExpandedQuery

INDEX_FORMAT = "qerank-index"
INDEX_VERSION = 1

DEFAULT_K1_GRID = (0.4, 0.8, 1.2, 1.6, 2.0)
DEFAULT_B_GRID = (0.0, 0.25, 0.5, 0.75, 1.0)


@dataclass(frozen=True)
class Document:
    doc_id: str
    query_id: str
    raw_text: str
    terms: tuple[str, ...]

    @property
    def length(self) -> int:
        return len(self.terms)


@dataclass(frozen=True)
class Bm25Params:
    k1: float = 1.2
    b: float = 0.75

    def __post_init__(self):
        if not (self.k1 >= 0 and math.isfinite(self.k1)):
            raise ValueError(f"k1 must be a finite nonnegative number, got {self.k1}")
        if not 0 <= self.b <= 1:
            raise ValueError(f"b must lie in [0, 1], got {self.b}")


@dataclass(frozen=True)
class RankedEntry:
    doc_id: str
    score: float
    rank: int


@dataclass(frozen=True)
class RankedList:
    query_id: str
    entries: tuple[RankedEntry, ...]

    @property
    def doc_ids(self) -> list[str]:
        return [e.doc_id for e in self.entries]

    def __len__(self):
        return len(self.entries)


@dataclass
class InvertedIndex:
    """Postings plus the collection statistics BM25 needs.

    Treat as immutable once returned by :func:`build_index` or :func:`load_index`.
    """

    postings: dict[str, list[tuple[str, int]]]
    doc_lengths: dict[str, int]
    doc_freq: dict[str, int] = field(init=False)
    n_docs: int = field(init=False)
    avg_doc_length: float = field(init=False)
    _doc_tf: dict[str, dict[str, int]] = field(init=False, repr=False)

    def __post_init__(self):
        self.doc_freq = {t: len(p) for t, p in self.postings.items()}
        self.n_docs = len(self.doc_lengths)
        total = sum(self.doc_lengths.values())
        self.avg_doc_length = total / self.n_docs if self.n_docs else 0.0
        self._doc_tf = {d: {} for d in self.doc_lengths}
        for term, plist in self.postings.items():
            for doc_id, tf in plist:
                self._doc_tf[doc_id][term] = tf

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self.doc_lengths

    @property
    def vocab_size(self) -> int:
        return len(self.postings)

    def term_frequency(self, term: str, doc_id: str) -> int:
        return self._doc_tf[doc_id].get(term, 0)

    def idf(self, term: str) -> float:
        df = self.doc_freq.get(term, 0)
        return math.log(1.0 + (self.n_docs - df + 0.5) / (df + 0.5))


def build_index(docs: Iterable[Document]) -> InvertedIndex:
    postings: dict[str, list[tuple[str, int]]] = {}
    lengths: dict[str, int] = {}
    for doc in docs:
        if doc.doc_id in lengths:
            raise ValueError(f"duplicate doc_id {doc.doc_id!r}")
        lengths[doc.doc_id] = doc.length
        for term, tf in Counter(doc.terms).items():
            postings.setdefault(term, []).append((doc.doc_id, tf))
    return InvertedIndex(postings=postings, doc_lengths=lengths)


def _query_terms(query) -> tuple[str, list[str]]:
    if isinstance(query, (list, tuple)):
        return "", list(dict.fromkeys(query))
    return query.query_id, list(dict.fromkeys(query.tokens))


def bm25_score(
    index: InvertedIndex,
    query_terms: Iterable[str],
    doc_id: str,
    params: Bm25Params = Bm25Params(),
) -> float:
    """BM25 with the nonnegative idf ``ln(1 + (N - df + .5) / (df + .5))``.

    Repeated query terms count once.
    """
    if doc_id not in index.doc_lengths:
        raise KeyError(f"unknown doc_id {doc_id!r}")
    if index.n_docs == 0:
        raise ValueError("cannot score against an empty index")
    k1, b = params.k1, params.b
    doc_tf = index._doc_tf[doc_id]
    norm = 1.0 - b + b * index.doc_lengths[doc_id] / index.avg_doc_length if doc_tf else 0.0
    parts = []
    for term in dict.fromkeys(query_terms):
        tf = doc_tf.get(term, 0)
        if tf == 0:
            continue
        parts.append(index.idf(term) * (tf * (k1 + 1.0)) / (tf + k1 * norm))
    # fsum keeps permutation-equivalent documents exactly tied
    return math.fsum(parts)


def rerank_candidates(
    index: InvertedIndex,
    query: "ExpandedQuery | Sequence[str]",
    candidate_ids: Sequence[str],
    params: Bm25Params = Bm25Params(),
) -> RankedList:
    """Score only ``candidate_ids`` using whole-collection statistics."""
    query_id, terms = _query_terms(query)
    for doc_id in candidate_ids:
        if doc_id not in index.doc_lengths:
            raise KeyError(f"candidate {doc_id!r} is not in the index")
    scored = [(bm25_score(index, terms, d, params), d) for d in dict.fromkeys(candidate_ids)]
    # score descending, ties by doc_id descending: the order trec_eval imposes
    # on equal scores, so run files evaluate the same inside and outside
    scored.sort(key=lambda p: p[1], reverse=True)
    scored.sort(key=lambda p: -p[0])
    entries = tuple(RankedEntry(d, s, r) for r, (s, d) in enumerate(scored, 1))
    return RankedList(query_id=query_id, entries=entries)


@dataclass(frozen=True)
class LabeledQuery:
    query: "ExpandedQuery | Sequence[str]"
    candidates: tuple[str, ...]
    qrels: Mapping[str, str]


@dataclass(frozen=True)
class TuneResult:
    best: Bm25Params
    table: tuple[tuple[float, float, float], ...]

    def render(self) -> str:
        lines = ["k1\tb\tMAP"]
        for k1, b, m in self.table:
            lines.append(f"{k1:g}\t{b:g}\t{m * 100:.2f}")
        lines.append(f"best: k1={self.best.k1:g} b={self.best.b:g}")
        return "\n".join(lines)


def tune_params(
    index: InvertedIndex,
    queries: Sequence[LabeledQuery],
    k1_grid: Sequence[float] = DEFAULT_K1_GRID,
    b_grid: Sequence[float] = DEFAULT_B_GRID,
) -> TuneResult:
    """Grid search (k1, b) for dev MAP. Ties go to smaller k1, then smaller b."""
    if not queries:
        raise ValueError("tuning needs at least one dev query")
    grid = sorted({(float(k1), float(b)) for k1 in k1_grid for b in b_grid})
    if not grid:
        raise ValueError("empty parameter grid")
    table = []
    best, best_map = None, -1.0
    for k1, b in grid:
        params = Bm25Params(k1, b)
        m = mean(
            average_precision(rerank_candidates(index, q.query, q.candidates, params), q.qrels)
            for q in queries
        )
        table.append((k1, b, m))
        if m > best_map:
            best, best_map = params, m
    return TuneResult(best=best, table=tuple(table))


def save_index(index: InvertedIndex, path: str | Path) -> None:
    """Write the index as JSON lines: header, document lengths, postings."""
    lines = [json.dumps({"format": INDEX_FORMAT, "version": INDEX_VERSION, "n_docs": index.n_docs})]
    for doc_id in sorted(index.doc_lengths):
        lines.append(json.dumps({"doc": doc_id, "length": index.doc_lengths[doc_id]}))
    for term in sorted(index.postings):
        lines.append(json.dumps({"term": term, "postings": index.postings[term]}, ensure_ascii=False))
    atomic_write_text(path, "\n".join(lines) + "\n")


def load_index(path: str | Path) -> InvertedIndex:
    with open(path, encoding="utf-8") as fh:
        header = json.loads(fh.readline() or "{}")
        if header.get("format") != INDEX_FORMAT:
            raise ValueError(f"{path}: not a {INDEX_FORMAT} file")
        if header.get("version") != INDEX_VERSION:
            raise ValueError(f"{path}: unsupported index version {header.get('version')}")
        lengths: dict[str, int] = {}
        postings: dict[str, list[tuple[str, int]]] = {}
        for lineno, line in enumerate(fh, 2):
            if not line.strip():
                continue
            rec = json.loads(line)
            if "doc" in rec:
                lengths[rec["doc"]] = int(rec["length"])
            elif "term" in rec:
                postings[rec["term"]] = [(d, int(tf)) for d, tf in rec["postings"]]
            else:
                raise ValueError(f"{path}:{lineno}: unrecognized record")
    if len(lengths) != header.get("n_docs"):
        raise ValueError(f"{path}: header says {header.get('n_docs')} documents, found {len(lengths)}")
    return InvertedIndex(postings=postings, doc_lengths=lengths)
