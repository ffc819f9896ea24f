"""Query expansion sources and the union combinator.

Each expander receives the original query words (lowercased, punctuation and
stopwords removed, not stemmed) and returns analyzed expansion terms tagged
with where they came from. :func:`combine` takes the union of the keyword
query and every enabled expander, deduplicating on the analyzed token.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from typing import Iterable, Mapping, Protocol, Sequence

import numpy as np

from .analysis import AnalyzerConfig, analyze_phrase, query_words, word_to_term

logger = logging.getLogger(__name__)

SCENARIOS = ("EN", "MT")

# cosine similarities are compared at this many decimals so that numerically
# identical neighbors tie and fall back to the word order
SIMILARITY_DECIMALS = 12


class Source(str, Enum):
    KEYWORD = "keyword"
    WORD_EMBEDDING = "word_embedding"
    DBPEDIA = "dbpedia"
    HYPERNYM = "hypernym"

    @property
    def label(self) -> str:
        return SOURCE_LABELS[self]

    @classmethod
    def parse(cls, name: str) -> "Source":
        key = name.strip()
        for src in cls:
            if key.lower() == src.value or key.upper() == SOURCE_LABELS[src]:
                return src
        raise ValueError(f"unknown expansion source {name!r}")


SOURCE_LABELS = {
    Source.KEYWORD: "KW",
    Source.WORD_EMBEDDING: "WE",
    Source.DBPEDIA: "DB",
    Source.HYPERNYM: "HN",
}

# declaration order is also dedup precedence
PRECEDENCE = tuple(Source)


@dataclass(frozen=True)
class ExpansionTerm:
    term: str
    source: Source
    origin_query_term: str
    raw_value: str
    score: float | None = None

    def to_dict(self) -> dict:
        d = {
            "term": self.term,
            "source": self.source.value,
            "origin": self.origin_query_term,
            "raw": self.raw_value,
        }
        if self.score is not None:
            d["score"] = self.score
        return d


@dataclass(frozen=True)
class ExpandedQuery:
    query_id: str
    scenario: str
    enabled_sources: frozenset[Source]
    keyword_terms: tuple[str, ...]
    terms: tuple[ExpansionTerm, ...]
    contributions: Mapping[Source, tuple[ExpansionTerm, ...]] = field(default_factory=dict)

    @property
    def tokens(self) -> list[str]:
        return [t.term for t in self.terms]

    def by_source(self, source: Source) -> list[ExpansionTerm]:
        return [t for t in self.terms if t.source is source]

    def to_dict(self) -> dict:
        return {
            "query_id": self.query_id,
            "scenario": self.scenario,
            "enabled_sources": [s.value for s in PRECEDENCE if s in self.enabled_sources],
            "keyword_terms": list(self.keyword_terms),
            "terms": [t.to_dict() for t in self.terms],
            "contributions": {
                s.value: [t.to_dict() for t in self.contributions[s]]
                for s in PRECEDENCE
                if s in self.contributions
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False)


class EmbeddingStore:
    """Word vectors, L2-normalized once for cosine lookups."""

    def __init__(self, words: Sequence[str], vectors, malformed_lines: int = 0):
        vectors = np.asarray(vectors, dtype=np.float64)
        if len(words) == 0:
            raise ValueError("embedding store is empty")
        if vectors.ndim != 2 or vectors.shape[0] != len(words):
            raise ValueError("vectors must be a (n_words, dim) matrix")
        self.words: tuple[str, ...] = tuple(words)
        self.index = {w: i for i, w in enumerate(self.words)}
        if len(self.index) != len(self.words):
            raise ValueError("duplicate words in embedding store")
        norms = np.linalg.norm(vectors, axis=1, keepdims=True)
        norms[norms == 0] = 1.0
        self.raw = vectors
        self.unit = vectors / norms
        self.malformed_lines = malformed_lines

    @classmethod
    def from_dict(cls, mapping: Mapping[str, Sequence[float]]) -> "EmbeddingStore":
        words = [w.lower() for w in mapping]
        return cls(words, [mapping[w] for w in mapping])

    @property
    def dim(self) -> int:
        return self.raw.shape[1]

    def __len__(self):
        return len(self.words)

    def __contains__(self, word: str) -> bool:
        return word.lower() in self.index

    def vector(self, word: str) -> np.ndarray:
        return self.raw[self.index[word.lower()]]

    def similarities(self, word: str) -> np.ndarray:
        sims = self.unit @ self.unit[self.index[word.lower()]]
        return np.round(sims, SIMILARITY_DECIMALS)

    def nearest(self, word: str, k: int, accept=lambda w: True) -> list[tuple[str, float]]:
        """The ``k`` most cosine-similar accepted words, ties by word ascending.

        ``word`` itself is never returned.
        """
        if k < 1:
            raise ValueError("k must be >= 1")
        word = word.lower()
        if word not in self.index:
            return []
        sims = self.similarities(word)
        n = len(self.words)
        m = min(n, 4 * k + 16)
        while True:
            if m >= n:
                pool = np.arange(n)
            else:
                top = np.argpartition(-sims, m - 1)[:m]
                cutoff = sims[top].min()
                # widen to every word tied with the cutoff so the tie rule holds
                pool = np.flatnonzero(sims >= cutoff)
            ranked = sorted(pool.tolist(), key=lambda i: (-sims[i], self.words[i]))
            out = []
            for i in ranked:
                w = self.words[i]
                if w == word or not accept(w):
                    continue
                out.append((w, float(sims[i])))
                if len(out) == k:
                    return out
            if m >= n:
                return out
            m *= 4


@dataclass
class HypernymGraph:
    """hypernym word -> [(hyponym label, confidence)]"""

    edges: dict[str, list[tuple[str, float]]] = field(default_factory=dict)

    def __post_init__(self):
        for hyper, items in self.edges.items():
            for label, conf in items:
                if not 0.0 <= conf <= 1.0:
                    raise ValueError(f"confidence {conf} for {label!r} -> {hyper!r} outside [0, 1]")

    def hyponyms(self, word: str) -> list[tuple[str, float]]:
        return self.edges.get(word.lower(), [])


def strip_category(label: str) -> str:
    label = label.strip()
    if label.startswith("Category:"):
        label = label[len("Category:"):]
    return label.replace("_", " ").strip()


@dataclass
class KbEntry:
    subjects: list[str]
    fetched_at: str


class KbSubjectCache:
    """Concept key (lowercased word) -> subject labels."""

    def __init__(self, entries: Mapping[str, KbEntry] | None = None, provenance: str = "cached"):
        self.entries: dict[str, KbEntry] = {}
        self.provenance = provenance
        for key, entry in (entries or {}).items():
            self.put(key, entry.subjects, entry.fetched_at)

    def put(self, key: str, subjects: Iterable[str], fetched_at: str | None = None) -> None:
        labels = [strip_category(s) for s in subjects]
        labels = list(dict.fromkeys(s for s in labels if s))
        if fetched_at is None:
            fetched_at = datetime.now(timezone.utc).replace(microsecond=0).isoformat()
        self.entries[key.lower()] = KbEntry(labels, fetched_at)

    def __contains__(self, key: str) -> bool:
        return key.lower() in self.entries

    def __len__(self):
        return len(self.entries)

    def __eq__(self, other):
        return isinstance(other, KbSubjectCache) and self.entries == other.entries

    def lookup(self, key: str) -> list[str] | None:
        entry = self.entries.get(key.lower())
        return None if entry is None else entry.subjects


class SubjectLookup(Protocol):
    def lookup(self, key: str) -> list[str] | None: ...


def _unique_words(words: Iterable[str]) -> list[str]:
    return list(dict.fromkeys(w.lower() for w in words))


def _phrase_terms(
    raw: str,
    source: Source,
    origin: str,
    config: AnalyzerConfig,
    score: float | None = None,
) -> list[ExpansionTerm]:
    return [ExpansionTerm(t, source, origin, raw, score) for t in analyze_phrase(raw, config)]


def _dedup(terms: Iterable[ExpansionTerm]) -> tuple[ExpansionTerm, ...]:
    seen: dict[str, ExpansionTerm] = {}
    for t in terms:
        seen.setdefault(t.term, t)
    return tuple(seen.values())


def expand_keyword(query_terms: Sequence[str], config: AnalyzerConfig) -> tuple[ExpansionTerm, ...]:
    return _dedup(
        ExpansionTerm(word_to_term(w, config), Source.KEYWORD, w, w) for w in query_terms
    )


def expand_word_embedding(
    query_terms: Sequence[str],
    store: EmbeddingStore,
    k: int = 2,
    config: AnalyzerConfig | None = None,
) -> tuple[ExpansionTerm, ...]:
    """The ``k`` nearest vocabulary words of every in-vocabulary query word.

    Neighbors that are query words, stopwords, or that analyze to nothing
    (pure punctuation entries) are skipped.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if store is None or len(store) == 0:
        raise ValueError("embedding store is empty")
    config = config or AnalyzerConfig()
    words = _unique_words(query_terms)
    excluded = set(words) | config.stopwords

    def accept(w: str) -> bool:
        return w not in excluded and bool(analyze_phrase(w, config))

    out: list[ExpansionTerm] = []
    for q in words:
        for neighbor, sim in store.nearest(q, k, accept):
            out.extend(_phrase_terms(neighbor, Source.WORD_EMBEDDING, q, config, sim))
    return _dedup(out)


def expand_dbpedia(
    query_terms: Sequence[str],
    kb: SubjectLookup,
    config: AnalyzerConfig | None = None,
    max_subjects: int | None = None,
) -> tuple[ExpansionTerm, ...]:
    """Analyzed tokens of every subject linked to each query word's concept."""
    config = config or AnalyzerConfig()
    out: list[ExpansionTerm] = []
    for q in _unique_words(query_terms):
        subjects = kb.lookup(q) or []
        if max_subjects is not None:
            subjects = subjects[:max_subjects]
        for subject in subjects:
            out.extend(_phrase_terms(subject, Source.DBPEDIA, q, config))
    return _dedup(out)


def expand_hypernym(
    query_terms: Sequence[str],
    graph: HypernymGraph,
    threshold: float = 0.75,
    config: AnalyzerConfig | None = None,
) -> tuple[ExpansionTerm, ...]:
    """Analyzed hyponym labels with confidence >= ``threshold``."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must lie in [0, 1], got {threshold}")
    config = config or AnalyzerConfig()
    out: list[ExpansionTerm] = []
    for q in _unique_words(query_terms):
        for label, conf in graph.hyponyms(q):
            if conf >= threshold:
                out.extend(_phrase_terms(label, Source.HYPERNYM, q, config, conf))
    return _dedup(out)


@dataclass
class Resources:
    analyzer: AnalyzerConfig = field(default_factory=AnalyzerConfig)
    embeddings: EmbeddingStore | None = None
    kb: SubjectLookup | None = None
    hypernyms: HypernymGraph | None = None
    k_neighbors: int = 2
    hypernym_threshold: float = 0.75
    max_subjects: int | None = None

    def __post_init__(self):
        if self.k_neighbors < 1:
            raise ValueError("k_neighbors must be >= 1")
        if not 0.0 <= self.hypernym_threshold <= 1.0:
            raise ValueError("hypernym_threshold must lie in [0, 1]")


def combine(
    query_id: str,
    scenario: str,
    original_text: str,
    enabled: Iterable[Source | str],
    resources: Resources,
) -> ExpandedQuery:
    """Union of the keyword query and every enabled expansion source."""
    enabled = frozenset(s if isinstance(s, Source) else Source.parse(s) for s in enabled)
    if not enabled:
        raise ValueError("at least one source must be enabled")
    if scenario not in SCENARIOS:
        raise ValueError(f"scenario must be one of {SCENARIOS}, got {scenario!r}")
    config = resources.analyzer
    words = _unique_words(query_words(original_text, config))
    keyword = expand_keyword(words, config)

    contributions: dict[Source, tuple[ExpansionTerm, ...]] = {}
    if Source.KEYWORD in enabled:
        contributions[Source.KEYWORD] = keyword
    if Source.WORD_EMBEDDING in enabled:
        if resources.embeddings is None:
            raise ValueError("word embedding expansion needs an embedding store")
        contributions[Source.WORD_EMBEDDING] = expand_word_embedding(
            words, resources.embeddings, resources.k_neighbors, config
        )
    if Source.DBPEDIA in enabled:
        if resources.kb is None:
            raise ValueError("DBpedia expansion needs a subject cache or client")
        contributions[Source.DBPEDIA] = expand_dbpedia(
            words, resources.kb, config, resources.max_subjects
        )
    if Source.HYPERNYM in enabled:
        if resources.hypernyms is None:
            raise ValueError("hypernym expansion needs a hypernym graph")
        contributions[Source.HYPERNYM] = expand_hypernym(
            words, resources.hypernyms, resources.hypernym_threshold, config
        )

    union = _dedup(t for s in PRECEDENCE for t in contributions.get(s, ()))
    return ExpandedQuery(
        query_id=query_id,
        scenario=scenario,
        enabled_sources=enabled,
        keyword_terms=tuple(t.term for t in keyword),
        terms=union,
        contributions=contributions,
    )


def expansion_stats(queries: Sequence[ExpandedQuery]) -> dict[str, float]:
    """Mean keyword length and mean words added per source and overall.

    A source's additions are its distinct tokens not already in the keyword
    query, counted before cross-source deduplication.
    """
    if not queries:
        raise ValueError("expansion_stats needs at least one query")
    n = len(queries)
    stats = {"keyword": sum(len(set(q.keyword_terms)) for q in queries) / n}
    for src in PRECEDENCE[1:]:
        added = 0
        for q in queries:
            kw = set(q.keyword_terms)
            added += len({t.term for t in q.contributions.get(src, ())} - kw)
        stats[src.value] = added / n
    stats["total_added"] = sum(len(set(q.tokens) - set(q.keyword_terms)) for q in queries) / n
    return stats
