"""Query-expanded BM25 re-ranking of community questions."""

from .analysis import AnalyzerConfig, Stemmer, analyze, analyze_phrase
from .expansion import (
    EmbeddingStore,
    ExpandedQuery,
    ExpansionTerm,
    HypernymGraph,
    KbSubjectCache,
    Resources,
    Source,
    combine,
    expand_dbpedia,
    expand_hypernym,
    expand_word_embedding,
    expansion_stats,
)
from .index import (
    Bm25Params,
    Document,
    InvertedIndex,
    RankedList,
    bm25_score,
    build_index,
    load_index,
    rerank_candidates,
    save_index,
    tune_params,
)
from .metrics import average_precision

__version__ = "0.1.0"
