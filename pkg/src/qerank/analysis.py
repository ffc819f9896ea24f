"""English text analysis shared by indexing, querying and expansion.

The pipeline is: lowercase, split on anything that is not a letter, mark or
digit, drop stopwords, stem. Every stage is deterministic so that documents
and queries always land in the same term space.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable

from nltk.stem.porter import PorterStemmer


class Stemmer(str, Enum):
    NONE = "none"
    LIGHT = "english-light"
    PORTER = "porter"


def parse_stopwords(lines: Iterable[str]) -> tuple[str, ...]:
    """Parse a stopword file body: one word per line, ``#`` comments."""
    words: dict[str, None] = {}
    for lineno, raw in enumerate(lines, 1):
        word = raw.strip()
        if not word or word.startswith("#"):
            continue
        word = word.lower()
        if any(ch.isspace() for ch in word):
            raise ValueError(f"stopword on line {lineno} contains whitespace: {raw!r}")
        words.setdefault(word, None)
    return tuple(words)


def load_stopwords(path: str | Path) -> tuple[str, ...]:
    with open(path, encoding="utf-8") as fh:
        return parse_stopwords(fh)


@lru_cache(maxsize=1)
def default_stopwords() -> tuple[str, ...]:
    text = resources.files("qerank").joinpath("data/stopwords.txt").read_text("utf-8")
    return parse_stopwords(text.splitlines())


@dataclass(frozen=True)
class AnalyzerConfig:
    stopword_list: tuple[str, ...] = field(default_factory=default_stopwords)
    stemmer: Stemmer = Stemmer.LIGHT
    strip_punctuation: bool = True

    def __post_init__(self):
        object.__setattr__(self, "stemmer", Stemmer(self.stemmer))
        words = tuple(dict.fromkeys(self.stopword_list))
        for w in words:
            if w != w.lower() or not w or any(ch.isspace() for ch in w):
                raise ValueError(f"invalid stopword {w!r}")
        object.__setattr__(self, "stopword_list", words)

    @property
    def stopwords(self) -> frozenset[str]:
        return _as_set(self.stopword_list)


@lru_cache(maxsize=32)
def _as_set(words: tuple[str, ...]) -> frozenset[str]:
    return frozenset(words)


_porter = PorterStemmer()


def light_stem(word: str) -> str:
    """Minimal English plural stemmer (``-ies``/``-es``/``-s`` folding)."""
    n = len(word)
    if n < 3 or word[-1] != "s":
        return word
    prev = word[-2]
    if prev in "us":
        return word
    if prev == "e":
        if n > 3 and word[-3] == "i" and word[-4] not in "ae":
            return word[:-3] + "y"
        if word[-3] in "iaoe":
            return word
    return word[:-1]


def stem(word: str, stemmer: Stemmer) -> str:
    if stemmer is Stemmer.LIGHT:
        return light_stem(word)
    if stemmer is Stemmer.PORTER:
        return _porter.stem(word, to_lowercase=False)
    return word


def _is_word_char(ch: str) -> bool:
    return unicodedata.category(ch)[0] in "LMN"


def _split(text: str, strip_punctuation: bool) -> list[str]:
    if not strip_punctuation:
        return text.split()
    out: list[str] = []
    buf: list[str] = []
    for ch in text:
        if _is_word_char(ch):
            buf.append(ch)
        elif buf:
            out.append("".join(buf))
            buf = []
    if buf:
        out.append("".join(buf))
    return out


def query_words(text: str, config: AnalyzerConfig) -> list[str]:
    """Lowercased, punctuation-split, stopword-filtered words, *not* stemmed.

    These are the surface forms handed to the expanders, since embedding
    vocabularies and knowledge-base keys are not stems.
    """
    stop = config.stopwords
    return [w for w in _split(text.lower(), config.strip_punctuation) if w not in stop]


def word_to_term(word: str, config: AnalyzerConfig) -> str:
    """Stem one already-filtered word."""
    term = stem(word, config.stemmer)
    # a stem that collides with a stopword keeps its surface form
    if not term or term in config.stopwords:
        return word
    return term


def analyze(text: str, config: AnalyzerConfig | None = None) -> list[str]:
    """Analyze raw text into index terms, preserving word order."""
    if config is None:
        config = AnalyzerConfig()
    return [word_to_term(w, config) for w in query_words(text, config)]


def analyze_phrase(phrase: str, config: AnalyzerConfig | None = None) -> list[str]:
    """Entry point for multi-word expansion values; same semantics as :func:`analyze`."""
    return analyze(phrase, config)
