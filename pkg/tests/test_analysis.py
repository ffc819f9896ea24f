import unicodedata

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qerank.analysis import (
    AnalyzerConfig,
    Stemmer,
    analyze,
    analyze_phrase,
    default_stopwords,
    light_stem,
    load_stopwords,
    parse_stopwords,
    query_words,
)

TRAVEL = "Im likely to travel in the month of june... just wanna know some good places to visit...."

PORTER = AnalyzerConfig(stemmer=Stemmer.PORTER)
NONE = AnalyzerConfig(stemmer=Stemmer.NONE)
LIGHT = AnalyzerConfig()


def test_default_stopwords_are_the_33_word_list():
    words = default_stopwords()
    assert len(words) == 33
    assert {"the", "to", "in", "of", "a", "with"} <= set(words)


def test_travel_query_keeps_content_words():
    tokens = analyze(TRAVEL)
    for t in ("travel", "month", "june"):
        assert t in tokens
    for stop in ("to", "in", "the", "of"):
        assert stop not in tokens


def test_empty_and_all_stopwords():
    assert analyze("") == []
    assert analyze("The THE the!!!") == []
    assert analyze_phrase("of the") == []


@pytest.mark.parametrize(
    "config, expected",
    [(PORTER, ["tourist", "activ"]), (NONE, ["tourist", "activities"]), (LIGHT, ["tourist", "activity"])],
)
def test_phrase_per_stemmer(config, expected):
    assert analyze_phrase("Tourist activities", config) == expected


def test_single_word_phrase():
    assert analyze_phrase("Tourism") == ["tourism"]


@pytest.mark.parametrize(
    "word, stem",
    [("trips", "trip"), ("travelers", "traveler"), ("activities", "activity"), ("class", "class"),
     ("bus", "bus"), ("shoes", "shoes"), ("toes", "toes"), ("ties", "ty"), ("cars", "car"), ("is", "is"), ("june", "june")],
)
def test_light_stemmer(word, stem):
    assert light_stem(word) == stem


def test_ellipsis_and_unicode_punctuation_split():
    assert analyze("june...just", NONE) == ["june", "just"]
    assert analyze("visit\u2026places\u2014now", NONE) == ["visit", "places", "now"]
    assert analyze("I'm", NONE) == ["i", "m"]


def test_stem_colliding_with_stopword_keeps_surface_form():
    # "its" would light-stem to the stopword "it"
    assert analyze("its", LIGHT) == ["its"]


def test_query_words_are_unstemmed():
    assert query_words("Good places to visit", LIGHT) == ["good", "places", "visit"]


def test_stopword_file(tmp_path):
    p = tmp_path / "stop.txt"
    p.write_text("# comment\nFoo\nbar\n\nfoo\n", encoding="utf-8")
    assert load_stopwords(p) == ("foo", "bar")
    with pytest.raises(ValueError):
        parse_stopwords(["two words"])


def test_config_rejects_bad_stopwords():
    with pytest.raises(ValueError):
        AnalyzerConfig(stopword_list=("Upper",))


text_st = st.text(
    alphabet=st.characters(blacklist_categories=("Cs",)),
    max_size=60,
) | st.lists(st.sampled_from(["the", "Travel", "trips", "...", "!", " ", "june", "its", "é", "…"])).map(" ".join)


@settings(max_examples=200)
@given(text_st, st.sampled_from(list(Stemmer)))
def test_tokens_are_clean_and_deterministic(text, stemmer):
    config = AnalyzerConfig(stemmer=stemmer)
    tokens = analyze(text, config)
    assert tokens == analyze(text, config)
    for t in tokens:
        assert t
        assert not any(ch.isspace() for ch in t)
        assert not any(unicodedata.category(ch).startswith("P") for ch in t)
        assert t not in config.stopwords


@settings(max_examples=200)
@given(text_st, st.sampled_from(list(Stemmer)))
def test_tokens_are_fixed_points(text, stemmer):
    for t in analyze(text, AnalyzerConfig(stemmer=stemmer)):
        assert analyze(t, NONE) == [t]


@settings(max_examples=200)
@given(text_st)
def test_reanalysis_idempotent_without_stemming(text):
    tokens = analyze(text, NONE)
    assert analyze(" ".join(tokens), NONE) == tokens
