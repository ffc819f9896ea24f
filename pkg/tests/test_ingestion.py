import json
import textwrap

import pytest

from conftest import FIXTURES
from qerank.expansion import KbSubjectCache
from qerank.ingestion import (
    DatasetError,
    check_alignment,
    collect_documents,
    convert_semeval_xml,
    load_dataset,
    load_embeddings,
    load_hypernym_graph,
    load_kb_cache,
    save_kb_cache,
    write_dataset,
)


def record(qid="Q1", n=10, scenario="EN", text="new question text", **kw):
    cands = [
        {"doc_id": f"{qid}_R{i}", "text": f"candidate {i} text", "relevance": "Relevant" if i == 0 else "Irrelevant"}
        for i in range(n)
    ]
    return dict({"query_id": qid, "scenario": scenario, "text": text, "candidates": cands}, **kw)


def test_fixture_one_query(tmp_path):
    p = tmp_path / "d.jsonl"
    write_dataset([record()], p)
    split = load_dataset(p, "EN", "dev")
    assert len(split.queries) == 1 and len(split.documents) == 10
    q = split.queries[0]
    assert set(q.candidates) == set(q.qrels)
    assert q.qrels["Q1_R0"] == "relevant" and q.qrels["Q1_R5"] == "irrelevant"
    assert all(d.length == len(d.terms) for d in split.documents)
    assert {d.query_id for d in split.documents} == {"Q1"}


def test_label_mapping(tmp_path):
    rec = record()
    rec["candidates"][1]["relevance"] = "PerfectMatch"
    rec["candidates"][2]["relevance"] = "irrelevant"
    p = tmp_path / "d.jsonl"
    write_dataset([rec], p)
    q = load_dataset(p).queries[0]
    assert q.qrels["Q1_R1"] == "relevant" and q.qrels["Q1_R2"] == "irrelevant"


def test_subject_body_joined(tmp_path):
    rec = record()
    del rec["text"]
    rec["subject"], rec["body"] = "Visa renewal", "How long does it take?"
    p = tmp_path / "d.jsonl"
    write_dataset([rec], p)
    assert load_dataset(p).queries[0].text == "Visa renewal How long does it take?"


@pytest.mark.parametrize(
    "records, match",
    [
        ([record(n=9)], "9 candidates"),
        ([record(), record()], "duplicate query_id 'Q1'"),
        ([record(scenario="MT")], "scenario"),
    ],
)
def test_hard_errors(tmp_path, records, match):
    p = tmp_path / "d.jsonl"
    write_dataset(records, p)
    with pytest.raises(DatasetError, match=match):
        load_dataset(p, "EN")


def test_unknown_label(tmp_path):
    rec = record()
    rec["candidates"][0]["relevance"] = "Maybe"
    p = tmp_path / "d.jsonl"
    write_dataset([rec], p)
    with pytest.raises(DatasetError, match="Maybe"):
        load_dataset(p)


def test_configurable_candidate_count(tmp_path):
    p = tmp_path / "d.jsonl"
    write_dataset([record(n=3)], p)
    assert len(load_dataset(p, expected_candidates=3).documents) == 3
    assert len(load_dataset(p, expected_candidates=None).documents) == 3


def test_fixture_splits_align():
    for name in ("dev", "test"):
        en = load_dataset(FIXTURES / f"en_{name}.jsonl", "EN", name)
        mt = load_dataset(FIXTURES / f"mt_{name}.jsonl", "MT", name)
        check_alignment(en, mt)
        assert [q.text for q in en.queries] != [q.text for q in mt.queries]
        assert len(collect_documents([en, mt])) == 10 * len(en.queries)


def test_misaligned_splits(tmp_path):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    write_dataset([record()], a)
    rec = record(scenario="MT")
    rec["candidates"][0]["relevance"] = "Irrelevant"
    write_dataset([rec], b)
    with pytest.raises(DatasetError):
        check_alignment(load_dataset(a), load_dataset(b))


def test_collect_rejects_conflicting_text(tmp_path):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    write_dataset([record()], a)
    rec = record()
    rec["candidates"][3]["text"] = "different"
    write_dataset([rec], b)
    with pytest.raises(DatasetError, match="Q1_R3"):
        collect_documents([load_dataset(a), load_dataset(b)])


# -- embeddings ---------------------------------------------------------------


def test_embeddings_toy(tmp_path):
    p = tmp_path / "e.txt"
    p.write_text("a 1 0 0 0\nB 0 1 0 0\nc 0 0 1 0\n")
    store = load_embeddings(p)
    assert len(store) == 3 and store.dim == 4
    assert "b" in store


def test_embeddings_dimension_guard(tmp_path):
    p = tmp_path / "e.txt"
    p.write_text("a 1 0 0 0\nb 0 1 0\nc 0 0 1 0\n")
    with pytest.raises(ValueError, match=":2"):
        load_embeddings(p)


def test_embeddings_malformed_and_duplicates(tmp_path):
    p = tmp_path / "e.txt"
    p.write_text("a 1 0\nbad x y\nlonely\na 5 5\nb 0 1\n")
    store = load_embeddings(p)
    assert store.words == ("a", "b")
    assert store.malformed_lines == 2
    assert list(store.vector("a")) == [1.0, 0.0]


def test_embeddings_empty(tmp_path):
    p = tmp_path / "e.txt"
    p.write_text("junk\n")
    with pytest.raises(ValueError):
        load_embeddings(p)


def test_fixture_embeddings():
    store = load_embeddings(FIXTURES / "embeddings.txt")
    assert store.dim == 5
    assert {"travel", "travelers", "trips", ","} <= set(store.words)


# -- hypernym graph -------------------------------------------------------------


def test_hypernym_rows(tmp_path):
    p = tmp_path / "h.tsv"
    p.write_text("hyponym\thypernym\tconfidence\noperating expense\ttravel\t0.82\nx\tTravel\t0.6\nx\ttravel\t0.9\n")
    g = load_hypernym_graph(p)
    assert ("operating expense", 0.82) in g.edges["travel"]
    assert g.edges["travel"].count(("x", 0.9)) == 1
    assert len(g.edges["travel"]) == 2


def test_hypernym_empty_file(tmp_path):
    p = tmp_path / "h.tsv"
    p.write_text("")
    assert load_hypernym_graph(p).edges == {}


@pytest.mark.parametrize("body, match", [("a\tb\tlots\nc\td\tnope\n", ":2"), ("a\tb\t1.5\n", ":1"), ("a\tb\n", ":1")])
def test_hypernym_errors(tmp_path, body, match):
    p = tmp_path / "h.tsv"
    p.write_text(body)
    with pytest.raises(ValueError, match=match):
        load_hypernym_graph(p)


# -- KB cache -------------------------------------------------------------------


def test_kb_cache_travel_entry(tmp_path):
    p = tmp_path / "kb.jsonl"
    p.write_text(json.dumps({"key": "travel", "subjects": ["Tourism", "Tourist activities", "Transport culture"],
                             "fetched_at": "2019-01-01T00:00:00+00:00", "extra": 1}) + "\n")
    cache = load_kb_cache(p)
    assert cache.lookup("Travel") == ["Tourism", "Tourist activities", "Transport culture"]


def test_kb_cache_empty_and_round_trip(tmp_path):
    p = tmp_path / "kb.jsonl"
    p.write_text("")
    assert len(load_kb_cache(p)) == 0
    cache = KbSubjectCache()
    cache.put("travel", ["Tourism"], "2019-01-01T00:00:00+00:00")
    cache.put("june", ["Months"], "2019-01-02T00:00:00+00:00")
    save_kb_cache(cache, p)
    assert load_kb_cache(p) == cache


def test_kb_cache_malformed(tmp_path):
    p = tmp_path / "kb.jsonl"
    p.write_text('{"key": "a", "subjects": []}\n{"key": 3}\n')
    with pytest.raises(ValueError, match=":2"):
        load_kb_cache(p)


# -- XML conversion ---------------------------------------------------------------

XML = textwrap.dedent(
    """\
    <xml>
    <OrgQuestion ORGQ_ID="Q268">
      <OrgQSubject>Travel in june</OrgQSubject>
      <OrgQBody>Where to go?</OrgQBody>
      <Thread THREAD_SEQUENCE="Q268_R2">
        <RelQuestion RELQ_ID="Q268_R2" RELQ_RANKING_ORDER="2" RELQ_RELEVANCE2ORGQ="Irrelevant">
          <RelQSubject>Car</RelQSubject><RelQBody>selling a car</RelQBody>
        </RelQuestion>
      </Thread>
    </OrgQuestion>
    <OrgQuestion ORGQ_ID="Q268">
      <OrgQSubject>Travel in june</OrgQSubject>
      <OrgQBody>Where to go?</OrgQBody>
      <Thread THREAD_SEQUENCE="Q268_R1">
        <RelQuestion RELQ_ID="Q268_R1" RELQ_RANKING_ORDER="1" RELQ_RELEVANCE2ORGQ="PerfectMatch">
          <RelQSubject>Holiday</RelQSubject><RelQBody>best trips</RelQBody>
        </RelQuestion>
      </Thread>
    </OrgQuestion>
    </xml>
    """
)


def test_convert_semeval_xml(tmp_path):
    p = tmp_path / "q.xml"
    p.write_text(XML)
    recs = convert_semeval_xml(p)
    assert len(recs) == 1
    assert recs[0]["text"] == "Travel in june Where to go?"
    assert [c["doc_id"] for c in recs[0]["candidates"]] == ["Q268_R1", "Q268_R2"]
    assert [c["relevance"] for c in recs[0]["candidates"]] == ["relevant", "irrelevant"]
    mt = convert_semeval_xml(p, "MT", {"Q268": "journey at june"})
    assert mt[0]["text"] == "journey at june" and mt[0]["scenario"] == "MT"
    out = tmp_path / "d.jsonl"
    write_dataset(recs, out)
    assert len(load_dataset(out, expected_candidates=2).queries) == 1
