import threading

import pytest

from conftest import FakeSparql
from qerank.expansion import KbSubjectCache, expand_dbpedia
from qerank.ingestion import load_kb_cache
from qerank.kb import CachedSubjectLookup, KbFetchError, OfflineError, SparqlSubjectClient, subject_label


def test_subject_label():
    assert subject_label("http://dbpedia.org/resource/Category:Tourist_activities") == "Tourist activities"
    assert subject_label("Category:Months") == "Months"


def test_fetch_travel_writes_through(server, tmp_path):
    path = tmp_path / "kb.jsonl"
    lookup = CachedSubjectLookup(KbSubjectCache(), SparqlSubjectClient(server, min_interval=0), path)
    report = lookup.fetch(["travel", "nothingness"])
    assert report.status == {"travel": "ok", "nothingness": "miss"}
    cache = load_kb_cache(path)
    assert cache.lookup("travel") == ["Tourism", "Tourist activities", "Transport culture"]
    assert cache.lookup("nothingness") == []


def test_cached_terms_cost_no_requests(server, tmp_path):
    cache = KbSubjectCache()
    cache.put("travel", ["Tourism"])
    client = SparqlSubjectClient(server, min_interval=0)
    lookup = CachedSubjectLookup(cache, client, tmp_path / "kb.jsonl")
    report = lookup.fetch(["travel", "Travel"])
    assert client.requests_made == 0 and FakeSparql.hits == []
    assert report.status == {"travel": "cached"}


def test_soft_failure_keeps_expanding(server):
    lookup = CachedSubjectLookup(KbSubjectCache(), SparqlSubjectClient(server, min_interval=0))
    terms = expand_dbpedia(["boom", "travel"], lookup)
    assert {t.origin_query_term for t in terms} == {"travel"}
    assert lookup.report.status["boom"] == "error"
    assert "boom" not in lookup.cache


def test_unreachable_endpoint_is_soft():
    client = SparqlSubjectClient("http://127.0.0.1:9/sparql", min_interval=0, timeout=0.5)
    lookup = CachedSubjectLookup(KbSubjectCache(), client)
    assert expand_dbpedia(["travel"], lookup) == ()
    assert lookup.report.status == {"travel": "error"}
    with pytest.raises(KbFetchError):
        client.fetch_subjects("travel")


def test_live_and_cached_agree(server, tmp_path):
    path = tmp_path / "kb.jsonl"
    live = CachedSubjectLookup(KbSubjectCache(), SparqlSubjectClient(server, min_interval=0), path)
    a = expand_dbpedia(["travel", "june"], live)
    b = expand_dbpedia(["travel", "june"], load_kb_cache(path))
    assert a == b


def test_rate_limit(server):
    client = SparqlSubjectClient(server, min_interval=0.2)
    threads = [threading.Thread(target=client.fetch_subjects, args=(w,)) for w in ("a", "b", "c")]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    times = sorted(t for t, _ in FakeSparql.hits)
    assert len(times) == 3
    assert all(b - a >= 0.19 for a, b in zip(times, times[1:]))


def test_offline_refuses(server):
    lookup = CachedSubjectLookup(KbSubjectCache(), SparqlSubjectClient(server), offline=True)
    assert lookup.client is None
    with pytest.raises(OfflineError):
        lookup.fetch(["travel"])
    assert expand_dbpedia(["travel"], lookup) == ()
    assert FakeSparql.hits == []
