import json
import math
import shutil
import threading
import time
from collections import Counter
from http.server import BaseHTTPRequestHandler, HTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

import pytest

FIXTURES = Path(__file__).parent / "fixtures"

ACCEPTANCE_RESULTS: list[tuple[str, str]] = []


@pytest.fixture
def fixture_dir(tmp_path):
    """A writable copy of tests/fixtures."""
    dest = tmp_path / "fixtures"
    shutil.copytree(FIXTURES, dest)
    return dest


# -- fake SPARQL endpoint ------------------------------------------------------

SUBJECTS = {
    "Travel": [
        "http://dbpedia.org/resource/Category:Tourism",
        "http://dbpedia.org/resource/Category:Tourist_activities",
        "http://dbpedia.org/resource/Category:Transport_culture",
    ],
}


class FakeSparql(BaseHTTPRequestHandler):
    hits: list = []

    def do_GET(self):
        query = parse_qs(urlparse(self.path).query)["query"][0]
        FakeSparql.hits.append((time.monotonic(), query))
        if "Boom" in query:
            self.send_response(500)
            self.end_headers()
            return
        name = query.split("/resource/")[1].split(">")[0]
        rows = [{"subject": {"type": "uri", "value": v}} for v in SUBJECTS.get(name, [])]
        body = json.dumps({"head": {"vars": ["subject"]}, "results": {"bindings": rows}}).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/sparql-results+json")
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *args):
        pass


@pytest.fixture
def server():
    FakeSparql.hits = []
    srv = HTTPServer(("127.0.0.1", 0), FakeSparql)
    t = threading.Thread(target=srv.serve_forever, daemon=True)
    t.start()
    yield f"http://127.0.0.1:{srv.server_port}/sparql"
    srv.shutdown()


def oracle_bm25(docs: dict[str, list[str]], query: list[str], doc_id: str, k1: float, b: float) -> float:
    """Textbook BM25 straight from raw token lists, no index involved."""
    n = len(docs)
    avgdl = sum(len(t) for t in docs.values()) / n
    dl = len(docs[doc_id])
    total = 0.0
    for term in sorted(set(query)):
        f = docs[doc_id].count(term)
        if f == 0:
            continue
        df = sum(1 for t in docs.values() if term in t)
        idf = math.log(1 + (n - df + 0.5) / (df + 0.5))
        total += idf * f * (k1 + 1) / (f + k1 * (1 - b + b * dl / avgdl))
    return total


def oracle_ap(ranked: list[str], relevant: set[str]) -> float:
    """AP by enumerating the precision of every prefix ending on a relevant doc."""
    if not relevant:
        return 0.0
    precisions = []
    for cut in range(1, len(ranked) + 1):
        if ranked[cut - 1] in relevant:
            prefix = ranked[:cut]
            precisions.append(Counter(d in relevant for d in prefix)[True] / cut)
    return sum(precisions) / len(relevant)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, status in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{status:<4} {name}")
