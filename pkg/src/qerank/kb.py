"""Knowledge-base subject lookups: a rate-limited SPARQL client and a
cache-first resolver that writes every live fetch through to the cache file.
"""

from __future__ import annotations

import logging
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from urllib.parse import quote, unquote

import requests

from .expansion import KbSubjectCache, strip_category

logger = logging.getLogger(__name__)

ENDPOINT_ENV = "QERANK_KB_ENDPOINT"

DEFAULT_QUERY_TEMPLATE = (
    "PREFIX dct: <http://purl.org/dc/terms/> "
    "SELECT ?subject WHERE {{ <{resource}> dct:subject ?subject }}"
)
DEFAULT_RESOURCE_TEMPLATE = "http://dbpedia.org/resource/{name}"


class KbFetchError(RuntimeError):
    pass


class OfflineError(RuntimeError):
    pass


def concept_name(word: str) -> str:
    """Resource name for a query word: first letter upper-cased, spaces to underscores."""
    word = word.strip().replace(" ", "_")
    return word[:1].upper() + word[1:]


def subject_label(value: str) -> str:
    """Turn a subject URI or label into a plain label."""
    if "://" in value:
        value = unquote(value.rstrip("/").rsplit("/", 1)[-1])
    return strip_category(value)


@dataclass
class SparqlSubjectClient:
    """Issues one subject-property query per term; at most one request in flight."""

    endpoint: str
    query_template: str = DEFAULT_QUERY_TEMPLATE
    resource_template: str = DEFAULT_RESOURCE_TEMPLATE
    auth_token: str | None = None
    min_interval: float = 1.0
    timeout: float = 30.0
    session: requests.Session = field(default_factory=requests.Session, repr=False)
    requests_made: int = field(default=0, init=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, init=False, repr=False)
    _last: float = field(default=float("-inf"), init=False, repr=False)

    def fetch_subjects(self, word: str) -> list[str]:
        resource = self.resource_template.format(name=quote(concept_name(word), safe="_()'"))
        query = self.query_template.format(resource=resource)
        headers = {"Accept": "application/sparql-results+json"}
        if self.auth_token:
            headers["Authorization"] = f"Bearer {self.auth_token}"
        with self._lock:
            wait = self._last + self.min_interval - time.monotonic()
            if wait > 0:
                time.sleep(wait)
            try:
                resp = self.session.get(
                    self.endpoint,
                    params={"query": query, "format": "application/sparql-results+json"},
                    headers=headers,
                    timeout=self.timeout,
                )
                resp.raise_for_status()
                payload = resp.json()
            except (requests.RequestException, ValueError) as exc:
                raise KbFetchError(f"lookup for {word!r} failed: {exc}") from exc
            finally:
                self.requests_made += 1
                self._last = time.monotonic()
        try:
            bindings = payload["results"]["bindings"]
        except (KeyError, TypeError) as exc:
            raise KbFetchError(f"lookup for {word!r}: malformed SPARQL response") from exc
        labels = []
        for row in bindings:
            cell = row.get("subject") or next(iter(row.values()), None)
            if cell and cell.get("value"):
                label = subject_label(cell["value"])
                if label:
                    labels.append(label)
        return list(dict.fromkeys(labels))


@dataclass
class FetchReport:
    status: dict[str, str] = field(default_factory=dict)
    errors: dict[str, str] = field(default_factory=dict)

    def record(self, key: str, status: str, error: str | None = None) -> None:
        self.status[key] = status
        if error:
            self.errors[key] = error

    def counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for s in self.status.values():
            out[s] = out.get(s, 0) + 1
        return out

    def render(self) -> str:
        lines = []
        for key in sorted(self.status):
            line = f"{key}\t{self.status[key]}"
            if key in self.errors:
                line += f"\t{self.errors[key]}"
            lines.append(line)
        return "\n".join(lines)


class CachedSubjectLookup:
    """Cache-first subject resolution.

    Misses go to ``client`` unless offline or no client is configured; the
    result (including "no subjects") is stored and written to ``cache_path``.
    Network failures are recorded in ``report`` and resolve to no subjects.
    """

    def __init__(
        self,
        cache: KbSubjectCache,
        client: SparqlSubjectClient | None = None,
        cache_path: str | Path | None = None,
        offline: bool = False,
    ):
        self.cache = cache
        self.client = None if offline else client
        self.cache_path = cache_path
        self.offline = offline
        self.report = FetchReport()

    def lookup(self, key: str) -> list[str] | None:
        key = key.lower()
        hit = self.cache.lookup(key)
        if hit is not None or self.client is None:
            return hit
        try:
            subjects = self.client.fetch_subjects(key)
        except KbFetchError as exc:
            logger.warning("%s", exc)
            self.report.record(key, "error", str(exc))
            return None
        self.cache.put(key, subjects)
        self.report.record(key, "ok" if subjects else "miss")
        if self.cache_path is not None:
            from .ingestion import save_kb_cache

            save_kb_cache(self.cache, self.cache_path)
        return self.cache.lookup(key)

    def fetch(self, keys) -> FetchReport:
        """Populate the cache for ``keys``; already-cached keys cost nothing."""
        if self.offline:
            raise OfflineError("refusing to fetch knowledge-base subjects in offline mode")
        if self.client is None:
            raise KbFetchError(f"no knowledge-base endpoint configured (set {ENDPOINT_ENV} or [kb] endpoint)")
        for key in dict.fromkeys(k.lower() for k in keys):
            if key in self.cache:
                self.report.record(key, "cached")
                continue
            self.lookup(key)
        return self.report
