"""Loaders for the re-ranking dataset and the expansion resources."""

from __future__ import annotations

import json
import logging
import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from ._io import atomic_write_text
from .analysis import AnalyzerConfig, analyze
from .expansion import SCENARIOS, EmbeddingStore, HypernymGraph, KbSubjectCache
from .index import Document
from .metrics import IRRELEVANT, RELEVANT

logger = logging.getLogger(__name__)

SPLITS = ("dev", "test")

LABEL_MAP = {
    "perfectmatch": RELEVANT,
    "relevant": RELEVANT,
    "irrelevant": IRRELEVANT,
}


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class QueryRecord:
    query_id: str
    scenario: str
    text: str
    candidates: tuple[str, ...]
    qrels: Mapping[str, str]


@dataclass(frozen=True)
class DatasetSplit:
    name: str
    scenario: str
    queries: tuple[QueryRecord, ...]
    documents: tuple[Document, ...]

    def query(self, query_id: str) -> QueryRecord:
        for q in self.queries:
            if q.query_id == query_id:
                return q
        raise KeyError(f"unknown query_id {query_id!r}")


def map_relevance(label: str) -> str:
    try:
        return LABEL_MAP[str(label).strip().lower()]
    except KeyError:
        raise DatasetError(f"unknown relevance label {label!r}") from None


def _joined_text(rec: Mapping, where: str) -> str:
    if "text" in rec:
        return str(rec["text"])
    if "subject" in rec or "body" in rec:
        return " ".join(p for p in (rec.get("subject") or "", rec.get("body") or "") if p)
    raise DatasetError(f"{where}: record has no text")


def load_dataset(
    path: str | Path,
    scenario: str | None = None,
    name: str = "test",
    expected_candidates: int | None = 10,
    analyzer: AnalyzerConfig | None = None,
) -> DatasetSplit:
    """Read a JSONL split, one query per line with its candidates embedded."""
    analyzer = analyzer or AnalyzerConfig()
    queries: list[QueryRecord] = []
    documents: dict[str, Document] = {}
    seen_queries: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            where = f"{path}:{lineno}"
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"{where}: invalid JSON ({exc})") from None
            qid = str(rec.get("query_id", ""))
            if not qid:
                raise DatasetError(f"{where}: missing query_id")
            if qid in seen_queries:
                raise DatasetError(f"{where}: duplicate query_id {qid!r}")
            seen_queries.add(qid)
            rec_scenario = rec.get("scenario", scenario)
            if scenario is not None and rec_scenario != scenario:
                raise DatasetError(f"{where}: query {qid!r} has scenario {rec_scenario!r}, expected {scenario!r}")
            if rec_scenario not in SCENARIOS:
                raise DatasetError(f"{where}: query {qid!r} has invalid scenario {rec_scenario!r}")
            cands = rec.get("candidates") or []
            if expected_candidates is not None and len(cands) != expected_candidates:
                raise DatasetError(
                    f"{where}: query {qid!r} has {len(cands)} candidates, expected {expected_candidates}"
                )
            ids: list[str] = []
            qrels: dict[str, str] = {}
            for cand in cands:
                doc_id = str(cand.get("doc_id", ""))
                if not doc_id:
                    raise DatasetError(f"{where}: query {qid!r} has a candidate without doc_id")
                if doc_id in qrels:
                    raise DatasetError(f"{where}: query {qid!r} lists candidate {doc_id!r} twice")
                if "relevance" not in cand:
                    raise DatasetError(f"{where}: candidate {doc_id!r} has no relevance label")
                qrels[doc_id] = map_relevance(cand["relevance"])
                ids.append(doc_id)
                text = _joined_text(cand, f"{where} candidate {doc_id!r}")
                if doc_id in documents:
                    if documents[doc_id].raw_text != text:
                        raise DatasetError(f"{where}: document {doc_id!r} appears with different text")
                    continue
                documents[doc_id] = Document(doc_id, qid, text, tuple(analyze(text, analyzer)))
            queries.append(
                QueryRecord(qid, rec_scenario, _joined_text(rec, where), tuple(ids), qrels)
            )
    scen = scenario or (queries[0].scenario if queries else "EN")
    return DatasetSplit(name=name, scenario=scen, queries=tuple(queries), documents=tuple(documents.values()))


def write_dataset(records: Iterable[Mapping], path: str | Path) -> None:
    lines = [json.dumps(r, ensure_ascii=False, sort_keys=True) for r in records]
    atomic_write_text(path, "\n".join(lines) + ("\n" if lines else ""))


def check_alignment(en: DatasetSplit, mt: DatasetSplit) -> None:
    """EN and MT splits must agree on everything except query text."""
    a = {q.query_id: q for q in en.queries}
    b = {q.query_id: q for q in mt.queries}
    if a.keys() != b.keys():
        diff = sorted(a.keys() ^ b.keys())
        raise DatasetError(f"EN/MT query ids differ: {diff[:5]}")
    for qid in a:
        if a[qid].candidates != b[qid].candidates or dict(a[qid].qrels) != dict(b[qid].qrels):
            raise DatasetError(f"EN/MT candidates or qrels differ for query {qid!r}")


def collect_documents(splits: Iterable[DatasetSplit]) -> list[Document]:
    """Distinct documents across splits; the same doc_id must carry the same text."""
    docs: dict[str, Document] = {}
    for split in splits:
        for doc in split.documents:
            prev = docs.get(doc.doc_id)
            if prev is None:
                docs[doc.doc_id] = doc
            elif prev.raw_text != doc.raw_text:
                raise DatasetError(f"document {doc.doc_id!r} has conflicting text across splits")
    return list(docs.values())


def load_embeddings(path: str | Path) -> EmbeddingStore:
    """Text vectors: ``word v1 ... vd`` per line. Dimension fixed by the first valid line."""
    words: list[str] = []
    rows: list[list[float]] = []
    seen: set[str] = set()
    dim = None
    malformed = 0
    with open(path, encoding="utf-8", errors="replace") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.rstrip("\n").rstrip(" ").split(" ")
            if len(parts) < 2 or not parts[0]:
                malformed += 1
                continue
            try:
                vec = [float(x) for x in parts[1:]]
            except ValueError:
                malformed += 1
                continue
            if not all(math.isfinite(x) for x in vec):
                malformed += 1
                continue
            if dim is None:
                dim = len(vec)
            elif len(vec) != dim:
                raise ValueError(f"{path}:{lineno}: vector has dimension {len(vec)}, expected {dim}")
            word = parts[0].lower()
            if word in seen:
                continue
            seen.add(word)
            words.append(word)
            rows.append(vec)
    if not words:
        raise ValueError(f"{path}: no valid embedding lines")
    if malformed:
        logger.warning("%s: skipped %d malformed lines", path, malformed)
    return EmbeddingStore(words, np.array(rows, dtype=np.float64), malformed_lines=malformed)


def load_hypernym_graph(path: str | Path) -> HypernymGraph:
    """TSV ``hyponym_label<TAB>hypernym_word<TAB>confidence``; header optional.

    Repeated (hyponym, hypernym) pairs keep the highest confidence.
    """
    edges: dict[str, dict[str, float]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            cols = line.split("\t")
            if len(cols) != 3:
                raise ValueError(f"{path}:{lineno}: expected 3 tab-separated columns, got {len(cols)}")
            label, hyper, conf_s = (c.strip() for c in cols)
            try:
                conf = float(conf_s)
            except ValueError:
                if lineno == 1:
                    continue  # header
                raise ValueError(f"{path}:{lineno}: unparseable confidence {conf_s!r}") from None
            if not 0.0 <= conf <= 1.0:
                raise ValueError(f"{path}:{lineno}: confidence {conf} outside [0, 1]")
            if not label or not hyper:
                raise ValueError(f"{path}:{lineno}: empty hyponym or hypernym")
            bucket = edges.setdefault(hyper.lower(), {})
            bucket[label] = max(conf, bucket.get(label, 0.0))
    return HypernymGraph({h: list(b.items()) for h, b in edges.items()})


def load_kb_cache(path: str | Path) -> KbSubjectCache:
    cache = KbSubjectCache()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                key = rec["key"]
                subjects = rec["subjects"]
                if not isinstance(key, str) or not isinstance(subjects, list):
                    raise TypeError
                cache.put(key, [str(s) for s in subjects], rec.get("fetched_at"))
            except (ValueError, KeyError, TypeError):
                raise ValueError(f"{path}:{lineno}: malformed cache record") from None
    return cache


def save_kb_cache(cache: KbSubjectCache, path: str | Path) -> None:
    lines = [
        json.dumps(
            {"key": key, "subjects": entry.subjects, "fetched_at": entry.fetched_at},
            ensure_ascii=False,
        )
        for key, entry in sorted(cache.entries.items())
    ]
    atomic_write_text(path, "\n".join(lines) + ("\n" if lines else ""))


def convert_semeval_xml(
    xml_path: str | Path,
    scenario: str = "EN",
    mt_text: Mapping[str, str] | None = None,
) -> list[dict]:
    """Convert a question-question (Subtask B) XML file into dataset records.

    ``mt_text`` optionally replaces each original question's text by its
    machine translation, keyed by query id.
    """
    root = ET.parse(xml_path).getroot()
    order: list[str] = []
    queries: dict[str, dict] = {}
    for orgq in root.iter("OrgQuestion"):
        qid = orgq.get("ORGQ_ID")
        if qid not in queries:
            subject = (orgq.findtext("OrgQSubject") or "").strip()
            body = (orgq.findtext("OrgQBody") or "").strip()
            text = " ".join(p for p in (subject, body) if p)
            if mt_text is not None:
                if qid not in mt_text:
                    raise DatasetError(f"no machine translation for query {qid!r}")
                text = mt_text[qid]
            queries[qid] = {"query_id": qid, "scenario": scenario, "text": text, "candidates": []}
            order.append(qid)
        for relq in orgq.iter("RelQuestion"):
            subject = (relq.findtext("RelQSubject") or "").strip()
            body = (relq.findtext("RelQBody") or relq.findtext("RelQClean") or "").strip()
            queries[qid]["candidates"].append(
                {
                    "doc_id": relq.get("RELQ_ID"),
                    "text": " ".join(p for p in (subject, body) if p),
                    "relevance": map_relevance(relq.get("RELQ_RELEVANCE2ORGQ", "")),
                    "_order": int(relq.get("RELQ_RANKING_ORDER") or 0),
                }
            )
    records = []
    for qid in order:
        rec = queries[qid]
        cands = sorted(rec["candidates"], key=lambda c: c["_order"])
        for c in cands:
            del c["_order"]
        rec["candidates"] = cands
        records.append(rec)
    return records


def read_mt_tsv(path: str | Path) -> dict[str, str]:
    """``query_id<TAB>translated text`` per line."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            qid, sep, text = line.rstrip("\r\n").partition("\t")
            if not sep:
                raise DatasetError(f"{path}:{lineno}: expected query_id<TAB>text")
            out[qid] = text
    return out
