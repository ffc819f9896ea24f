"""Command-line entry point: ``qerank <command>``."""

from __future__ import annotations

import argparse
import json
import logging
import re
import sys
from pathlib import Path

from ._io import atomic_write_text
from .analysis import Stemmer, query_words
from .config import RunConfig, load_config
from .evaluation import (
    SystemSpec,
    canonical_grid,
    emit_run_file,
    expand_split,
    parse_label,
    per_query_table,
    render_table,
    run_grid,
    write_qrels,
    write_reports,
)
from .expansion import PRECEDENCE, SCENARIOS, KbSubjectCache, Resources, Source, combine, expansion_stats
from .index import (
    DEFAULT_B_GRID,
    DEFAULT_K1_GRID,
    Bm25Params,
    LabeledQuery,
    build_index,
    load_index,
    rerank_candidates,
    save_index,
    tune_params,
)
from .ingestion import (
    SPLITS,
    DatasetSplit,
    check_alignment,
    collect_documents,
    load_dataset,
    load_embeddings,
    load_hypernym_graph,
    load_kb_cache,
)
from .kb import CachedSubjectLookup, OfflineError, SparqlSubjectClient

logger = logging.getLogger("qerank")


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- helpers


def _overrides(args, cfg: RunConfig) -> RunConfig:
    for key in ("en_dev", "en_test", "mt_dev", "mt_test", "embeddings", "hypernyms",
                "kb_cache", "stopwords", "index", "output_dir"):
        value = getattr(args, key, None)
        if value is not None:
            cfg.paths[key] = Path(value)
    k1 = getattr(args, "k1", None)
    b = getattr(args, "b", None)
    if k1 is not None or b is not None:
        cfg.bm25 = Bm25Params(cfg.bm25.k1 if k1 is None else k1, cfg.bm25.b if b is None else b)
    for attr in ("k_neighbors", "hypernym_threshold", "max_subjects", "expected_candidates"):
        value = getattr(args, attr, None)
        if value is not None:
            setattr(cfg, attr, value)
    if getattr(args, "stemmer", None):
        cfg.stemmer = Stemmer(args.stemmer)
    if getattr(args, "offline", False):
        cfg.offline = True
    cfg.validate()
    return cfg


def _load_splits(cfg: RunConfig, scenarios=SCENARIOS, splits=SPLITS) -> dict[str, dict[str, DatasetSplit]]:
    analyzer = cfg.analyzer()
    out: dict[str, dict[str, DatasetSplit]] = {}
    for scenario in scenarios:
        for name in splits:
            path = cfg.dataset_path(scenario, name)
            if path is None:
                continue
            if not path.exists():
                raise FileNotFoundError(f"{scenario.lower()}_{name}: {path} does not exist")
            split = load_dataset(path, scenario, name, cfg.expected_candidates, analyzer)
            out.setdefault(scenario, {})[name] = split
    for name in splits:
        en = out.get("EN", {}).get(name)
        mt = out.get("MT", {}).get(name)
        if en is not None and mt is not None:
            check_alignment(en, mt)
    return out


def _all_splits(splits) -> list[DatasetSplit]:
    return [s for by_name in splits.values() for s in by_name.values()]


def _get_index(cfg: RunConfig):
    path = cfg.paths.get("index")
    if path is not None and path.exists():
        return load_index(path)
    # same collection as `qerank index`, whatever subset the command evaluates
    logger.info("no index file; building an in-memory index from the configured datasets")
    docs = collect_documents(_all_splits(_load_splits(cfg)))
    if not docs:
        raise ValueError("no documents to index")
    return build_index(docs)


def _kb_lookup(cfg: RunConfig) -> CachedSubjectLookup:
    path = cfg.paths.get("kb_cache")
    cache = load_kb_cache(path) if path is not None and path.exists() else KbSubjectCache()
    client = None
    if cfg.kb_endpoint and not cfg.offline:
        client = SparqlSubjectClient(
            cfg.kb_endpoint,
            query_template=cfg.kb_query_template,
            resource_template=cfg.kb_resource_template,
            auth_token=cfg.kb_token,
            min_interval=cfg.kb_min_interval,
            timeout=cfg.kb_timeout,
        )
    return CachedSubjectLookup(cache, client, cache_path=path, offline=cfg.offline)


def _resources(cfg: RunConfig, sources) -> Resources:
    sources = set(sources)
    res = Resources(
        analyzer=cfg.analyzer(),
        k_neighbors=cfg.k_neighbors,
        hypernym_threshold=cfg.hypernym_threshold,
        max_subjects=cfg.max_subjects,
    )
    if Source.WORD_EMBEDDING in sources:
        res.embeddings = load_embeddings(cfg.require("embeddings"))
    if Source.HYPERNYM in sources:
        res.hypernyms = load_hypernym_graph(cfg.require("hypernyms"))
    if Source.DBPEDIA in sources:
        res.kb = _kb_lookup(cfg)
    return res


def _parse_sources(text: str) -> frozenset[Source]:
    parts = [p for p in re.split(r"[,+\s]+", text) if p]
    if not parts:
        raise UsageError("no sources given")
    return frozenset(Source.parse(p) for p in parts)


def _parse_systems(text: str, scenarios) -> list[SystemSpec]:
    specs = []
    for scenario in scenarios:
        for label in text.split(","):
            if label.strip():
                specs.append(SystemSpec(scenario, parse_label(label)))
    if not specs:
        raise UsageError("no systems given")
    return specs


def _scenarios(value: str) -> tuple[str, ...]:
    return SCENARIOS if value == "all" else (value,)


def _splits(value: str) -> tuple[str, ...]:
    return SPLITS if value == "all" else (value,)


def _find_query(splits, query_id: str, scenario: str):
    for split in splits.get(scenario, {}).values():
        for q in split.queries:
            if q.query_id == query_id:
                return q
    raise KeyError(f"unknown query_id {query_id!r} in the {scenario} datasets")


def _emit(args, payload, text: str) -> None:
    if args.json:
        print(json.dumps(payload, sort_keys=True, ensure_ascii=False, indent=2))
    else:
        print(text)


# ---------------------------------------------------------------- commands


def cmd_index(args, cfg: RunConfig) -> int:
    out = cfg.paths.get("index")
    if out is None:
        raise UsageError("no index path configured (--index or [paths] index)")
    splits = _load_splits(cfg)
    docs = collect_documents(_all_splits(splits))
    if not docs:
        raise ValueError("no documents found in the configured datasets")
    index = build_index(docs)
    save_index(index, out)
    summary = {
        "n_docs": index.n_docs,
        "avg_doc_length": index.avg_doc_length,
        "vocab_size": index.vocab_size,
        "path": str(out),
    }
    _emit(
        args,
        summary,
        f"{index.n_docs} documents indexed (avg length {index.avg_doc_length:.2f}, "
        f"{index.vocab_size} terms) -> {out}",
    )
    return 0


def _format_expansion(query) -> str:
    lines = [f"query {query.query_id or '-'} [{query.scenario}]"]
    lines.append("keyword: " + " ".join(query.keyword_terms))
    for src in PRECEDENCE[1:]:
        if src not in query.contributions:
            continue
        lines.append(f"{src.value}:")
        for t in query.contributions[src]:
            extra = f" ({t.score:.4f})" if t.score is not None else ""
            kept = "" if t.term in {x.term for x in query.by_source(src)} else "  [dup]"
            lines.append(f"  {t.term:<20} <- {t.origin_query_term} : {t.raw_value!r}{extra}{kept}")
    lines.append(f"expanded query ({len(query.terms)} terms): " + " ".join(query.tokens))
    return "\n".join(lines)


def cmd_expand(args, cfg: RunConfig) -> int:
    sources = _parse_sources(args.sources)
    if args.text is not None:
        query_id, text = args.query_id or "", args.text
    elif args.query_id:
        splits = _load_splits(cfg, (args.scenario,))
        record = _find_query(splits, args.query_id, args.scenario)
        query_id, text = record.query_id, record.text
    else:
        raise UsageError("give --query-id or --text")
    res = _resources(cfg, sources)
    query = combine(query_id, args.scenario, text, sources, res)
    _emit(args, query.to_dict(), _format_expansion(query))
    return 0


def cmd_search(args, cfg: RunConfig) -> int:
    sources = parse_label(args.system)
    splits = _load_splits(cfg, (args.scenario,))
    if args.text is not None:
        if not args.candidates:
            raise UsageError("--text needs --candidates")
        query_id, text = args.query_id or "query", args.text
        candidates = [c for c in args.candidates.split(",") if c]
    elif args.query_id:
        record = _find_query(splits, args.query_id, args.scenario)
        query_id, text, candidates = record.query_id, record.text, list(record.candidates)
    else:
        raise UsageError("give --query-id or --text with --candidates")
    index = _get_index(cfg)
    query = combine(query_id, args.scenario, text, sources, _resources(cfg, sources))
    ranking = rerank_candidates(index, query, candidates, cfg.bm25)
    payload = {
        "query_id": ranking.query_id,
        "entries": [{"doc_id": e.doc_id, "rank": e.rank, "score": e.score} for e in ranking.entries],
    }
    text_out = "\n".join(f"{e.rank:>3} {e.score:10.6f} {e.doc_id}" for e in ranking.entries)
    _emit(args, payload, text_out)
    return 0


def cmd_eval(args, cfg: RunConfig) -> int:
    scenarios = _scenarios(args.scenario)
    splits = _load_splits(cfg, scenarios, _splits(args.split))
    if not splits:
        raise ValueError("no dataset splits configured for evaluation")
    if args.grid:
        systems = canonical_grid([s for s in SCENARIOS if s in splits])
        if "MT" in scenarios and "MT" not in splits:
            logger.warning("MT split missing; running the 9 EN systems only")
    else:
        systems = _parse_systems(args.systems, [s for s in scenarios if s in splits])
    needed = set().union(*(s.enabled_sources for s in systems))
    resources = _resources(cfg, needed)
    index = _get_index(cfg)
    results = run_grid(splits, resources, index, cfg.bm25, systems)

    out = cfg.output_dir()
    for r in results:
        for name, rep in r.reports.items():
            emit_run_file(rep.rankings.values(), r.system.run_id, out / "runs" / name / f"{r.system.run_id}.run")
    for name in sorted({n for by in splits.values() for n in by}):
        write_qrels([next(by[name] for by in splits.values() if name in by)], out / f"qrels.{name}.txt")
        table = per_query_table(results, name)
        if table:
            atomic_write_text(out / f"per_query.{name}.tsv", table + "\n")
    write_reports(results, out / "reports.jsonl")
    table = render_table(results)
    atomic_write_text(out / "table.txt", table + "\n")
    if isinstance(resources.kb, CachedSubjectLookup) and resources.kb.report.errors:
        logger.warning("%d knowledge-base lookups failed; see log", len(resources.kb.report.errors))
    _emit(args, [r.to_dict() for r in results], table)
    return 0


_GRID_RE = re.compile(r"^\s*k1\s*=\s*(?P<k1>[^\s]+)\s+b\s*=\s*(?P<b>[^\s]+)\s*$")


def parse_grid(text: str) -> tuple[list[float], list[float]]:
    m = _GRID_RE.match(text)
    if not m:
        raise UsageError(f"malformed grid {text!r}; expected e.g. 'k1=0.4,0.8 b=0.5,0.75'")
    try:
        k1s = [float(x) for x in m["k1"].split(",") if x]
        bs = [float(x) for x in m["b"].split(",") if x]
    except ValueError:
        raise UsageError(f"malformed grid {text!r}") from None
    if not k1s or not bs:
        raise UsageError(f"malformed grid {text!r}")
    for k1 in k1s:
        for b in bs:
            Bm25Params(k1, b)
    return k1s, bs


def cmd_tune(args, cfg: RunConfig) -> int:
    if args.grid:
        k1s, bs = parse_grid(args.grid)
    else:
        k1s, bs = list(DEFAULT_K1_GRID), list(DEFAULT_B_GRID)
    splits = _load_splits(cfg, (args.scenario,), ("dev",))
    dev = splits.get(args.scenario, {}).get("dev")
    if dev is None or not dev.queries:
        raise ValueError(f"no {args.scenario} dev split configured")
    spec = SystemSpec(args.scenario, parse_label(args.system))
    resources = _resources(cfg, spec.enabled_sources)
    index = _get_index(cfg)
    queries = [
        LabeledQuery(q, r.candidates, r.qrels)
        for q, r in zip(expand_split(spec, dev, resources), dev.queries)
    ]
    result = tune_params(index, queries, k1s, bs)
    payload = {
        "best": {"k1": result.best.k1, "b": result.best.b},
        "grid": [{"k1": k1, "b": b, "map": m} for k1, b, m in result.table],
    }
    _emit(args, payload, result.render())
    return 0


def cmd_fetch_kb(args, cfg: RunConfig) -> int:
    if cfg.offline:
        raise OfflineError("fetch-kb needs network access; drop --offline")
    if cfg.paths.get("kb_cache") is None:
        raise UsageError("no kb_cache path configured")
    if args.terms:
        terms = [t.strip() for t in args.terms.split(",") if t.strip()]
    else:
        splits = _load_splits(cfg)
        analyzer = cfg.analyzer()
        terms = [w for s in _all_splits(splits) for q in s.queries for w in query_words(q.text, analyzer)]
    if not terms:
        raise UsageError("no terms to fetch")
    lookup = _kb_lookup(cfg)
    report = lookup.fetch(terms)
    _emit(args, {"status": report.status, "errors": report.errors}, report.render())
    return 0


def cmd_stats(args, cfg: RunConfig) -> int:
    sources = _parse_sources(args.sources)
    splits = _load_splits(cfg, _scenarios(args.scenario))
    resources = _resources(cfg, sources)
    payload = {}
    for scenario, by_name in splits.items():
        spec = SystemSpec(scenario, sources)
        queries = [q for name in sorted(by_name) for q in expand_split(spec, by_name[name], resources)]
        payload[scenario] = expansion_stats(queries)
    lines = []
    for scenario, stats in payload.items():
        lines.append(f"[{scenario}] " + "  ".join(f"{k}={v:.2f}" for k, v in stats.items()))
    _emit(args, payload, "\n".join(lines))
    return 0


# ---------------------------------------------------------------- parser


def _common(suppress: bool) -> argparse.ArgumentParser:
    d = argparse.SUPPRESS if suppress else None
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", default=d, help="INI config file")
    p.add_argument("--offline", action="store_true", default=d if suppress else False,
                   help="never touch the network")
    p.add_argument("--json", action="store_true", default=d if suppress else False,
                   help="machine-readable output")
    p.add_argument("-v", "--verbose", action="store_true", default=d if suppress else False)
    g = p.add_argument_group("paths")
    for key in ("en-dev", "en-test", "mt-dev", "mt-test", "embeddings", "hypernyms",
                "kb-cache", "stopwords", "index", "output-dir"):
        g.add_argument(f"--{key}", default=d)
    g = p.add_argument_group("parameters")
    g.add_argument("--k1", type=float, default=d)
    g.add_argument("--b", type=float, default=d)
    g.add_argument("--k-neighbors", type=int, default=d)
    g.add_argument("--hypernym-threshold", type=float, default=d)
    g.add_argument("--max-subjects", type=int, default=d)
    g.add_argument("--expected-candidates", type=int, default=d)
    g.add_argument("--stemmer", choices=[s.value for s in Stemmer], default=d)
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qerank", parents=[_common(False)],
                                     description="Query-expanded BM25 question re-ranking")
    sub = parser.add_subparsers(dest="command", required=True)
    common = [_common(True)]

    sub.add_parser("index", parents=common, help="build and save the inverted index")

    p = sub.add_parser("expand", parents=common, help="show a query's expansion")
    p.add_argument("--query-id")
    p.add_argument("--text")
    p.add_argument("--scenario", choices=SCENARIOS, default="EN")
    p.add_argument("--sources", default="KW,WE,DB,HN")

    p = sub.add_parser("search", parents=common, help="re-rank one query's candidates")
    p.add_argument("--query-id")
    p.add_argument("--text")
    p.add_argument("--candidates", help="comma-separated doc ids (with --text)")
    p.add_argument("--scenario", choices=SCENARIOS, default="EN")
    p.add_argument("--system", default="KW")

    p = sub.add_parser("eval", parents=common, help="evaluate systems, write run files and reports")
    sel = p.add_mutually_exclusive_group(required=True)
    sel.add_argument("--grid", action="store_true", help="all 18 systems")
    sel.add_argument("--systems", help="comma-separated labels, e.g. KW,KW+WE")
    p.add_argument("--scenario", choices=SCENARIOS + ("all",), default="all")
    p.add_argument("--split", choices=SPLITS + ("all",), default="all")

    p = sub.add_parser("tune", parents=common, help="grid-search k1 and b on the dev split")
    p.add_argument("--grid", dest="grid", help="e.g. 'k1=0.4,0.8 b=0.5,0.75'")
    p.add_argument("--system", default="KW")
    p.add_argument("--scenario", choices=SCENARIOS, default="EN")

    p = sub.add_parser("fetch-kb", parents=common, help="populate the knowledge-base subject cache")
    p.add_argument("--terms", help="comma-separated words; default: all dataset query words")

    p = sub.add_parser("stats", parents=common, help="average words added per expansion source")
    p.add_argument("--sources", default="KW,WE,DB,HN")
    p.add_argument("--scenario", choices=SCENARIOS + ("all",), default="all")
    return parser


COMMANDS = {
    "index": cmd_index,
    "expand": cmd_expand,
    "search": cmd_search,
    "eval": cmd_eval,
    "tune": cmd_tune,
    "fetch-kb": cmd_fetch_kb,
    "stats": cmd_stats,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = _overrides(args, load_config(args.config))
        return COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"qerank: error: {exc}", file=sys.stderr)
        return 2
    except OfflineError as exc:
        print(f"qerank: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError, OSError, RuntimeError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"qerank: error: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
