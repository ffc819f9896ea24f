"""System grid, MAP reports, run files and the MAP table."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from ._io import atomic_write_text
from .expansion import PRECEDENCE, SCENARIOS, SOURCE_LABELS, ExpandedQuery, Resources, Source, combine
from .index import Bm25Params, InvertedIndex, RankedList, rerank_candidates
from .ingestion import DatasetSplit
from .metrics import average_precision, mean

logger = logging.getLogger(__name__)

KW, WE, DB, HN = (Source.KEYWORD, Source.WORD_EMBEDDING, Source.DBPEDIA, Source.HYPERNYM)

# the nine source combinations of the MAP table, in row order
GRID_COMBINATIONS: tuple[frozenset[Source], ...] = tuple(
    frozenset(c)
    for c in [
        (KW,),
        (WE,),
        (DB,),
        (HN,),
        (KW, WE),
        (KW, DB),
        (KW, HN),
        (WE, DB, HN),
        (KW, WE, DB, HN),
    ]
)

FIRST_ROW = {"EN": 1, "MT": 12}


def label_for(sources: Iterable[Source]) -> str:
    sources = set(sources)
    return "+".join(SOURCE_LABELS[s] for s in PRECEDENCE if s in sources)


def parse_label(label: str) -> frozenset[Source]:
    parts = [p for p in label.replace(" ", "").split("+") if p]
    if not parts:
        raise ValueError(f"empty system label {label!r}")
    return frozenset(Source.parse(p) for p in parts)


@dataclass(frozen=True)
class SystemSpec:
    scenario: str
    enabled_sources: frozenset[Source]

    def __post_init__(self):
        if not self.enabled_sources:
            raise ValueError("a system needs at least one source")
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}")

    @property
    def id(self) -> str:
        return label_for(self.enabled_sources)

    @property
    def run_id(self) -> str:
        return f"{self.scenario}-{self.id}"

    @property
    def is_baseline(self) -> bool:
        return self.enabled_sources == frozenset({KW})

    @property
    def row(self) -> int | None:
        try:
            return FIRST_ROW[self.scenario] + GRID_COMBINATIONS.index(self.enabled_sources)
        except ValueError:
            return None

    @property
    def formula(self) -> str | None:
        """Multi-source systems as a sum of single-source rows, e.g. ``12+13``."""
        if len(self.enabled_sources) < 2:
            return None
        first = FIRST_ROW[self.scenario]
        return "+".join(str(first + PRECEDENCE.index(s)) for s in PRECEDENCE if s in self.enabled_sources)

    @property
    def table_label(self) -> str:
        name = self.id if self.formula is None else f"{self.formula} ({self.id})"
        return name if self.row is None else f"{self.row}. {name}"

    @classmethod
    def parse(cls, text: str, scenario: str = "EN") -> "SystemSpec":
        return cls(scenario, parse_label(text))


def canonical_grid(scenarios: Sequence[str] = SCENARIOS) -> list[SystemSpec]:
    return [SystemSpec(s, combo) for s in scenarios for combo in GRID_COMBINATIONS]


@dataclass
class EvalReport:
    system: SystemSpec
    split: str
    per_query_ap: dict[str, float]
    map_score: float
    delta_vs_baseline: float = 0.0
    rankings: dict[str, RankedList] = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        return {
            "split": self.split,
            "map": self.map_score,
            "delta": self.delta_vs_baseline,
            "per_query_ap": dict(sorted(self.per_query_ap.items())),
        }


@dataclass
class SystemResult:
    """One system's reports across the available splits."""

    system: SystemSpec
    reports: dict[str, EvalReport]

    @property
    def primary_split(self) -> str:
        return "test" if "test" in self.reports else next(iter(self.reports))

    @property
    def delta(self) -> float:
        return self.reports[self.primary_split].delta_vs_baseline

    def to_dict(self) -> dict:
        return {
            "system": self.system.id,
            "scenario": self.system.scenario,
            "row": self.system.row,
            "label": self.system.table_label,
            "sources": [s.value for s in PRECEDENCE if s in self.system.enabled_sources],
            "delta": self.delta,
            "splits": {name: self.reports[name].to_dict() for name in sorted(self.reports)},
        }


def expand_split(spec: SystemSpec, split: DatasetSplit, resources: Resources) -> list[ExpandedQuery]:
    return [
        combine(q.query_id, spec.scenario, q.text, spec.enabled_sources, resources)
        for q in split.queries
    ]


def evaluate_system(
    spec: SystemSpec,
    split: DatasetSplit,
    index: InvertedIndex,
    params: Bm25Params,
    resources: Resources,
) -> EvalReport:
    """Expand, re-rank and score every query of ``split``; MAP is the plain mean of APs."""
    if not split.queries:
        raise ValueError(f"split {split.name!r} has no queries")
    per_query: dict[str, float] = {}
    rankings: dict[str, RankedList] = {}
    for record in sorted(split.queries, key=lambda q: q.query_id):
        query = combine(record.query_id, spec.scenario, record.text, spec.enabled_sources, resources)
        ranking = rerank_candidates(index, query, record.candidates, params)
        rankings[record.query_id] = ranking
        per_query[record.query_id] = average_precision(ranking, record.qrels)
    return EvalReport(
        system=spec,
        split=split.name,
        per_query_ap=per_query,
        map_score=mean(per_query.values()),
        rankings=rankings,
    )


def run_grid(
    splits: Mapping[str, Mapping[str, DatasetSplit]],
    resources: Resources,
    index: InvertedIndex,
    params: Bm25Params,
    systems: Sequence[SystemSpec] | None = None,
) -> list[SystemResult]:
    """Evaluate every system on every split of its scenario.

    ``splits`` maps scenario -> split name -> split. Deltas are taken against
    the same scenario's keyword baseline on the same split.
    """
    available = [s for s in SCENARIOS if splits.get(s)]
    if not available:
        raise ValueError("no dataset splits to evaluate")
    if systems is None:
        if "MT" not in available:
            logger.warning("no MT split available; evaluating the 9 EN systems only")
        systems = canonical_grid(available)
    results = []
    for spec in systems:
        if spec.scenario not in available:
            logger.warning("skipping %s: no %s split", spec.run_id, spec.scenario)
            continue
        reports = {
            name: evaluate_system(spec, split, index, params, resources)
            for name, split in sorted(splits[spec.scenario].items())
        }
        results.append(SystemResult(spec, reports))
    _fill_deltas(results, splits, resources, index, params)
    return results


def _fill_deltas(results, splits, resources, index, params) -> None:
    baselines: dict[tuple[str, str], float] = {}
    for r in results:
        if r.system.is_baseline:
            for name, rep in r.reports.items():
                baselines[(r.system.scenario, name)] = rep.map_score
    for r in results:
        for name, rep in r.reports.items():
            key = (r.system.scenario, name)
            if key not in baselines:
                base = SystemSpec(r.system.scenario, frozenset({KW}))
                baselines[key] = evaluate_system(
                    base, splits[r.system.scenario][name], index, params, resources
                ).map_score
            rep.delta_vs_baseline = 0.0 if r.system.is_baseline else rep.map_score - baselines[key]


def emit_run_file(rankings: Iterable[RankedList], system_id: str, path: str | Path) -> None:
    """Write ``query_id Q0 doc_id rank score system_id`` lines, sorted by query then rank."""
    if any(ch.isspace() for ch in system_id):
        raise ValueError("system_id must not contain whitespace")
    lines = []
    for ranking in sorted(rankings, key=lambda r: r.query_id):
        for e in ranking.entries:
            lines.append(f"{ranking.query_id} Q0 {e.doc_id} {e.rank} {e.score:.6f} {system_id}")
    atomic_write_text(path, "\n".join(lines) + ("\n" if lines else ""))


def write_qrels(splits: Iterable[DatasetSplit], path: str | Path) -> None:
    """Qrels in the 4-column ``query_id 0 doc_id label`` format."""
    lines = []
    for split in splits:
        for q in sorted(split.queries, key=lambda q: q.query_id):
            for doc_id in q.candidates:
                rel = 1 if q.qrels[doc_id] == "relevant" else 0
                lines.append(f"{q.query_id} 0 {doc_id} {rel}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_reports(results: Sequence[SystemResult], path: str | Path) -> None:
    lines = [json.dumps(r.to_dict(), sort_keys=True) for r in results]
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_reports(path: str | Path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def _pct(x: float | None) -> str:
    return "-" if x is None else f"{x * 100:.2f}"


def render_table(results: Sequence[SystemResult]) -> str:
    """Plain-text MAP table: System | QR | Dev MAP | Test MAP | delta (x100)."""
    header = ("System", "QR", "Dev MAP", "Test MAP", "Delta")
    rows = []
    for r in results:
        name = r.system.table_label
        dev = r.reports.get("dev")
        test = r.reports.get("test")
        rows.append(
            (
                name,
                r.system.scenario,
                _pct(dev.map_score if dev else None),
                _pct(test.map_score if test else None),
                f"{r.delta * 100:+06.2f}" if not r.system.is_baseline else "00.00",
            )
        )
    widths = [max(len(str(x)) for x in col) for col in zip(header, *rows)]
    fmt = " | ".join(f"{{:<{w}}}" for w in widths)
    lines = [fmt.format(*header), "-+-".join("-" * w for w in widths)]
    lines += [fmt.format(*row) for row in rows]
    return "\n".join(lines)


def per_query_table(results: Sequence[SystemResult], split: str = "test") -> str:
    """Per-query AP (x100) side by side for the given systems, as TSV."""
    cols = [r for r in results if split in r.reports]
    if not cols:
        return ""
    qids = sorted({q for r in cols for q in r.reports[split].per_query_ap})
    lines = ["query_id\t" + "\t".join(r.system.run_id for r in cols)]
    for qid in qids:
        vals = [r.reports[split].per_query_ap.get(qid) for r in cols]
        lines.append(qid + "\t" + "\t".join(_pct(v) for v in vals))
    return "\n".join(lines)
