"""Run configuration: an INI file with command-line overrides on top."""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field
from pathlib import Path

from .analysis import AnalyzerConfig, Stemmer, default_stopwords, load_stopwords
from .index import Bm25Params
from .kb import DEFAULT_QUERY_TEMPLATE, DEFAULT_RESOURCE_TEMPLATE, ENDPOINT_ENV

PATH_KEYS = (
    "en_dev",
    "en_test",
    "mt_dev",
    "mt_test",
    "embeddings",
    "hypernyms",
    "kb_cache",
    "stopwords",
    "index",
    "output_dir",
)


@dataclass
class RunConfig:
    paths: dict[str, Path | None] = field(default_factory=lambda: dict.fromkeys(PATH_KEYS))
    bm25: Bm25Params = field(default_factory=Bm25Params)
    k_neighbors: int = 2
    hypernym_threshold: float = 0.75
    max_subjects: int | None = None
    expected_candidates: int | None = 10
    stemmer: Stemmer = Stemmer.LIGHT
    offline: bool = False
    kb_endpoint: str | None = None
    kb_query_template: str = DEFAULT_QUERY_TEMPLATE
    kb_resource_template: str = DEFAULT_RESOURCE_TEMPLATE
    kb_token: str | None = None
    kb_min_interval: float = 1.0
    kb_timeout: float = 30.0

    def validate(self) -> None:
        if self.k_neighbors < 1:
            raise ValueError("k_neighbors must be >= 1")
        if not 0.0 <= self.hypernym_threshold <= 1.0:
            raise ValueError("hypernym_threshold must lie in [0, 1]")
        if self.max_subjects is not None and self.max_subjects < 1:
            raise ValueError("max_subjects must be >= 1")

    def dataset_path(self, scenario: str, split: str) -> Path | None:
        return self.paths.get(f"{scenario.lower()}_{split}")

    def require(self, key: str) -> Path:
        """Configured path that must already exist."""
        path = self.paths.get(key)
        if path is None:
            raise ValueError(f"no path configured for {key!r}")
        if not path.exists():
            raise FileNotFoundError(f"{key}: {path} does not exist")
        return path

    def analyzer(self) -> AnalyzerConfig:
        stop_path = self.paths.get("stopwords")
        words = load_stopwords(stop_path) if stop_path else default_stopwords()
        return AnalyzerConfig(stopword_list=words, stemmer=self.stemmer)

    def output_dir(self) -> Path:
        return self.paths.get("output_dir") or Path("qerank-out")


def _opt(section, key, conv=str):
    raw = section.get(key, fallback=None)
    if raw is None or raw.strip() == "":
        return None
    return conv(raw.strip())


def load_config(path: str | Path | None) -> RunConfig:
    cfg = RunConfig()
    if path is not None:
        path = Path(path)
        parser = configparser.ConfigParser(interpolation=None)
        if not parser.read(path, encoding="utf-8"):
            raise FileNotFoundError(f"config file {path} not found")
        base = path.parent
        if parser.has_section("paths"):
            for key, value in parser["paths"].items():
                if key not in PATH_KEYS:
                    raise ValueError(f"{path}: unknown [paths] key {key!r}")
                cfg.paths[key] = (base / value.strip()) if value.strip() else None
        if parser.has_section("bm25"):
            sec = parser["bm25"]
            cfg.bm25 = Bm25Params(sec.getfloat("k1", cfg.bm25.k1), sec.getfloat("b", cfg.bm25.b))
        if parser.has_section("expansion"):
            sec = parser["expansion"]
            cfg.k_neighbors = sec.getint("k_neighbors", cfg.k_neighbors)
            cfg.hypernym_threshold = sec.getfloat("hypernym_threshold", cfg.hypernym_threshold)
            cfg.max_subjects = _opt(sec, "max_subjects", int)
        if parser.has_section("analyzer"):
            cfg.stemmer = Stemmer(parser["analyzer"].get("stemmer", cfg.stemmer.value))
        if parser.has_section("dataset"):
            sec = parser["dataset"]
            if "expected_candidates" in sec:
                cfg.expected_candidates = _opt(sec, "expected_candidates", int)
        if parser.has_section("kb"):
            sec = parser["kb"]
            cfg.kb_endpoint = _opt(sec, "endpoint")
            cfg.kb_query_template = _opt(sec, "query_template") or cfg.kb_query_template
            cfg.kb_resource_template = _opt(sec, "resource_template") or cfg.kb_resource_template
            cfg.kb_token = _opt(sec, "token")
            cfg.kb_min_interval = sec.getfloat("min_interval", cfg.kb_min_interval)
            cfg.kb_timeout = sec.getfloat("timeout", cfg.kb_timeout)
        if parser.has_section("run"):
            cfg.offline = parser["run"].getboolean("offline", cfg.offline)
    env = os.environ.get(ENDPOINT_ENV)
    if env:
        cfg.kb_endpoint = env
    return cfg
