"""TOML configuration for the command-line tool."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from webmeasure.crawler.types import CrawlConfig
from webmeasure.listsrc import DEFAULT_GENERIC_TLDS, CcTldMap
from webmeasure.llmclient import BackendConfig
from webmeasure.model import CATEGORY_TOKENS

PATH_KEYS = ("tranco", "psl", "disconnect", "artifact_store", "output_dir")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class MockBackendSpec:
    """Offline backend that answers with the manifest labels, corrupting a seeded fraction."""

    name: str
    error_rate: float = 0.0
    seed: int = 0
    max_concurrent: int = 1


@dataclass(frozen=True)
class ToolConfig:
    backends: Mapping[str, BackendConfig | MockBackendSpec] = field(default_factory=dict)
    crawl: CrawlConfig = field(default_factory=CrawlConfig)
    paths: Mapping[str, Path] = field(default_factory=dict)
    seeds: Mapping[str, int] = field(default_factory=dict)
    cctld_map: CcTldMap = field(default_factory=CcTldMap)
    category_vocabulary: tuple[str, ...] = CATEGORY_TOKENS
    source: Path | None = None

    def seed(self, stage: str, default: int = 0) -> int:
        return int(self.seeds.get(stage, self.seeds.get("default", default)))

    def path(self, key: str) -> Path | None:
        return self.paths.get(key)

    def backend(self, name: str) -> BackendConfig | MockBackendSpec:
        try:
            return self.backends[name]
        except KeyError:
            raise ConfigError(f"unknown backend {name!r}; configured: {sorted(self.backends) or 'none'}") from None

    def check_paths(self, keys) -> None:
        """Raise ConfigError for any listed input path that is unset or missing."""
        for key in keys:
            p = self.paths.get(key)
            if p is None:
                raise ConfigError(f"[paths] {key} is not set")
            if not p.exists():
                raise ConfigError(f"[paths] {key} = {str(p)!r} does not exist")


def _backend(name: str, data: Mapping[str, Any]) -> BackendConfig | MockBackendSpec:
    data = dict(data)
    if data.pop("kind", "http") == "mock":
        unknown = set(data) - {"error_rate", "seed", "max_concurrent"}
        if unknown:
            raise ConfigError(f"backend {name!r}: unknown keys {sorted(unknown)}")
        return MockBackendSpec(name, **data)
    try:
        return BackendConfig.from_mapping(name, data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"backend {name!r}: {exc}") from None


def config_from_mapping(data: Mapping[str, Any], base: Path | None = None) -> ToolConfig:
    base = base or Path.cwd()
    known = {"backends", "crawl", "paths", "seeds", "cctld", "generic_tlds", "categories"}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown top-level keys {sorted(unknown)}")

    paths = {}
    for key, value in dict(data.get("paths", {})).items():
        if key not in PATH_KEYS:
            raise ConfigError(f"[paths] unknown key {key!r}; expected one of {PATH_KEYS}")
        p = Path(value).expanduser()
        paths[key] = p if p.is_absolute() else base / p

    crawl_data = dict(data.get("crawl", {}))
    if "viewport" in crawl_data:
        crawl_data["viewport"] = tuple(crawl_data["viewport"])
    if "browser_args" in crawl_data:
        crawl_data["browser_args"] = tuple(crawl_data["browser_args"])
    try:
        crawl = CrawlConfig(**crawl_data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[crawl]: {exc}") from None

    try:
        cc = CcTldMap(
            dict(data["cctld"]) if "cctld" in data else CcTldMap().countries,
            frozenset(data.get("generic_tlds", DEFAULT_GENERIC_TLDS)),
        )
    except ValueError as exc:
        raise ConfigError(f"[cctld]: {exc}") from None

    seeds = dict(data.get("seeds", {}))
    for k, v in seeds.items():
        if not isinstance(v, int):
            raise ConfigError(f"[seeds] {k} must be an integer")

    return ToolConfig(
        backends={n: _backend(n, b) for n, b in dict(data.get("backends", {})).items()},
        crawl=crawl,
        paths=paths,
        seeds=seeds,
        cctld_map=cc,
        category_vocabulary=tuple(data.get("categories", CATEGORY_TOKENS)),
    )


def load_config(path: str | Path | None) -> ToolConfig:
    """Parse a TOML file; relative paths resolve against the file's directory."""
    if path is None:
        return ToolConfig()
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        data = tomllib.loads(raw.decode("utf-8"))
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    cfg = config_from_mapping(data, path.parent.resolve())
    return ToolConfig(**{**cfg.__dict__, "source": path})
