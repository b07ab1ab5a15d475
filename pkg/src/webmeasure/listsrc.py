"""Tranco ingestion and benchmark dataset construction."""

from __future__ import annotations

import csv
import enum
import json
import logging
import random
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from webmeasure.model import (
    CATEGORY_TOKENS,
    GOV,
    INTERNATIONAL,
    NON_GOV,
    MalformedInputError,
    TaskKind,
    WebsiteRecord,
    is_valid_label,
    normalize_url,
)
from webmeasure.psl import PublicSuffixTable

logger = logging.getLogger(__name__)

SEED_LIST = "seed-list"
TRANCO_SAMPLE = "tranco-sample"
MANUAL = "manual"

DEFAULT_EXCLUDED_TLDS = frozenset(
    {"gov", "mil", "gov.uk", "gc.ca", "gov.au", "go.jp", "gouv.fr", "gov.it", "gov.in", "gov.br"}
)

DEFAULT_CCTLD_COUNTRIES = {
    "de": "DE",
    "fr": "FR",
    "it": "IT",
    "co.uk": "GB",
    "nl": "NL",
    "pl": "PL",
    "es": "ES",
    "br": "BR",
    "in": "IN",
    "jp": "JP",
    "ru": "RU",
    "cn": "CN",
    "au": "AU",
    "ca": "CA",
    "tr": "TR",
    "se": "SE",
    "ch": "CH",
    "ir": "IR",
    "vn": "VN",
    "id": "ID",
}
DEFAULT_GENERIC_TLDS = frozenset({"com", "net", "org", "io"})


class DatasetError(ValueError):
    pass


class TrancoParseError(DatasetError):
    pass


class InsufficientPopulationError(DatasetError):
    pass


class MissingManualLabelError(DatasetError):
    def __init__(self, domains: Sequence[str]):
        self.domains = list(domains)
        shown = ", ".join(self.domains[:20])
        more = f" (+{len(self.domains) - 20} more)" if len(self.domains) > 20 else ""
        super().__init__(f"no manual label for {len(self.domains)} generic-TLD domains: {shown}{more}")


@dataclass(frozen=True)
class TrancoEntry:
    rank: int
    domain: str


class TldClass(enum.Enum):
    GENERIC = "generic"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class CcTldMap:
    countries: Mapping[str, str] = field(default_factory=lambda: dict(DEFAULT_CCTLD_COUNTRIES))
    generic: frozenset[str] = DEFAULT_GENERIC_TLDS

    def __post_init__(self) -> None:
        overlap = set(self.countries) & set(self.generic)
        if overlap:
            raise ValueError(f"ccTLD and generic sets overlap: {sorted(overlap)}")
        for tld, code in self.countries.items():
            if not is_valid_label(TaskKind.COUNTRY, code) or code == INTERNATIONAL:
                raise ValueError(f"invalid country code {code!r} for .{tld}")

    def match(self, domain: str) -> str | TldClass:
        """Longest-suffix match returning the matched ccTLD key, GENERIC or UNKNOWN."""
        labels = domain.lower().split(".")
        for i in range(1, len(labels)):
            suffix = ".".join(labels[i:])
            if suffix in self.countries:
                return suffix
            if suffix in self.generic:
                return TldClass.GENERIC
        return TldClass.UNKNOWN


def tld_country_label(domain: str, cc_map: CcTldMap | None = None) -> str | TldClass:
    """Country code implied by the domain's TLD, or GENERIC / UNKNOWN."""
    cc_map = cc_map or CcTldMap()
    hit = cc_map.match(domain)
    if isinstance(hit, TldClass):
        return hit
    return cc_map.countries[hit]


def load_tranco(path: str | Path) -> list[TrancoEntry]:
    entries: list[TrancoEntry] = []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 2:
                raise TrancoParseError(f"{path}:{lineno}: expected 'rank,domain', got {row!r}")
            try:
                rank = int(row[0])
            except ValueError:
                raise TrancoParseError(f"{path}:{lineno}: rank {row[0]!r} is not an integer") from None
            domain = row[1].strip().lower()
            if rank < 1 or not domain:
                raise TrancoParseError(f"{path}:{lineno}: invalid row {row!r}")
            if entries and rank <= entries[-1].rank:
                raise TrancoParseError(f"{path}:{lineno}: rank {rank} does not follow {entries[-1].rank}")
            entries.append(TrancoEntry(rank, domain))
    return entries


def load_manual_labels(path: str | Path) -> dict[str, str]:
    """Read a 'domain,label' CSV. A header row is tolerated."""
    labels: dict[str, str] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            if len(row) != 2:
                raise DatasetError(f"{path}:{lineno}: expected 'domain,label', got {row!r}")
            domain, label = row[0].strip().lower(), row[1].strip()
            if lineno == 1 and domain == "domain":
                continue
            labels[domain] = label
    return labels


def load_curlie(path: str | Path) -> list[tuple[str, frozenset[str]]]:
    """Read a 'domain,categories' CSV where categories are '|'-separated."""
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            if lineno == 1 and row[0].strip().lower() == "domain":
                continue
            if len(row) != 2:
                raise DatasetError(f"{path}:{lineno}: expected 'domain,categories', got {row!r}")
            cats = frozenset(c.strip() for c in row[1].split("|") if c.strip())
            out.append((row[0].strip(), cats))
    return out


@dataclass(frozen=True)
class DatasetManifest:
    task: TaskKind
    records: tuple[WebsiteRecord, ...]
    provenance: Mapping[str, str]
    seed: int
    generic_tld: frozenset[str] = frozenset()
    created_at: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat(timespec="seconds"))

    def __post_init__(self) -> None:
        seen = set()
        for r in self.records:
            if r.registrable_domain in seen:
                raise DatasetError(f"duplicate registrable domain {r.registrable_domain}")
            seen.add(r.registrable_domain)
            if self.task not in r.labels:
                raise DatasetError(f"{r.url} has no {self.task.value} label")

    def __len__(self) -> int:
        return len(self.records)

    def label(self, record: WebsiteRecord) -> str:
        return record.labels[self.task]

    def is_generic(self, record: WebsiteRecord) -> bool:
        return record.registrable_domain in self.generic_tld

    def class_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for r in self.records:
            counts[r.labels[self.task]] = counts.get(r.labels[self.task], 0) + 1
        return counts

    def filter(self, keep: Iterable[str]) -> DatasetManifest:
        """Restrict to the given registrable domains (e.g. crawl successes)."""
        keep = set(keep)
        records = tuple(r for r in self.records if r.registrable_domain in keep)
        return DatasetManifest(
            task=self.task,
            records=records,
            provenance={r.registrable_domain: self.provenance[r.registrable_domain] for r in records},
            seed=self.seed,
            generic_tld=self.generic_tld & keep,
            created_at=self.created_at,
        )

    def to_jsonl(self) -> str:
        lines = []
        for r in self.records:
            row = {
                "url": r.url,
                "registrable_domain": r.registrable_domain,
                "tranco_rank": r.tranco_rank,
                "task": self.task.value,
                "label": r.labels[self.task],
                "provenance": self.provenance[r.registrable_domain],
                "generic_tld": r.registrable_domain in self.generic_tld,
            }
            lines.append(json.dumps(row, sort_keys=True))
        return "".join(line + "\n" for line in lines)

    def write(self, path: str | Path) -> None:
        """Write the JSONL body plus a ``.meta.json`` sidecar for seed and timestamp."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_jsonl(), encoding="utf-8")
        meta = {"task": self.task.value, "seed": self.seed, "created_at": self.created_at, "n": len(self.records)}
        Path(str(path) + ".meta.json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")

    @classmethod
    def read(cls, path: str | Path, table: PublicSuffixTable | None = None) -> DatasetManifest:
        path = Path(path)
        meta_path = Path(str(path) + ".meta.json")
        meta = json.loads(meta_path.read_text(encoding="utf-8")) if meta_path.exists() else {}
        records, provenance, generic = [], {}, set()
        task = TaskKind.parse(meta["task"]) if "task" in meta else None
        for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
                row_task = TaskKind.parse(row["task"])
                rec = normalize_url(row["url"], table)
            except (ValueError, KeyError) as exc:
                raise DatasetError(f"{path}:{lineno}: {exc}") from None
            task = task or row_task
            if row_task is not task:
                raise DatasetError(f"{path}:{lineno}: task {row_task.value} in a {task.value} manifest")
            rec = rec.with_rank(row.get("tranco_rank")).with_label(task, row["label"])
            records.append(rec)
            provenance[rec.registrable_domain] = row.get("provenance", MANUAL)
            if row.get("generic_tld"):
                generic.add(rec.registrable_domain)
        if task is None:
            raise DatasetError(f"{path}: empty manifest without metadata")
        kwargs = {"created_at": meta["created_at"]} if "created_at" in meta else {}
        return cls(task, tuple(records), provenance, int(meta.get("seed", 0)), frozenset(generic), **kwargs)


def _records_from_tranco(
    entries: Iterable[TrancoEntry], table: PublicSuffixTable | None, skip: set[str]
) -> list[WebsiteRecord]:
    """Normalize entries, keeping the best-ranked row per registrable domain."""
    out = []
    seen = set(skip)
    for e in entries:
        try:
            rec = normalize_url(e.domain, table)
        except MalformedInputError:
            logger.debug("skipping malformed Tranco domain %s", e.domain)
            continue
        if rec.registrable_domain in seen:
            continue
        seen.add(rec.registrable_domain)
        out.append(rec.with_rank(e.rank))
    return out


def _has_tld(host: str, tlds: Iterable[str]) -> bool:
    return any(host == t or host.endswith("." + t) for t in tlds)


def _sample(rng: random.Random, pool: list[WebsiteRecord], k: int) -> list[WebsiteRecord]:
    picked = rng.sample(pool, k)
    return sorted(picked, key=lambda r: (r.tranco_rank or 0, r.registrable_domain))


def build_governmental_dataset(
    gov_seed: Sequence[WebsiteRecord],
    tranco: Sequence[TrancoEntry],
    excluded_tlds: Iterable[str] = DEFAULT_EXCLUDED_TLDS,
    seed: int = 0,
    table: PublicSuffixTable | None = None,
) -> DatasetManifest:
    """Governmental seeds plus an equal-size random non-governmental Tranco sample."""
    if not gov_seed:
        raise DatasetError("gov_seed is empty")
    excluded = {t.lower().lstrip(".") for t in excluded_tlds}
    seeds: list[WebsiteRecord] = []
    seen: set[str] = set()
    for r in gov_seed:
        if r.registrable_domain not in seen:
            seen.add(r.registrable_domain)
            seeds.append(r.with_label(TaskKind.GOVERNMENTAL, GOV))
    pool = [r for r in _records_from_tranco(tranco, table, seen) if not _has_tld(r.host, excluded)]
    if len(pool) < len(seeds):
        raise InsufficientPopulationError(
            f"need {len(seeds)} non-governmental Tranco domains, only {len(pool)} eligible"
        )
    rng = random.Random(seed)
    sampled = [r.with_label(TaskKind.GOVERNMENTAL, NON_GOV) for r in _sample(rng, pool, len(seeds))]
    provenance = {r.registrable_domain: SEED_LIST for r in seeds}
    provenance.update({r.registrable_domain: TRANCO_SAMPLE for r in sampled})
    return DatasetManifest(TaskKind.GOVERNMENTAL, tuple(seeds + sampled), provenance, seed)


def build_country_dataset(
    tranco: Sequence[TrancoEntry],
    cc_map: CcTldMap | None = None,
    per_cc: int = 100,
    generic_n: int = 500,
    min_class: int = 10,
    manual_labels: Mapping[str, str] | None = None,
    seed: int = 0,
    table: PublicSuffixTable | None = None,
) -> DatasetManifest:
    """ccTLD-labeled samples plus manually labeled generic-TLD samples.

    Classes with fewer than ``min_class`` records after merging are dropped.
    """
    if per_cc < 1:
        raise ValueError("per_cc must be >= 1")
    cc_map = cc_map or CcTldMap()
    manual_labels = {k.lower(): v for k, v in (manual_labels or {}).items()}
    by_key: dict[str, list[WebsiteRecord]] = {k: [] for k in cc_map.countries}
    generic_pool: list[WebsiteRecord] = []
    for rec in _records_from_tranco(tranco, table, set()):
        hit = cc_map.match(rec.registrable_domain)
        if hit is TldClass.GENERIC:
            generic_pool.append(rec)
        elif isinstance(hit, str):
            by_key[hit].append(rec)

    rng = random.Random(seed)
    records: list[WebsiteRecord] = []
    provenance: dict[str, str] = {}
    for key, country in cc_map.countries.items():
        pool = by_key[key]
        if len(pool) < per_cc:
            raise InsufficientPopulationError(f"ccTLD .{key}: need {per_cc} domains, only {len(pool)} available")
        for r in _sample(rng, pool, per_cc):
            records.append(r.with_label(TaskKind.COUNTRY, country))
            provenance[r.registrable_domain] = TRANCO_SAMPLE

    generic: set[str] = set()
    if generic_n:
        if len(generic_pool) < generic_n:
            raise InsufficientPopulationError(
                f"need {generic_n} generic-TLD domains, only {len(generic_pool)} available"
            )
        sampled = _sample(rng, generic_pool, generic_n)
        missing = [r.registrable_domain for r in sampled if _manual_label(manual_labels, r) is None]
        if missing:
            raise MissingManualLabelError(missing)
        for r in sampled:
            label = _manual_label(manual_labels, r)
            if not is_valid_label(TaskKind.COUNTRY, label):
                raise DatasetError(f"invalid manual label {label!r} for {r.registrable_domain}")
            records.append(r.with_label(TaskKind.COUNTRY, label))
            provenance[r.registrable_domain] = MANUAL
            generic.add(r.registrable_domain)

    counts: dict[str, int] = {}
    for r in records:
        counts[r.labels[TaskKind.COUNTRY]] = counts.get(r.labels[TaskKind.COUNTRY], 0) + 1
    dropped = {c for c, n in counts.items() if n < min_class}
    if dropped:
        logger.info("dropping %d classes below %d instances: %s", len(dropped), min_class, sorted(dropped))
    kept = tuple(r for r in records if r.labels[TaskKind.COUNTRY] not in dropped)
    kept_domains = {r.registrable_domain for r in kept}
    return DatasetManifest(
        TaskKind.COUNTRY,
        kept,
        {d: p for d, p in provenance.items() if d in kept_domains},
        seed,
        frozenset(generic & kept_domains),
    )


def _manual_label(labels: Mapping[str, str], rec: WebsiteRecord) -> str | None:
    return labels.get(rec.registrable_domain) or labels.get(rec.host)


def build_category_dataset(
    curlie: Iterable[tuple[str, Iterable[str]]],
    per_class: int = 500,
    seed: int = 0,
    categories: Sequence[str] = CATEGORY_TOKENS,
    table: PublicSuffixTable | None = None,
) -> DatasetManifest:
    """Balanced sample of single-category entries, ``per_class`` per category."""
    if per_class < 1:
        raise ValueError("per_class must be >= 1")
    wanted = set(categories)
    pools: dict[str, list[WebsiteRecord]] = {c: [] for c in categories}
    seen: set[str] = set()
    for domain, cats in curlie:
        cats = set(cats)
        if len(cats) != 1:
            continue
        (cat,) = cats
        if cat not in wanted:
            continue
        try:
            rec = normalize_url(domain, table)
        except MalformedInputError:
            continue
        if rec.registrable_domain in seen:
            continue
        seen.add(rec.registrable_domain)
        pools[cat].append(rec)

    rng = random.Random(seed)
    records: list[WebsiteRecord] = []
    for cat in categories:
        pool = pools[cat]
        if len(pool) < per_class:
            raise InsufficientPopulationError(
                f"category {cat}: need {per_class} single-category entries, only {len(pool)} available"
            )
        picked = rng.sample(pool, per_class)
        picked.sort(key=lambda r: r.registrable_domain)
        records.extend(r.with_label(TaskKind.CATEGORY, cat) for r in picked)
    provenance = {r.registrable_domain: SEED_LIST for r in records}
    return DatasetManifest(TaskKind.CATEGORY, tuple(records), provenance, seed)


def load_seed_records(path: str | Path, table: PublicSuffixTable | None = None) -> list[WebsiteRecord]:
    """One URL or domain per line; '#' comments and blank lines ignored."""
    out = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.split("#", 1)[0].strip().split(",")[0].strip()
        if not line:
            continue
        try:
            out.append(normalize_url(line, table))
        except MalformedInputError as exc:
            raise DatasetError(f"{path}:{lineno}: {exc}") from None
    return out
