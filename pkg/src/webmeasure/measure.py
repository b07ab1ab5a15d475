"""Tracker prevalence over crawl artifacts and minimal-scope breakdowns by category."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence
from urllib.parse import urlsplit

from webmeasure.crawler.types import CrawlArtifact, Outcome
from webmeasure.model import TaskKind, normalize_host
from webmeasure.psl import DomainError, PublicSuffixTable, registrable_domain

logger = logging.getLogger(__name__)


class MeasureError(ValueError):
    pass


class TrackerListSchemaError(MeasureError):
    pass


class MissingCountryLabelError(MeasureError):
    pass


class EmptySelectionError(MeasureError):
    pass


class DisjointKeysError(MeasureError):
    pass


@dataclass(frozen=True)
class TrackerList:
    domains: frozenset[str]
    per_category: Mapping[str, int] = field(default_factory=dict)
    name: str = "disconnect"
    retrieved: str | None = None

    def __contains__(self, host: str) -> bool:
        return self.match(host) is not None

    def __len__(self) -> int:
        return len(self.domains)

    def match(self, host: str) -> str | None:
        """Most specific list entry that ``host`` equals or sits under, if any."""
        labels = host.lower().strip(".").split(".")
        for i in range(len(labels)):
            candidate = ".".join(labels[i:])
            if candidate in self.domains:
                return candidate
        return None


def is_tracker(host: str, trackers: TrackerList) -> bool:
    return trackers.match(host) is not None


def load_disconnect(path: str | Path, retrieved: str | None = None) -> TrackerList:
    """Flatten a Disconnect services.json (categories -> entities -> URLs -> domains)."""
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise TrackerListSchemaError(f"$: {path} is not valid JSON ({exc})") from None
    return parse_disconnect(data, name=path.name, retrieved=retrieved)


def parse_disconnect(data: object, name: str = "disconnect", retrieved: str | None = None) -> TrackerList:
    if not isinstance(data, dict) or not isinstance(data.get("categories"), dict):
        raise TrackerListSchemaError("$.categories: expected an object")
    domains: set[str] = set()
    per_category: dict[str, int] = {}
    for cat, entities in data["categories"].items():
        where = f"$.categories.{cat}"
        if not isinstance(entities, list):
            raise TrackerListSchemaError(f"{where}: expected a list of entities")
        found: set[str] = set()
        for i, entity in enumerate(entities):
            if not isinstance(entity, dict):
                raise TrackerListSchemaError(f"{where}[{i}]: expected an object")
            for ename, props in entity.items():
                if not isinstance(props, dict):
                    raise TrackerListSchemaError(f"{where}[{i}].{ename}: expected an object")
                for prop_url, hosts in props.items():
                    # Entities carry flag keys such as "dnt": "eff" next to the URL lists.
                    if not isinstance(hosts, list):
                        continue
                    for j, host in enumerate(hosts):
                        if not isinstance(host, str):
                            raise TrackerListSchemaError(f"{where}[{i}].{ename}.{prop_url}[{j}]: expected a string")
                        host = host.strip().lower().strip(".")
                        if host:
                            found.add(host)
        per_category[cat] = len(found)
        domains |= found
    return TrackerList(frozenset(domains), per_category, name, retrieved)


@dataclass(frozen=True)
class CountryStat:
    sites_total: int
    sites_with_tp_tracker: int

    @property
    def pct(self) -> float:
        return 100.0 * self.sites_with_tp_tracker / self.sites_total


CountryPrevalence = dict[str, CountryStat]


def site_domain(artifact: CrawlArtifact, table: PublicSuffixTable | None = None) -> str:
    """Registrable domain anchoring first-party identity (final URL after redirects)."""
    host = urlsplit(artifact.final_url).hostname if artifact.final_url else None
    if not host:
        return artifact.record.registrable_domain
    try:
        return registrable_domain(normalize_host(host), table)
    except (DomainError, ValueError):
        return artifact.record.registrable_domain


def _cookie_site(domain: str, table: PublicSuffixTable | None) -> str:
    domain = domain.lstrip(".").lower()
    try:
        return registrable_domain(domain, table)
    except DomainError:
        return domain


def has_third_party_tracker_cookie(
    artifact: CrawlArtifact, trackers: TrackerList, table: PublicSuffixTable | None = None
) -> bool:
    site = site_domain(artifact, table)
    for cookie in artifact.cookies:
        host = cookie.domain.lstrip(".").lower()
        if _cookie_site(host, table) != site and is_tracker(host, trackers):
            return True
    return False


def _country(artifact: CrawlArtifact, countries: Mapping[str, str] | None) -> str:
    rec = artifact.record
    if countries is not None:
        label = countries.get(rec.registrable_domain) or countries.get(rec.url)
    else:
        label = rec.labels.get(TaskKind.COUNTRY)
    if not label:
        raise MissingCountryLabelError(f"no country label for {rec.registrable_domain}")
    return label


def _successes(artifacts: Iterable[CrawlArtifact]) -> list[CrawlArtifact]:
    ok = []
    skipped = 0
    for a in artifacts:
        if a.outcome is Outcome.SUCCESS:
            ok.append(a)
        else:
            skipped += 1
    if skipped:
        logger.info("ignoring %d artifacts without a successful visit", skipped)
    return ok


def third_party_tracker_prevalence(
    artifacts: Iterable[CrawlArtifact],
    trackers: TrackerList,
    table: PublicSuffixTable | None = None,
    min_sites: int = 100,
    countries: Mapping[str, str] | None = None,
) -> CountryPrevalence:
    """Share of sites per country with at least one third-party tracker cookie.

    Countries come from each record's Country label unless ``countries`` maps
    registrable domains to labels. Countries below ``min_sites`` are dropped.
    """
    if min_sites < 1:
        raise ValueError("min_sites must be >= 1")
    totals: dict[str, int] = {}
    hits: dict[str, int] = {}
    for a in _successes(artifacts):
        c = _country(a, countries)
        totals[c] = totals.get(c, 0) + 1
        if has_third_party_tracker_cookie(a, trackers, table):
            hits[c] = hits.get(c, 0) + 1
    return {
        c: CountryStat(totals[c], hits.get(c, 0))
        for c in sorted(totals)
        if totals[c] >= min_sites
    }


def top_script_trackers(
    artifacts: Iterable[CrawlArtifact],
    trackers: TrackerList,
    k: int = 5,
    countries: Mapping[str, str] | None = None,
) -> dict[str, list[tuple[str, int]]]:
    """Per country, the k tracker entries embedded by the most sites.

    A site counts once per tracker entry no matter how many of its body
    scripts match. Ties go to the lexicographically smaller entry.
    """
    counts: dict[str, dict[str, int]] = {}
    for a in _successes(artifacts):
        c = _country(a, countries)
        per = counts.setdefault(c, {})
        entries = {m for m in (trackers.match(h) for h in a.body_script_domains) if m}
        for e in entries:
            per[e] = per.get(e, 0) + 1
    return {
        c: sorted(per.items(), key=lambda kv: (-kv[1], kv[0]))[:k]
        for c, per in sorted(counts.items())
    }


@dataclass(frozen=True)
class ScopeRecord:
    url: str
    idp: str
    scopes: tuple[str, ...]
    minimal: bool
    category_a: str
    category_b: str


def _parse_bool(value: object) -> bool:
    if isinstance(value, bool):
        return value
    s = str(value).strip().lower()
    if s in ("1", "true", "yes", "y", "t"):
        return True
    if s in ("0", "false", "no", "n", "f", ""):
        return False
    raise MeasureError(f"not a boolean: {value!r}")


def _scope_from_row(row: Mapping) -> ScopeRecord:
    scopes = row.get("scopes", ())
    if isinstance(scopes, str):
        scopes = tuple(s for s in scopes.replace("|", " ").replace(",", " ").split() if s)
    return ScopeRecord(
        url=row["url"],
        idp=row["idp"],
        scopes=tuple(scopes),
        minimal=_parse_bool(row["minimal"]),
        category_a=row["category_a"],
        category_b=row["category_b"],
    )


def load_scope_records(path: str | Path) -> list[ScopeRecord]:
    """Read ScopeRecords from CSV (header row) or JSON Lines, chosen by suffix."""
    path = Path(path)
    try:
        if path.suffix in (".jsonl", ".json"):
            rows = [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]
        else:
            with open(path, newline="", encoding="utf-8") as fh:
                rows = list(csv.DictReader(fh))
        return [_scope_from_row(r) for r in rows]
    except KeyError as exc:
        raise MeasureError(f"{path}: missing column {exc}") from None


def minimal_scope_by_category(
    records: Sequence[ScopeRecord],
    which: str = "a",
    top_n: int = 10,
    idp_filter: str | None = None,
    rank_by: str | None = "a",
) -> dict[str, dict[str, float]]:
    """Percentage of minimal-scope sites per category.

    Categories are the ``top_n`` most populous under classifier ``rank_by``
    (ties broken by name); ``rank_by=None`` ranks under ``which`` itself.
    """
    if not records:
        raise EmptySelectionError("no scope records")
    which = which.lower()
    rank_by = (rank_by or which).lower()
    for w in (which, rank_by):
        if w not in ("a", "b"):
            raise ValueError(f"classifier must be 'a' or 'b', got {w!r}")

    def cat(r: ScopeRecord, w: str) -> str:
        return r.category_a if w == "a" else r.category_b

    population: dict[str, int] = {}
    for r in records:
        population[cat(r, rank_by)] = population.get(cat(r, rank_by), 0) + 1
    top = [c for c, _ in sorted(population.items(), key=lambda kv: (-kv[1], kv[0]))[:top_n]]

    selected = records
    if idp_filter is not None:
        selected = [r for r in records if r.idp.lower() == idp_filter.lower()]
        if not selected:
            raise EmptySelectionError(f"no records for identity provider {idp_filter!r}")

    out: dict[str, dict[str, float]] = {}
    for c in top:
        members = [r for r in selected if cat(r, which) == c]
        if not members:
            continue
        minimal = sum(r.minimal for r in members)
        out[c] = {"total": len(members), "minimal": minimal, "minimal_pct": 100.0 * minimal / len(members)}
    return out


@dataclass(frozen=True)
class BreakdownComparison:
    deltas: dict[str, float]
    max_delta: float
    max_category: str
    bottom2_a: tuple[str, ...]
    bottom2_b: tuple[str, ...]

    @property
    def bottom2_agree(self) -> bool:
        return set(self.bottom2_a) == set(self.bottom2_b)

    @property
    def max_category_in_bottom2(self) -> bool:
        return self.max_category in self.bottom2_a and self.max_category in self.bottom2_b

    def to_dict(self) -> dict:
        return {
            "deltas": self.deltas,
            "max_delta": self.max_delta,
            "max_category": self.max_category,
            "bottom2_a": list(self.bottom2_a),
            "bottom2_b": list(self.bottom2_b),
            "bottom2_agree": self.bottom2_agree,
            "max_category_in_bottom2": self.max_category_in_bottom2,
        }


def _pct_map(m: Mapping[str, float | Mapping[str, float]]) -> dict[str, float]:
    return {k: float(v["minimal_pct"]) if isinstance(v, Mapping) else float(v) for k, v in m.items()}


def compare_breakdowns(
    a: Mapping[str, float | Mapping[str, float]], b: Mapping[str, float | Mapping[str, float]]
) -> BreakdownComparison:
    """Percentage-point differences between two category breakdowns."""
    pa, pb = _pct_map(a), _pct_map(b)
    keys = [k for k in pa if k in pb]
    if not keys:
        raise DisjointKeysError("breakdowns share no categories")
    deltas = {k: abs(pa[k] - pb[k]) for k in keys}
    max_cat = min(keys, key=lambda k: (-deltas[k], k))

    def bottom2(p: dict[str, float]) -> tuple[str, ...]:
        return tuple(sorted(keys, key=lambda k: (p[k], k))[:2])

    return BreakdownComparison(deltas, deltas[max_cat], max_cat, bottom2(pa), bottom2(pb))


def prevalence_to_json(prev: CountryPrevalence) -> dict:
    return {
        c: {"sites_total": s.sites_total, "sites_with_tp_tracker": s.sites_with_tp_tracker, "pct": s.pct}
        for c, s in prev.items()
    }


def write_prevalence_csv(prev: CountryPrevalence, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["country", "sites_total", "sites_with_tp_tracker", "pct"])
        for c, s in prev.items():
            w.writerow([c, s.sites_total, s.sites_with_tp_tracker, repr(s.pct)])
