"""Core domain types shared across the toolkit."""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field, replace
from typing import Mapping
from urllib.parse import urlsplit, urlunsplit

from webmeasure.psl import PublicSuffixTable, registrable_domain


class MalformedInputError(ValueError):
    pass


class TaskKind(str, enum.Enum):
    GOVERNMENTAL = "governmental"
    COUNTRY = "country"
    CATEGORY = "category"

    @classmethod
    def parse(cls, value: str | TaskKind) -> TaskKind:
        if isinstance(value, TaskKind):
            return value
        try:
            return cls(value.lower())
        except ValueError:
            raise ValueError(f"unknown task {value!r}; expected one of {[t.value for t in cls]}") from None


GOV = "gov"
NON_GOV = "non-gov"
INTERNATIONAL = "international"
GOVERNMENTAL_LABELS = (GOV, NON_GOV)

# Curlie/DMOZ top-level taxonomy.
CATEGORY_TOKENS = (
    "Arts",
    "Business",
    "Computers",
    "Games",
    "Health",
    "Home",
    "Kids_and_Teens",
    "News",
    "Recreation",
    "Reference",
    "Science",
    "Shopping",
    "Society",
    "Sports",
)

_COUNTRY_CODE = re.compile(r"^[A-Z]{2}$")


def is_valid_label(task: TaskKind, label: str, vocabulary: tuple[str, ...] | None = None) -> bool:
    if task is TaskKind.GOVERNMENTAL:
        return label in GOVERNMENTAL_LABELS
    if task is TaskKind.COUNTRY:
        return label == INTERNATIONAL or bool(_COUNTRY_CODE.match(label))
    return label in (vocabulary or CATEGORY_TOKENS)


_LABEL = re.compile(r"^[a-z0-9_]([a-z0-9_-]*[a-z0-9_])?$")
_IPV4 = re.compile(r"^\d+(\.\d+){3}$")


@dataclass(frozen=True)
class WebsiteRecord:
    """A site under study with its identity and any task labels."""

    url: str
    host: str
    registrable_domain: str
    tranco_rank: int | None = None
    labels: Mapping[TaskKind, str] = field(default_factory=dict)
    predictions: Mapping[TaskKind, tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not (self.host == self.registrable_domain or self.host.endswith("." + self.registrable_domain)):
            raise MalformedInputError(f"{self.registrable_domain!r} is not a suffix of {self.host!r}")
        for task, preds in self.predictions.items():
            limit = 2 if task is TaskKind.CATEGORY else 1
            if len(preds) > limit:
                raise MalformedInputError(f"{task.value} allows at most {limit} predictions, got {len(preds)}")

    def with_label(self, task: TaskKind, label: str) -> WebsiteRecord:
        return replace(self, labels={**self.labels, task: label})

    def with_prediction(self, task: TaskKind, labels: tuple[str, ...]) -> WebsiteRecord:
        return replace(self, predictions={**self.predictions, task: tuple(labels)})

    def with_rank(self, rank: int | None) -> WebsiteRecord:
        return replace(self, tranco_rank=rank)


def normalize_host(host: str) -> str:
    host = host.strip().lower().rstrip(".")
    if not host:
        raise MalformedInputError("empty host")
    if _IPV4.match(host) or ":" in host or host.startswith("["):
        raise MalformedInputError(f"IP-literal hosts are not supported: {host!r}")
    for label in host.split("."):
        if len(label) > 63 or not _LABEL.match(label):
            raise MalformedInputError(f"invalid hostname {host!r}")
    return host


def normalize_url(raw: str, table: PublicSuffixTable | None = None) -> WebsiteRecord:
    """Turn a bare domain or URL into a WebsiteRecord.

    Scheme defaults to https; host is lowercased; path and query survive
    untouched. Applying this to a record's own ``url`` is a no-op.
    """
    if raw is None or not raw.strip():
        raise MalformedInputError("empty input")
    text = raw.strip()
    if any(c.isspace() for c in text):
        raise MalformedInputError(f"whitespace in {raw!r}")
    if "://" not in text:
        text = "https://" + text
    parts = urlsplit(text)
    if parts.scheme.lower() not in ("http", "https"):
        raise MalformedInputError(f"unsupported scheme in {raw!r}")
    try:
        hostname = parts.hostname
        port = parts.port
    except ValueError as exc:
        raise MalformedInputError(f"invalid URL {raw!r}: {exc}") from None
    if not hostname:
        raise MalformedInputError(f"no host in {raw!r}")
    host = normalize_host(hostname)
    netloc = host if port is None else f"{host}:{port}"
    path = "" if parts.path == "/" and not parts.query else parts.path
    url = urlunsplit((parts.scheme.lower(), netloc, path, parts.query, ""))
    try:
        reg = registrable_domain(host, table)
    except ValueError as exc:
        raise MalformedInputError(str(exc)) from None
    return WebsiteRecord(url=url, host=host, registrable_domain=reg)
