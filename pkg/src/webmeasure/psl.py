"""Public suffix list parsing and registrable-domain (eTLD+1) lookup."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path


class DomainError(ValueError):
    """Base class for hostname problems."""


class EmptyHostError(DomainError):
    pass


class PublicSuffixOnlyError(DomainError):
    """The host is itself a public suffix and has no registrable part."""


def _to_ascii(rule: str) -> str | None:
    try:
        return ".".join(label.encode("idna").decode("ascii") for label in rule.split("."))
    except UnicodeError:
        return None


@dataclass(frozen=True)
class PublicSuffixTable:
    """Rule set in the publicsuffix.org format.

    Rules are stored as label tuples without their marker: ``exact`` holds
    plain rules, ``wildcard`` holds the parent of ``*.`` rules, and
    ``exception`` holds ``!`` rules.
    """

    exact: frozenset[str] = field(default_factory=frozenset)
    wildcard: frozenset[str] = field(default_factory=frozenset)
    exception: frozenset[str] = field(default_factory=frozenset)

    @classmethod
    def parse(cls, text: str) -> PublicSuffixTable:
        exact, wildcard, exception = set(), set(), set()
        for line in text.splitlines():
            # Only the first whitespace-delimited token of a line is the rule.
            line = line.strip().split(" ")[0].split("\t")[0]
            if not line or line.startswith("//"):
                continue
            line = line.lower()
            if line.startswith("!"):
                target, rule = exception, line[1:]
            elif line.startswith("*."):
                target, rule = wildcard, line[2:]
            else:
                target, rule = exact, line
            target.add(rule)
            # The list spells IDN rules in Unicode; hosts usually arrive punycoded.
            if not rule.isascii():
                ascii_rule = _to_ascii(rule)
                if ascii_rule:
                    target.add(ascii_rule)
        return cls(frozenset(exact), frozenset(wildcard), frozenset(exception))

    @classmethod
    def from_file(cls, path: str | Path) -> PublicSuffixTable:
        return cls.parse(Path(path).read_text(encoding="utf-8"))

    def __len__(self) -> int:
        return len(self.exact) + len(self.wildcard) + len(self.exception)

    def public_suffix(self, host: str) -> str:
        """Return the longest matching public suffix of ``host``.

        Unlisted TLDs fall back to the implicit ``*`` rule, so the last label
        is always a suffix.
        """
        labels = _split(host)
        n = len(labels)
        best = 1
        for i in range(n):
            candidate = ".".join(labels[i:])
            size = n - i
            if candidate in self.exception:
                # Exception rules win outright; the suffix drops the leftmost label.
                return ".".join(labels[i + 1 :])
            if size > best and candidate in self.exact:
                best = size
            if i > 0 and size + 1 > best and candidate in self.wildcard:
                best = size + 1
        return ".".join(labels[n - best :])

    def registrable_domain(self, host: str) -> str:
        labels = _split(host)
        suffix = self.public_suffix(host)
        k = suffix.count(".") + 1
        if len(labels) <= k:
            raise PublicSuffixOnlyError(f"{host!r} is a public suffix")
        return ".".join(labels[-(k + 1) :])


def _split(host: str) -> list[str]:
    host = host.strip().lower()
    if not host:
        raise EmptyHostError("empty host")
    if host.startswith(".") or host.endswith(".") or ".." in host:
        raise EmptyHostError(f"empty label in {host!r}")
    return host.split(".")


@lru_cache(maxsize=1)
def default_table() -> PublicSuffixTable:
    """The bundled snapshot of the public suffix list."""
    text = resources.files("webmeasure").joinpath("data/public_suffix_list.dat").read_text("utf-8")
    return PublicSuffixTable.parse(text)


def registrable_domain(host: str, table: PublicSuffixTable | None = None) -> str:
    return (table or default_table()).registrable_domain(host)


def same_site(a: str, b: str, table: PublicSuffixTable | None = None) -> bool:
    return registrable_domain(a, table) == registrable_domain(b, table)
