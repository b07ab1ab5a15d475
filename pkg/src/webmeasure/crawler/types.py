from __future__ import annotations

import enum
from dataclasses import dataclass, field, fields
from datetime import datetime, timezone

from webmeasure.model import WebsiteRecord


class Outcome(str, enum.Enum):
    SUCCESS = "success"
    NAV_ERROR = "nav_error"
    TIMEOUT = "timeout"


@dataclass(frozen=True)
class CrawlConfig:
    load_wait: float = 10.0
    nav_timeout: float = 30.0
    headful: bool = True
    viewport: tuple[int, int] = (1366, 768)
    screenshot_format: str = "png"
    max_parallel: int = 1
    browser_path: str | None = None
    browser_args: tuple[str, ...] = ()
    store_cookie_values: bool = False
    launch_timeout: float = 30.0

    def __post_init__(self) -> None:
        if self.load_wait > self.nav_timeout:
            raise ValueError("load_wait must not exceed nav_timeout")
        if self.max_parallel < 1:
            raise ValueError("max_parallel must be >= 1")
        if self.screenshot_format != "png":
            raise ValueError("only png screenshots are supported")


@dataclass(frozen=True)
class Cookie:
    name: str
    domain: str
    value_length: int = 0
    path: str = "/"
    expires: float | None = None
    secure: bool = False
    http_only: bool = False
    same_site: str | None = None
    value: str | None = None

    def __post_init__(self) -> None:
        if not self.domain.lstrip("."):
            raise ValueError("cookie domain must be non-empty")
        object.__setattr__(self, "domain", self.domain.lstrip(".").lower())
        if self.value_length < 0:
            raise ValueError("value_length must be >= 0")

    @classmethod
    def from_cdp(cls, raw: dict, keep_value: bool = False) -> Cookie:
        expires = raw.get("expires")
        # Session cookies report expires = -1.
        if expires is not None and expires < 0:
            expires = None
        value = raw.get("value", "")
        return cls(
            name=raw["name"],
            domain=raw["domain"],
            value_length=len(value),
            path=raw.get("path", "/"),
            expires=expires,
            secure=bool(raw.get("secure")),
            http_only=bool(raw.get("httpOnly")),
            same_site=raw.get("sameSite"),
            value=value if keep_value else None,
        )

    def to_dict(self) -> dict:
        d = {
            "name": self.name,
            "domain": self.domain,
            "value_length": self.value_length,
            "path": self.path,
            "expires": self.expires,
            "secure": self.secure,
            "http_only": self.http_only,
            "same_site": self.same_site,
        }
        if self.value is not None:
            d["value"] = self.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> Cookie:
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})


@dataclass(frozen=True)
class CrawlArtifact:
    record: WebsiteRecord
    outcome: Outcome
    final_url: str = ""
    http_status: int = 0
    screenshot: bytes | None = None
    cookies: tuple[Cookie, ...] = ()
    body_script_domains: tuple[str, ...] = ()
    html: bytes | None = None
    reason: str | None = None
    fetched_at: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat(timespec="seconds"))

    def __post_init__(self) -> None:
        if self.outcome is Outcome.SUCCESS and (self.screenshot is None or self.html is None):
            raise ValueError("successful artifacts need a screenshot and html")

    @property
    def ok(self) -> bool:
        return self.outcome is Outcome.SUCCESS


@dataclass
class CrawlSummary:
    success: int = 0
    nav_error: int = 0
    timeout: int = 0
    skipped: int = 0

    def add(self, outcome: Outcome) -> None:
        setattr(self, outcome.value, getattr(self, outcome.value) + 1)

    @property
    def visited(self) -> int:
        return self.success + self.nav_error + self.timeout

    def to_dict(self) -> dict[str, int]:
        return {"success": self.success, "nav_error": self.nav_error, "timeout": self.timeout, "skipped": self.skipped}
