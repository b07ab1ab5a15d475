"""On-disk artifact store: one directory per registrable domain."""

from __future__ import annotations

import json
import os
import shutil
import tempfile
import threading
from pathlib import Path
from typing import Iterator

from webmeasure.crawler.types import Cookie, CrawlArtifact, Outcome
from webmeasure.model import TaskKind, normalize_url


class StoreError(OSError):
    pass


class ArtifactStore:
    """Directory layout: ``<root>/<registrable_domain>/{meta.json,screenshot.png,page.html,cookies.json}``.

    Writes go to a temporary sibling directory that is renamed into place,
    so a crash never leaves a half-written artifact that looks complete.
    """

    META = "meta.json"

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self._lock = threading.Lock()
        try:
            self.root.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise StoreError(f"cannot create artifact store {self.root}: {exc}") from exc

    def path_for(self, domain: str) -> Path:
        return self.root / domain

    def has(self, domain: str) -> bool:
        return (self.path_for(domain) / self.META).is_file()

    def domains(self) -> list[str]:
        return sorted(p.name for p in self.root.iterdir() if (p / self.META).is_file())

    def write(self, artifact: CrawlArtifact) -> Path:
        rec = artifact.record
        target = self.path_for(rec.registrable_domain)
        meta = {
            "url": rec.url,
            "registrable_domain": rec.registrable_domain,
            "tranco_rank": rec.tranco_rank,
            "labels": {t.value: v for t, v in rec.labels.items()},
            "outcome": artifact.outcome.value,
            "reason": artifact.reason,
            "final_url": artifact.final_url,
            "http_status": artifact.http_status,
            "body_script_domains": list(artifact.body_script_domains),
            "fetched_at": artifact.fetched_at,
            "has_screenshot": artifact.screenshot is not None,
            "has_html": artifact.html is not None,
        }
        try:
            tmp = Path(tempfile.mkdtemp(prefix=f".{rec.registrable_domain}.", dir=self.root))
            if artifact.screenshot is not None:
                (tmp / "screenshot.png").write_bytes(artifact.screenshot)
            if artifact.html is not None:
                (tmp / "page.html").write_bytes(artifact.html)
            (tmp / "cookies.json").write_text(
                json.dumps([c.to_dict() for c in artifact.cookies], indent=2), encoding="utf-8"
            )
            (tmp / self.META).write_text(json.dumps(meta, indent=2, sort_keys=True), encoding="utf-8")
            with self._lock:
                if target.exists():
                    shutil.rmtree(target)
                os.replace(tmp, target)
        except OSError as exc:
            raise StoreError(f"cannot write artifact for {rec.registrable_domain}: {exc}") from exc
        return target

    def read(self, domain: str) -> CrawlArtifact:
        d = self.path_for(domain)
        meta = json.loads((d / self.META).read_text(encoding="utf-8"))
        rec = normalize_url(meta["url"]).with_rank(meta.get("tranco_rank"))
        for task, label in meta.get("labels", {}).items():
            rec = rec.with_label(TaskKind.parse(task), label)
        cookies = tuple(Cookie.from_dict(c) for c in json.loads((d / "cookies.json").read_text(encoding="utf-8")))
        shot = d / "screenshot.png"
        page = d / "page.html"
        return CrawlArtifact(
            record=rec,
            outcome=Outcome(meta["outcome"]),
            final_url=meta.get("final_url", ""),
            http_status=meta.get("http_status", 0),
            screenshot=shot.read_bytes() if shot.exists() else None,
            cookies=cookies,
            body_script_domains=tuple(meta.get("body_script_domains", ())),
            html=page.read_bytes() if page.exists() else None,
            reason=meta.get("reason"),
            fetched_at=meta.get("fetched_at", ""),
        )

    def __iter__(self) -> Iterator[CrawlArtifact]:
        for domain in self.domains():
            yield self.read(domain)

    def successful_domains(self) -> set[str]:
        out = set()
        for domain in self.domains():
            meta = json.loads((self.path_for(domain) / self.META).read_text(encoding="utf-8"))
            if meta["outcome"] == Outcome.SUCCESS.value:
                out.add(domain)
        return out
