"""Batch records into prompts, call a backend, and collect validated predictions."""

from __future__ import annotations

import hashlib
import json
import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterator, Mapping, Sequence

from webmeasure.crawler.store import ArtifactStore, StoreError
from webmeasure.crawler.types import CrawlArtifact
from webmeasure.listsrc import DatasetManifest
from webmeasure.llmclient import CompletionRequest, LLMError
from webmeasure.model import GOV, WebsiteRecord
from webmeasure.prompts.parsing import (
    ParsedPredictions,
    ResponseError,
    expected_urls_from_prompt,
    parse_response,
    response_object,
)
from webmeasure.prompts.templates import PromptTemplate, render

log = logging.getLogger(__name__)


@dataclass
class PredictionSet:
    predictions: dict[str, tuple[str, ...]] = field(default_factory=dict)
    unclassified: dict[str, str] = field(default_factory=dict)
    countries: dict[str, str] = field(default_factory=dict)
    requests: int = 0

    def __len__(self) -> int:
        return len(self.predictions) + len(self.unclassified)


class PredictionStore:
    """Append-only JSON Lines file of per-URL outcomes. When a URL appears twice, the later line wins."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()

    def rows(self) -> Iterator[dict]:
        if not self.path.exists():
            return
        try:
            text = self.path.read_text(encoding="utf-8")
        except OSError as exc:
            raise StoreError(f"cannot read {self.path}: {exc}") from exc
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip():
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError:
                # A crash mid-write leaves at most one torn trailing line.
                log.warning("%s:%d: skipping unreadable line", self.path, lineno)

    def latest(self, template_hash: str | None = None, backend: str | None = None) -> dict[str, dict]:
        out: dict[str, dict] = {}
        for row in self.rows():
            if template_hash is not None and row.get("template_hash") != template_hash:
                continue
            if backend is not None and row.get("backend") != backend:
                continue
            out[row["url"]] = row
        return out

    def append(self, rows: Sequence[dict]) -> None:
        if not rows:
            return
        data = "".join(json.dumps(r, sort_keys=True, ensure_ascii=False) + "\n" for r in rows)
        with self._lock:
            try:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with self.path.open("a", encoding="utf-8") as fh:
                    fh.write(data)
                    fh.flush()
            except OSError as exc:
                raise StoreError(f"cannot write {self.path}: {exc}") from exc


def load_predictions(path: str | Path) -> PredictionSet:
    """Read a prediction file into a PredictionSet, keeping the last line for each URL."""
    out = PredictionSet()
    for url, row in PredictionStore(path).latest().items():
        if row.get("labels"):
            out.predictions[url] = tuple(row["labels"])
            if row.get("country"):
                out.countries[url] = row["country"]
        else:
            out.unclassified[url] = row.get("reason", "unclassified")
    return out


def _digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _artifact_lookup(artifacts) -> Callable[[WebsiteRecord], CrawlArtifact | None]:
    if artifacts is None:
        return lambda rec: None
    if isinstance(artifacts, ArtifactStore):
        return lambda rec: artifacts.read(rec.registrable_domain) if artifacts.has(rec.registrable_domain) else None
    if isinstance(artifacts, Mapping):
        return lambda rec: artifacts.get(rec.registrable_domain) or artifacts.get(rec.url)
    by_domain = {a.record.registrable_domain: a for a in artifacts}
    return lambda rec: by_domain.get(rec.registrable_domain)


def classify(
    manifest: DatasetManifest | Sequence[WebsiteRecord],
    template: PromptTemplate,
    backend,
    batch_size: int = 10,
    store: PredictionStore | str | Path | None = None,
    artifacts=None,
    retries: int = 2,
) -> PredictionSet:
    """Classify every record, resuming from ``store`` when it already holds results.

    A batch whose response fails validation is sent again up to ``retries``
    times, then split in half and each half handled the same way. A single
    record that still fails is recorded as unclassified. Backend errors
    (quota, auth, transport) mark the whole batch unclassified without splitting.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    if retries < 0:
        raise ValueError("retries must be >= 0")
    records = list(manifest.records if isinstance(manifest, DatasetManifest) else manifest)
    if isinstance(store, (str, Path)):
        store = PredictionStore(store)
    backend_name = getattr(backend, "name", type(backend).__name__)
    result = PredictionSet()
    lock = threading.Lock()

    todo: list[WebsiteRecord] = []
    done = store.latest(template.template_hash, backend_name) if store is not None else {}
    for rec in records:
        row = done.get(rec.url)
        if row and row.get("labels"):
            result.predictions[rec.url] = tuple(row["labels"])
            if row.get("country"):
                result.countries[rec.url] = row["country"]
        else:
            todo.append(rec)

    find = _artifact_lookup(artifacts)
    shots: dict[str, CrawlArtifact] = {}
    ready: list[WebsiteRecord] = []
    missing_shot: list[tuple[WebsiteRecord, str]] = []
    for rec in todo:
        if template.with_screenshots:
            art = find(rec)
            if art is None or not art.ok or art.screenshot is None:
                missing_shot.append((rec, "no screenshot available"))
                continue
            shots[rec.registrable_domain] = art
        ready.append(rec)

    def base_row(rec: WebsiteRecord) -> dict:
        return {
            "url": rec.url,
            "task": template.task.value,
            "backend": backend_name,
            "template_hash": template.template_hash,
            "prompt_mode": template.prompt_mode,
        }

    def record_fail(batch: Sequence[tuple[WebsiteRecord, str]]) -> None:
        rows = [{**base_row(rec), "labels": [], "raw_response_digest": None, "reason": reason} for rec, reason in batch]
        if store is not None:
            store.append(rows)
        with lock:
            for rec, reason in batch:
                result.unclassified[rec.url] = reason

    def record_ok(batch: Sequence[WebsiteRecord], parsed: ParsedPredictions, raw: str) -> None:
        digest = _digest(raw)
        rows = []
        for rec in batch:
            row = {**base_row(rec), "labels": list(parsed.labels[rec.url]), "raw_response_digest": digest}
            if rec.url in parsed.countries:
                row["country"] = parsed.countries[rec.url]
            rows.append(row)
        if store is not None:
            store.append(rows)
        with lock:
            for rec in batch:
                result.predictions[rec.url] = parsed.labels[rec.url]
                result.unclassified.pop(rec.url, None)
                if rec.url in parsed.countries:
                    result.countries[rec.url] = parsed.countries[rec.url]

    def run(batch: list[WebsiteRecord]) -> None:
        bundle = render(template, batch, shots if template.with_screenshots else None)
        request = CompletionRequest(bundle.text, bundle.images)
        last = ""
        for attempt in range(retries + 1):
            with lock:
                result.requests += 1
            try:
                raw = backend.complete(request).text
            except LLMError as exc:
                log.warning("backend %s failed on a batch of %d: %s", backend_name, len(batch), exc)
                record_fail([(r, f"backend error: {exc}") for r in batch])
                return
            try:
                parsed = parse_response(raw, bundle, template)
            except ResponseError as exc:
                last = str(exc)
                log.info("attempt %d/%d: %s", attempt + 1, retries + 1, exc)
                continue
            record_ok(batch, parsed, raw)
            return
        if len(batch) == 1:
            record_fail([(batch[0], f"invalid response after {retries + 1} attempts: {last}")])
            return
        mid = len(batch) // 2
        run(batch[:mid])
        run(batch[mid:])

    if missing_shot:
        record_fail(missing_shot)
    batches = [ready[i : i + batch_size] for i in range(0, len(ready), batch_size)]
    workers = max(1, int(getattr(backend, "max_concurrent", 1) or 1))
    if workers == 1 or len(batches) <= 1:
        for b in batches:
            run(b)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for fut in [pool.submit(run, b) for b in batches]:
                fut.result()
    return result


def planted_generator(
    truth: Mapping[str, tuple[str, ...]],
    template: PromptTemplate,
    wrong: Callable[[str, tuple[str, ...]], tuple[str, ...]] | None = None,
    countries: Mapping[str, str] | None = None,
):
    """Mock-backend generator answering with ``truth`` except for corrupted URLs.

    Corruption flips each affected URL to a different valid label, so the
    response still parses and the error shows up in accuracy rather than as
    an unclassified record.
    """
    vocab = template.labels_vocabulary
    countries = countries or {}

    def default_wrong(url: str, labels: tuple[str, ...]) -> tuple[str, ...]:
        pool = [v for v in vocab if v not in labels]
        k = template.labels_per_site
        start = int(_digest(url)[:8], 16) % len(pool)
        return tuple(pool[(start + i) % len(pool)] for i in range(k))

    wrong = wrong or default_wrong

    def generate(request: CompletionRequest, corrupt: Callable[[str], bool]) -> str:
        urls = expected_urls_from_prompt(request.text)
        labels = {}
        for url in urls:
            true = tuple(truth[url])
            labels[url] = wrong(url, true) if corrupt(url) else true
        cc = {u: countries[u] for u in urls if u in countries and labels[u][0] == GOV}
        return json.dumps(response_object(ParsedPredictions(labels, cc), template))

    return generate
