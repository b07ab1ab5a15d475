"""Landing-page visits with a fresh browser per site."""

from __future__ import annotations

import asyncio
import base64
import logging
import time
from typing import Iterable

from webmeasure.crawler.cdp import Browser, BrowserLaunchError, CDPError, Connection, find_browser
from webmeasure.crawler.scripts import extract_body_scripts
from webmeasure.crawler.store import ArtifactStore, StoreError
from webmeasure.crawler.types import Cookie, CrawlArtifact, CrawlConfig, CrawlSummary, Outcome
from webmeasure.listsrc import DatasetManifest
from webmeasure.model import WebsiteRecord

logger = logging.getLogger(__name__)

_HARVEST_STEP_TIMEOUT = 10.0


def _nav_reason(error_text: str) -> str:
    if "NAME_NOT_RESOLVED" in error_text or "NAME_RESOLUTION_FAILED" in error_text:
        return f"dns ({error_text})"
    if "TIMED_OUT" in error_text:
        return f"timeout ({error_text})"
    return error_text


async def _evaluate(conn: Connection, session: str, expression: str):
    res = await conn.send("Runtime.evaluate", {"expression": expression, "returnByValue": True}, session)
    return res.get("result", {}).get("value")


async def _all_cookies(conn: Connection, session: str) -> list[dict]:
    # Browser-wide query sees http_only and cross-site cookies that document.cookie cannot.
    try:
        return (await conn.send("Storage.getCookies", {}))["cookies"]
    except CDPError:
        return (await conn.send("Network.getAllCookies", {}, session))["cookies"]


async def visit_async(record: WebsiteRecord, config: CrawlConfig | None = None) -> CrawlArtifact:
    config = config or CrawlConfig()
    if not record.url.startswith(("http://", "https://")):
        raise ValueError(f"not an http(s) URL: {record.url}")
    executable = find_browser(config.browser_path)
    if executable is None:
        raise BrowserLaunchError("no Chromium-family browser found; set WEBMEASURE_BROWSER")
    browser = Browser(
        executable,
        headful=config.headful,
        window=config.viewport,
        extra_args=config.browser_args,
        launch_timeout=config.launch_timeout,
    )
    ws_url = await browser.start()
    try:
        conn = await Connection.connect(ws_url)
    except Exception as exc:
        await browser.close()
        raise BrowserLaunchError(f"cannot connect to DevTools at {ws_url}: {exc}") from exc
    try:
        return await _drive(conn, record, config)
    finally:
        await conn.close()
        await browser.close()


async def _drive(conn: Connection, record: WebsiteRecord, config: CrawlConfig) -> CrawlArtifact:
    target = await conn.send("Target.createTarget", {"url": "about:blank"})
    session = (await conn.send("Target.attachToTarget", {"targetId": target["targetId"], "flatten": True}))[
        "sessionId"
    ]
    await conn.send("Page.enable", {}, session)
    await conn.send("Network.enable", {}, session)
    width, height = config.viewport
    await conn.send(
        "Emulation.setDeviceMetricsOverride",
        {"width": width, "height": height, "deviceScaleFactor": 1, "mobile": False},
        session,
    )
    frame_id = (await conn.send("Page.getFrameTree", {}, session))["frameTree"]["frame"]["id"]
    status = {"code": 0}

    def on_event(method: str, sess: str | None, params: dict) -> None:
        if (
            method == "Network.responseReceived"
            and sess == session
            and params.get("type") == "Document"
            and params.get("frameId") == frame_id
        ):
            status["code"] = int(params["response"].get("status", 0))

    conn.on(on_event)
    loaded = conn.expect("Page.loadEventFired", session)
    started = time.monotonic()
    outcome, reason = Outcome.SUCCESS, None
    try:
        nav = await asyncio.wait_for(conn.send("Page.navigate", {"url": record.url}, session), config.nav_timeout)
        if nav.get("errorText"):
            outcome, reason = Outcome.NAV_ERROR, _nav_reason(nav["errorText"])
        else:
            remaining = max(0.0, config.nav_timeout - (time.monotonic() - started))
            await asyncio.wait_for(loaded, remaining)
    except asyncio.TimeoutError:
        outcome, reason = Outcome.TIMEOUT, f"no load event within {config.nav_timeout:g}s"
    if not loaded.done():
        loaded.cancel()

    if outcome is Outcome.NAV_ERROR:
        return CrawlArtifact(record=record, outcome=outcome, reason=reason, http_status=status["code"])

    if outcome is Outcome.SUCCESS:
        await asyncio.sleep(config.load_wait)
    harvest = await _harvest(conn, session, best_effort=outcome is not Outcome.SUCCESS)
    if outcome is Outcome.SUCCESS and (harvest["screenshot"] is None or harvest["html"] is None):
        outcome, reason = Outcome.NAV_ERROR, "harvest failed"
    final_url = harvest["final_url"] or record.url
    html = harvest["html"]
    return CrawlArtifact(
        record=record,
        outcome=outcome,
        reason=reason,
        final_url=final_url,
        http_status=status["code"],
        screenshot=harvest["screenshot"],
        cookies=tuple(Cookie.from_cdp(c, config.store_cookie_values) for c in harvest["cookies"]),
        body_script_domains=tuple(extract_body_scripts(html, final_url)) if html is not None else (),
        html=html,
    )


async def _harvest(conn: Connection, session: str, best_effort: bool) -> dict:
    out: dict = {"final_url": "", "html": None, "screenshot": None, "cookies": []}
    step = 3.0 if best_effort else _HARVEST_STEP_TIMEOUT

    async def attempt(key: str, coro) -> None:
        try:
            out[key] = await asyncio.wait_for(coro, step)
        except (asyncio.TimeoutError, CDPError, ConnectionError) as exc:
            logger.debug("harvesting %s failed: %s", key, exc)

    await attempt("final_url", _evaluate(conn, session, "location.href"))
    await attempt("cookies", _all_cookies(conn, session))
    html_js = "document.documentElement ? document.documentElement.outerHTML : ''"

    async def html() -> bytes:
        return ("<!DOCTYPE html>\n" + (await _evaluate(conn, session, html_js) or "")).encode("utf-8")

    async def screenshot() -> bytes:
        res = await conn.send("Page.captureScreenshot", {"format": "png"}, session)
        return base64.b64decode(res["data"])

    await attempt("html", html())
    await attempt("screenshot", screenshot())
    return out


def visit(record: WebsiteRecord, config: CrawlConfig | None = None) -> CrawlArtifact:
    """Visit one landing page in a new browser with an empty profile."""
    return asyncio.run(visit_async(record, config))


async def crawl_all_async(
    records: Iterable[WebsiteRecord], config: CrawlConfig, store: ArtifactStore
) -> CrawlSummary:
    summary = CrawlSummary()
    pending = []
    for rec in records:
        if store.has(rec.registrable_domain):
            summary.skipped += 1
        else:
            pending.append(rec)
    gate = asyncio.Semaphore(config.max_parallel)

    async def one(rec: WebsiteRecord) -> None:
        async with gate:
            try:
                artifact = await visit_async(rec, config)
            except (BrowserLaunchError, StoreError):
                raise
            except Exception as exc:
                logger.warning("visit to %s failed: %r", rec.url, exc)
                artifact = CrawlArtifact(record=rec, outcome=Outcome.NAV_ERROR, reason=repr(exc))
            store.write(artifact)
            summary.add(artifact.outcome)
            logger.info("%s: %s", rec.registrable_domain, artifact.outcome.value)

    tasks = [asyncio.ensure_future(one(r)) for r in pending]
    try:
        await asyncio.gather(*tasks)
    except BaseException:
        for t in tasks:
            t.cancel()
        await asyncio.gather(*tasks, return_exceptions=True)
        raise
    return summary


def crawl_all(
    manifest: DatasetManifest | Iterable[WebsiteRecord], config: CrawlConfig, store: ArtifactStore
) -> CrawlSummary:
    """Visit every record not already in ``store``, at most ``max_parallel`` at a time.

    Per-site failures are stored as NavError/Timeout artifacts. Store failures
    and browser launch failures abort the crawl.
    """
    records = manifest.records if isinstance(manifest, DatasetManifest) else list(manifest)
    return asyncio.run(crawl_all_async(records, config, store))
