from webmeasure.crawler.cdp import BrowserLaunchError, find_browser
from webmeasure.crawler.scripts import extract_body_scripts
from webmeasure.crawler.store import ArtifactStore, StoreError
from webmeasure.crawler.types import Cookie, CrawlArtifact, CrawlConfig, CrawlSummary, Outcome
from webmeasure.crawler.visit import crawl_all, visit, visit_async

__all__ = [
    "ArtifactStore",
    "BrowserLaunchError",
    "Cookie",
    "CrawlArtifact",
    "CrawlConfig",
    "CrawlSummary",
    "Outcome",
    "StoreError",
    "crawl_all",
    "extract_body_scripts",
    "find_browser",
    "visit",
    "visit_async",
]
