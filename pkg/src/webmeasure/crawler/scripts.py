"""Hostnames of external scripts embedded in a document body."""

from __future__ import annotations

from html.parser import HTMLParser
from urllib.parse import urljoin, urlsplit

# Elements the HTML tree builder keeps in <head>; anything else starts the body.
_HEAD_ELEMENTS = frozenset({"head", "html", "title", "meta", "link", "style", "script", "base", "noscript", "template"})


class _BodyScriptParser(HTMLParser):
    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self.in_head = False
        self.in_body = False
        self.srcs: list[str] = []

    def handle_starttag(self, tag: str, attrs: list[tuple[str, str | None]]) -> None:
        if tag == "head" and not self.in_body:
            self.in_head = True
        elif tag == "body":
            self.in_body, self.in_head = True, False
        elif not self.in_body and not self.in_head and tag not in _HEAD_ELEMENTS:
            self.in_body = True
        if tag == "script" and self.in_body:
            src = dict(attrs).get("src")
            if src and src.strip():
                self.srcs.append(src.strip())

    def handle_startendtag(self, tag: str, attrs: list[tuple[str, str | None]]) -> None:
        self.handle_starttag(tag, attrs)

    def handle_endtag(self, tag: str) -> None:
        if tag == "head":
            self.in_head = False


def extract_body_scripts(html: bytes | str, base_url: str = "") -> list[str]:
    """Deduplicated script-source hostnames under <body>, in document order.

    Inline scripts carry no src and are skipped. Relative and scheme-relative
    sources are resolved against ``base_url``; non-http(s) sources are dropped.
    """
    if isinstance(html, bytes):
        html = html.decode("utf-8", errors="replace")
    parser = _BodyScriptParser()
    try:
        parser.feed(html)
        parser.close()
    except Exception:  # pragma: no cover - html.parser is error tolerant
        pass
    hosts: list[str] = []
    seen: set[str] = set()
    for src in parser.srcs:
        try:
            parts = urlsplit(urljoin(base_url, src))
            host = parts.hostname
        except ValueError:
            continue
        if parts.scheme not in ("http", "https") or not host:
            continue
        if host not in seen:
            seen.add(host)
            hosts.append(host)
    return hosts
