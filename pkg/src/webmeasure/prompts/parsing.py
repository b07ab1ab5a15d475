"""Validate and decode the constrained JSON a model returns for one prompt."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Any, Sequence

from webmeasure.model import GOV, NON_GOV, TaskKind
from webmeasure.prompts.countries import canonical_country
from webmeasure.prompts.templates import PromptBundle, PromptError, PromptTemplate


class ResponseError(PromptError):
    """Base for parse failures. The batch can be sent again."""

    retryable = True


class MalformedJSONError(ResponseError):
    pass


class MissingUrlsError(ResponseError):
    def __init__(self, missing: Sequence[str]):
        self.missing = tuple(missing)
        super().__init__("response is missing URLs: " + ", ".join(self.missing))


class ExtraUrlsError(ResponseError):
    def __init__(self, extra: Sequence[str]):
        self.extra = tuple(extra)
        super().__init__("response has unexpected URLs: " + ", ".join(self.extra))


class InvalidLabelError(ResponseError):
    def __init__(self, url: str, value: Any):
        self.url, self.value = url, value
        super().__init__(f"invalid label {value!r} for {url}")


class WrongCardinalityError(ResponseError):
    def __init__(self, url: str, got: int, want: int):
        self.url = url
        super().__init__(f"{url}: expected {want} label(s), got {got}")


@dataclass(frozen=True)
class ParsedPredictions:
    labels: dict[str, tuple[str, ...]]
    countries: dict[str, str] = field(default_factory=dict)


_FENCE = re.compile(r"^\s*```[A-Za-z0-9_-]*[ \t]*\r?\n?(.*?)\r?\n?```\s*$", re.S)


def strip_fences(raw: str) -> str:
    m = _FENCE.match(raw)
    return m.group(1) if m else raw.strip()


def _as_bool(url: str, v: Any) -> bool:
    if isinstance(v, bool):
        return v
    if isinstance(v, str) and v.strip().lower() in ("true", "false"):
        return v.strip().lower() == "true"
    raise InvalidLabelError(url, v)


def _category_lookup(vocabulary: Sequence[str]) -> dict[str, str]:
    out = {}
    for token in vocabulary:
        out[token] = token
        out[token.lower()] = token
        out[token.lower().replace("_", " ")] = token
    return out


def parse_response(raw: str, bundle: PromptBundle, template: PromptTemplate) -> ParsedPredictions:
    body = strip_fences(raw)
    try:
        data = json.loads(body)
    except json.JSONDecodeError as exc:
        raise MalformedJSONError(f"response is not JSON: {exc}") from None
    if not isinstance(data, dict):
        raise MalformedJSONError(f"response is a JSON {type(data).__name__}, expected an object")

    expected = bundle.expected_urls
    missing = [u for u in expected if u not in data]
    if missing:
        raise MissingUrlsError(missing)
    extra = sorted(set(data) - set(expected))
    if extra:
        raise ExtraUrlsError(extra)

    vocab = set(template.labels_vocabulary)
    labels: dict[str, tuple[str, ...]] = {}
    countries: dict[str, str] = {}
    lookup = _category_lookup(template.labels_vocabulary) if template.task is TaskKind.CATEGORY else {}

    for url in expected:
        entry = data[url]
        if template.task is TaskKind.GOVERNMENTAL:
            if not isinstance(entry, dict) or "gov_site" not in entry:
                raise InvalidLabelError(url, entry)
            is_gov = _as_bool(url, entry["gov_site"])
            labels[url] = (GOV if is_gov else NON_GOV,)
            country = entry.get("country")
            if is_gov and isinstance(country, str) and country.strip():
                countries[url] = country
        elif template.task is TaskKind.COUNTRY:
            value = entry.get("country") if isinstance(entry, dict) else entry
            code = canonical_country(value) if isinstance(value, str) else None
            if code is None or code not in vocab:
                raise InvalidLabelError(url, value)
            labels[url] = (code,)
        else:
            value = entry.get("categories", entry.get("category")) if isinstance(entry, dict) else entry
            if isinstance(value, str):
                value = [value]
            if not isinstance(value, list):
                raise InvalidLabelError(url, value)
            resolved = []
            for item in value:
                token = (lookup.get(item) or lookup.get(item.strip().lower())) if isinstance(item, str) else None
                if token is None:
                    raise InvalidLabelError(url, item)
                resolved.append(token)
            if len(resolved) != template.labels_per_site or len(set(resolved)) != len(resolved):
                raise WrongCardinalityError(url, len(set(resolved)), template.labels_per_site)
            labels[url] = tuple(resolved)
    return ParsedPredictions(labels, countries)


def response_object(predictions: ParsedPredictions, template: PromptTemplate) -> dict[str, Any]:
    out: dict[str, Any] = {}
    for url, labs in predictions.labels.items():
        if template.task is TaskKind.GOVERNMENTAL:
            item: dict[str, Any] = {"gov_site": labs[0] == GOV}
            if url in predictions.countries:
                item["country"] = predictions.countries[url]
            out[url] = item
        elif template.task is TaskKind.COUNTRY:
            out[url] = {"country": labs[0]}
        else:
            out[url] = {"categories": list(labs)}
    return out


def serialize_predictions(predictions: ParsedPredictions, template: PromptTemplate, fenced: bool = False) -> str:
    """Encode predictions in the response schema; ``parse_response`` inverts this."""
    text = json.dumps(response_object(predictions, template), ensure_ascii=False)
    return f"```json\n{text}\n```" if fenced else text


def expected_urls_from_prompt(text: str) -> list[str]:
    """URLs listed after the final list-intro line of a rendered prompt."""
    marker = "Here is the list of websites"
    idx = text.rfind(marker)
    if idx < 0:
        return []
    lines = text[idx:].splitlines()[1:]
    return [ln.strip() for ln in lines if ln.strip()]


def bundle_for_urls(urls: Sequence[str], template_hash: str = "") -> PromptBundle:
    return PromptBundle(text="", images=(), expected_urls=tuple(urls), template_hash=template_hash)

