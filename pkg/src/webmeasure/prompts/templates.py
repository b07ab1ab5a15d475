"""Prompt templates: persona, definition, instructions, one-shot example, output schema, URL list."""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

from webmeasure.crawler.types import CrawlArtifact
from webmeasure.model import (
    CATEGORY_TOKENS,
    GOVERNMENTAL_LABELS,
    INTERNATIONAL,
    TaskKind,
    WebsiteRecord,
)
from webmeasure.prompts.countries import country_codes


class PromptError(ValueError):
    retryable = False


class EmptyBatchError(PromptError):
    pass


class MissingScreenshotError(PromptError):
    pass


_PLACEHOLDER = re.compile(r"\{\{(\w+)\}\}")


@lru_cache(maxsize=8)
def load_skeleton(path: str | None = None) -> str:
    if path:
        return Path(path).read_text(encoding="utf-8")
    return resources.files("webmeasure.prompts").joinpath("skeleton.txt").read_text(encoding="utf-8")


def fill(skeleton: str, values: Mapping[str, str]) -> str:
    """Substitute ``{{name}}`` placeholders; unknown names are an error."""

    def sub(m: re.Match) -> str:
        key = m.group(1)
        if key not in values:
            raise PromptError(f"template placeholder {{{{{key}}}}} has no value")
        return values[key]

    return _PLACEHOLDER.sub(sub, skeleton)


@dataclass(frozen=True)
class OneShot:
    url: str
    categorization: str
    rationale: str

    def render(self) -> str:
        return f"For example, {self.url} would be categorized as {self.categorization}, since {self.rationale}."


@dataclass(frozen=True)
class PromptTemplate:
    task: TaskKind
    persona: str
    definition: str
    instructions: tuple[str, ...]
    one_shot: OneShot
    output_schema_description: str
    with_screenshots: bool
    labels_vocabulary: tuple[str, ...]
    labels_per_site: int = 1
    skeleton_path: str | None = None

    def __post_init__(self) -> None:
        if self.labels_per_site not in (1, 2):
            raise ValueError("labels_per_site must be 1 or 2")
        if self.labels_per_site == 2 and self.task is not TaskKind.CATEGORY:
            raise ValueError("two labels per site only make sense for the Category task")

    @property
    def prompt_mode(self) -> str:
        return "url+screenshot" if self.with_screenshots else "url"

    @property
    def list_intro(self) -> str:
        if self.with_screenshots:
            return "Here is the list of websites together with their screenshot:"
        return "Here is the list of websites:"

    def sections(self, url_list: str) -> dict[str, str]:
        return {
            "persona": self.persona,
            "definition": self.definition,
            "instructions": "\n".join(f"- {line}" for line in self.instructions),
            "one_shot": self.one_shot.render(),
            "output_schema": self.output_schema_description,
            "list_intro": self.list_intro,
            "url_list": url_list,
        }

    @property
    def template_hash(self) -> str:
        h = hashlib.sha256()
        h.update(fill(load_skeleton(self.skeleton_path), self.sections("")).encode("utf-8"))
        h.update(("\0" + self.task.value + f"\0{self.labels_per_site}\0").encode())
        h.update("\0".join(self.labels_vocabulary).encode("utf-8"))
        return h.hexdigest()[:16]


@dataclass(frozen=True)
class PromptBundle:
    text: str
    images: tuple[bytes, ...]
    expected_urls: tuple[str, ...]
    template_hash: str
    records: tuple[WebsiteRecord, ...] = field(default=(), repr=False, compare=False)


def _lookup_artifact(
    artifacts: Mapping[str, CrawlArtifact] | Sequence[CrawlArtifact | None] | None, i: int, rec: WebsiteRecord
) -> CrawlArtifact | None:
    if artifacts is None:
        return None
    if isinstance(artifacts, Mapping):
        return artifacts.get(rec.registrable_domain) or artifacts.get(rec.url)
    return artifacts[i] if i < len(artifacts) else None


def render(
    template: PromptTemplate,
    batch: Sequence[WebsiteRecord],
    artifacts: Mapping[str, CrawlArtifact] | Sequence[CrawlArtifact | None] | None = None,
) -> PromptBundle:
    """Render one prompt for ``batch``; identical inputs give identical bytes.

    URLs are listed one per line, verbatim. With screenshots, images are
    attached in the same order as the URLs.
    """
    if not batch:
        raise EmptyBatchError("cannot render a prompt for an empty batch")
    images: list[bytes] = []
    if template.with_screenshots:
        for i, rec in enumerate(batch):
            art = _lookup_artifact(artifacts, i, rec)
            if art is None or not art.ok or art.screenshot is None:
                raise MissingScreenshotError(f"no screenshot for {rec.url}")
            images.append(art.screenshot)
    urls = tuple(r.url for r in batch)
    if len(set(urls)) != len(urls):
        raise PromptError("duplicate URLs in batch")
    text = fill(load_skeleton(template.skeleton_path), template.sections("\n".join(urls)))
    return PromptBundle(text, tuple(images), urls, template.template_hash, tuple(batch))


GOVERNMENTAL_DEFINITION = (
    "A governmental website is an official online platform created and maintained by a government entity, "
    "or an organization significantly controlled or owned by a government. A primary goal of a governmental "
    "website must be to deliver government services, such as announcements, communication, exchange of "
    "information, and point of service to their citizens."
)

GOVERNMENTAL_SCHEMA = (
    "{<url1>: {gov_site: <true/false>, country: <country (provide only if it a governmental website)>}, "
    "<url2>: {gov_site: <true/false>, country: <country (provide only if it is a governmental website)>}, ...}"
)

UNIVERSITY_HINT = (
    "Most universities are not significantly run by governments: do not classify a university website as "
    "governmental unless it delivers government services to citizens."
)


def governmental_template(with_screenshots: bool = True, university_hint: bool = False) -> PromptTemplate:
    instructions = [
        "Identify whether the website is a governmental website or not based on our definition.",
        "If it is a governmental website also tell us the country of the government.",
        "Do not modify the provided URLs.",
    ]
    if with_screenshots:
        instructions.append(
            "Use both the URL and its corresponding screenshot to decide whether each website is governmental or not."
        )
    instructions.append(
        "Do not excessively rely on the .gov TLD: although this is likely a strong signal of governmental "
        "websites, some websites are operated by governments, but do not offer any services to citizens."
    )
    if university_hint:
        instructions.append(UNIVERSITY_HINT)
    return PromptTemplate(
        task=TaskKind.GOVERNMENTAL,
        persona="You are a classifier used to categorize websites into governmental and non-governmental websites.",
        definition=GOVERNMENTAL_DEFINITION,
        instructions=tuple(instructions),
        one_shot=OneShot(
            "https://www.pagopa.gov.it/",
            "a governmental website",
            "it is run by the Italian government and allows citizens to perform online payments for "
            "governmental services",
        ),
        output_schema_description=GOVERNMENTAL_SCHEMA,
        with_screenshots=with_screenshots,
        labels_vocabulary=GOVERNMENTAL_LABELS,
    )


def country_template(with_screenshots: bool = True) -> PromptTemplate:
    instructions = [
        "Identify the country of the primary target audience of the website.",
        f"If the website targets a global audience rather than users from a single country, use {INTERNATIONAL} "
        "as its country.",
        "Do not modify the provided URLs.",
    ]
    if with_screenshots:
        instructions.append(
            "Use both the URL and its corresponding screenshot to decide the country of each website."
        )
    instructions.append(
        "Do not excessively rely on the top-level domain: although a country-code top-level domain is likely a "
        "strong signal of the target country, generic top-level domains like .com, .net, .org and .io do not "
        "tell anything about it."
    )
    return PromptTemplate(
        task=TaskKind.COUNTRY,
        persona="You are a classifier used to categorize websites based on the country of their primary target "
        "audience.",
        definition="The country of a website is the country whose residents are the main audience of the website, "
        "i.e., the users it primarily offers its content or services to. A website that targets a global audience "
        f"rather than the users of a single country is {INTERNATIONAL}.",
        instructions=tuple(instructions),
        one_shot=OneShot(
            "https://www.ebay.co.uk/",
            "United Kingdom",
            "it is the British version of eBay and offers its services to users in the United Kingdom",
        ),
        output_schema_description="{<url1>: {country: <country or international>}, "
        "<url2>: {country: <country or international>}, ...}",
        with_screenshots=with_screenshots,
        labels_vocabulary=country_codes() + (INTERNATIONAL,),
    )


def category_template(
    with_screenshots: bool = False,
    labels_per_site: int = 2,
    vocabulary: Sequence[str] = CATEGORY_TOKENS,
    one_shot: OneShot | None = None,
) -> PromptTemplate:
    """Category prompt; two ranked labels per site by default, one for single-label taxonomies."""
    vocabulary = tuple(vocabulary)
    listed = ", ".join(vocabulary)
    if labels_per_site == 2:
        first = "Identify the two categories that best describe the website, from the most to the least relevant."
        schema = "{<url1>: {categories: [<category1>, <category2>]}, <url2>: {categories: [<category1>, <category2>]}, ...}"
    else:
        first = "Identify the single category that best describes the website."
        schema = "{<url1>: {categories: [<category>]}, <url2>: {categories: [<category>]}, ...}"
    instructions = [first, "Only use categories from the given list, spelled exactly as given.", "Do not modify the provided URLs."]
    if with_screenshots:
        instructions.append(
            "Use both the URL and its corresponding screenshot to decide the categories of each website."
        )
    if one_shot is None:
        if labels_per_site == 2 and {"Sports", "News"} <= set(vocabulary):
            one_shot = OneShot("https://www.espn.com/", "Sports and News", "it publishes news and live coverage of sports events")
        elif "Sports" in vocabulary:
            one_shot = OneShot("https://www.espn.com/", "Sports", "it mainly covers sports events")
        else:
            one_shot = OneShot("https://www.wikipedia.org/", vocabulary[0], "it is its closest category in the list")
    return PromptTemplate(
        task=TaskKind.CATEGORY,
        persona=f"You are a classifier used to categorize websites into the following categories: {listed}.",
        definition="The category of a website describes the main topic of its content or the main purpose of the "
        "services it offers.",
        instructions=tuple(instructions),
        one_shot=one_shot,
        output_schema_description=schema,
        with_screenshots=with_screenshots,
        labels_vocabulary=vocabulary,
        labels_per_site=labels_per_site,
    )


def template_for(task: TaskKind | str, with_screenshots: bool, **kwargs) -> PromptTemplate:
    task = TaskKind.parse(task)
    if task is TaskKind.GOVERNMENTAL:
        return governmental_template(with_screenshots, **kwargs)
    if task is TaskKind.COUNTRY:
        return country_template(with_screenshots, **kwargs)
    return category_template(with_screenshots, **kwargs)
