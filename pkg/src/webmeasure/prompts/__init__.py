"""Prompt rendering, response parsing and batch classification."""

from webmeasure.prompts.classify import PredictionSet, PredictionStore, classify, load_predictions, planted_generator
from webmeasure.prompts.countries import canonical_country
from webmeasure.prompts.parsing import (
    ExtraUrlsError,
    InvalidLabelError,
    MalformedJSONError,
    MissingUrlsError,
    ParsedPredictions,
    ResponseError,
    WrongCardinalityError,
    parse_response,
    serialize_predictions,
)
from webmeasure.prompts.templates import (
    EmptyBatchError,
    MissingScreenshotError,
    OneShot,
    PromptBundle,
    PromptError,
    PromptTemplate,
    category_template,
    country_template,
    governmental_template,
    render,
    template_for,
)

__all__ = [
    "EmptyBatchError",
    "ExtraUrlsError",
    "InvalidLabelError",
    "MalformedJSONError",
    "MissingScreenshotError",
    "MissingUrlsError",
    "OneShot",
    "ParsedPredictions",
    "PredictionSet",
    "PredictionStore",
    "PromptBundle",
    "PromptError",
    "PromptTemplate",
    "ResponseError",
    "WrongCardinalityError",
    "canonical_country",
    "category_template",
    "classify",
    "country_template",
    "governmental_template",
    "load_predictions",
    "parse_response",
    "planted_generator",
    "render",
    "serialize_predictions",
    "template_for",
]
