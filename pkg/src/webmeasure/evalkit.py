"""Accuracy, per-class precision/recall/F1 and macro F1 for classification runs."""

from __future__ import annotations

import csv
import enum
import io
import json
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from webmeasure.listsrc import DatasetManifest
from webmeasure.model import WebsiteRecord


class EvalError(ValueError):
    pass


class MatchRule(str, enum.Enum):
    EXACT = "exact"
    ANY_OF_K = "any-of-k"


Prediction = Sequence[str] | str | None


def _as_tuple(pred: Prediction) -> tuple[str, ...]:
    if pred is None:
        return ()
    if isinstance(pred, str):
        return (pred,)
    return tuple(pred)


def is_correct(truth: str, pred: Prediction, rule: MatchRule) -> bool:
    labels = _as_tuple(pred)
    if not labels:
        return False
    if rule is MatchRule.ANY_OF_K:
        return truth in labels
    return labels[0] == truth


def credited_label(truth: str, pred: Prediction, rule: MatchRule) -> str | None:
    """The predicted class a record contributes to the confusion matrix."""
    labels = _as_tuple(pred)
    if not labels:
        return None
    if rule is MatchRule.ANY_OF_K and truth in labels:
        return truth
    return labels[0]


def accuracy(truth: Sequence[str], pred: Sequence[Prediction], rule: MatchRule = MatchRule.EXACT) -> float:
    if len(truth) != len(pred):
        raise EvalError(f"misaligned inputs: {len(truth)} truths vs {len(pred)} predictions")
    if not truth:
        raise EvalError("no records to score")
    correct = sum(is_correct(t, p, MatchRule(rule)) for t, p in zip(truth, pred))
    return correct / len(truth)


@dataclass(frozen=True)
class ConfusionMatrix:
    """Rows are true classes, columns predicted classes.

    ``unclassified[i]`` counts records of true class i with no usable prediction.
    """

    classes: tuple[str, ...]
    counts: np.ndarray
    unclassified: np.ndarray

    @classmethod
    def from_labels(
        cls,
        truth: Sequence[str],
        pred: Sequence[Prediction],
        rule: MatchRule = MatchRule.EXACT,
        classes: Sequence[str] | None = None,
    ) -> ConfusionMatrix:
        if len(truth) != len(pred):
            raise EvalError(f"misaligned inputs: {len(truth)} truths vs {len(pred)} predictions")
        rule = MatchRule(rule)
        credited = [credited_label(t, p, rule) for t, p in zip(truth, pred)]
        names = set(truth) | {c for c in credited if c is not None}
        if classes is None:
            classes = sorted(names)
        else:
            classes = list(classes) + sorted(names - set(classes))
        index = {c: i for i, c in enumerate(classes)}
        counts = np.zeros((len(classes), len(classes)), dtype=np.int64)
        unclassified = np.zeros(len(classes), dtype=np.int64)
        for t, c in zip(truth, credited):
            if c is None:
                unclassified[index[t]] += 1
            else:
                counts[index[t], index[c]] += 1
        return cls(tuple(classes), counts, unclassified)

    @property
    def total(self) -> int:
        return int(self.counts.sum() + self.unclassified.sum())

    def support(self) -> np.ndarray:
        return self.counts.sum(axis=1) + self.unclassified

    def per_class(self) -> dict[str, dict[str, float]]:
        """Per-class scores for every class with truth support."""
        tp = np.diag(self.counts).astype(float)
        predicted = self.counts.sum(axis=0).astype(float)
        support = self.support().astype(float)
        out = {}
        for i, name in enumerate(self.classes):
            if support[i] == 0:
                continue
            p = tp[i] / predicted[i] if predicted[i] else 0.0
            r = tp[i] / support[i]
            f1 = 2 * p * r / (p + r) if p + r else 0.0
            out[name] = {"precision": p, "recall": r, "f1": f1, "support": int(support[i])}
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["true\\pred", *self.classes, "unclassified"])
        for i, name in enumerate(self.classes):
            w.writerow([name, *map(int, self.counts[i]), int(self.unclassified[i])])
        return buf.getvalue()


def macro_f1(cm: ConfusionMatrix) -> float:
    if cm.total == 0:
        raise EvalError("empty confusion matrix")
    scores = [v["f1"] for v in cm.per_class().values()]
    return sum(scores) / len(scores)


def matrix_accuracy(cm: ConfusionMatrix) -> float:
    if cm.total == 0:
        raise EvalError("empty confusion matrix")
    return float(np.trace(cm.counts)) / cm.total


@dataclass
class EvalReport:
    accuracy: float
    macro_f1: float
    n: int
    per_class: dict[str, dict[str, float]]
    confusion: ConfusionMatrix = field(repr=False)
    subset_reports: dict[str, EvalReport] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "macro_f1": self.macro_f1,
            "n": self.n,
            "per_class": self.per_class,
            "confusion": {
                "classes": list(self.confusion.classes),
                "counts": self.confusion.counts.tolist(),
                "unclassified": self.confusion.unclassified.tolist(),
            },
            "subset_reports": {k: v.to_dict() for k, v in self.subset_reports.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


RecordFilter = Callable[[WebsiteRecord], bool]


def builtin_subsets(manifest: DatasetManifest) -> dict[str, RecordFilter]:
    return {"generic_tld": manifest.is_generic}


def report_from_labels(truth: Sequence[str], pred: Sequence[Prediction], rule: MatchRule) -> EvalReport:
    cm = ConfusionMatrix.from_labels(truth, pred, rule)
    return EvalReport(
        accuracy=matrix_accuracy(cm),
        macro_f1=macro_f1(cm),
        n=cm.total,
        per_class=cm.per_class(),
        confusion=cm,
    )


def evaluate(
    manifest: DatasetManifest,
    predictions: Mapping[str, Prediction],
    rule: MatchRule = MatchRule.EXACT,
    subsets: Iterable[str] | Mapping[str, RecordFilter] = (),
) -> EvalReport:
    """Score predictions keyed by record URL against the manifest labels.

    Records missing from ``predictions`` count as unclassified errors.
    Subsets are either names of built-in filters or a name -> predicate map.
    """
    known = builtin_subsets(manifest)
    if isinstance(subsets, Mapping):
        filters = dict(subsets)
    else:
        filters = {}
        for name in subsets:
            if name not in known:
                raise EvalError(f"unknown subset {name!r}; available: {sorted(known)}")
            filters[name] = known[name]

    def score(records: Sequence[WebsiteRecord]) -> EvalReport:
        truth = [manifest.label(r) for r in records]
        pred = [predictions.get(r.url) for r in records]
        return report_from_labels(truth, pred, rule)

    report = score(manifest.records)
    for name, keep in filters.items():
        chosen = [r for r in manifest.records if keep(r)]
        if not chosen:
            raise EvalError(f"subset {name!r} selects no records")
        report.subset_reports[name] = score(chosen)
    return report


def summary_rows(dataset: str, backend: str, prompt_mode: str, report: EvalReport) -> list[dict]:
    """Flatten a report (and its subsets) into rows shaped like a results table."""
    return report_dict_to_rows(dataset, backend, prompt_mode, report.to_dict())


def format_summary_table(rows: Sequence[Mapping]) -> str:
    """Render rows as a dataset x (prompt_mode, metric, backend) text matrix."""
    modes = sorted({r["prompt_mode"] for r in rows})
    backends = sorted({r["backend"] for r in rows})
    columns = [(m, metric, b) for m in modes for metric in ("accuracy", "macro_f1") for b in backends]
    keyed = {(r["dataset"], r["subset"], r["prompt_mode"], r["backend"]): r for r in rows}
    row_keys = list(dict.fromkeys((r["dataset"], r["subset"]) for r in rows))
    header = ["dataset"] + [f"{m}/{metric}/{b}" for m, metric, b in columns]
    lines = [header]
    for ds, sub in row_keys:
        label = f"{ds}:{sub}" if sub else ds
        cells = [label]
        for m, metric, b in columns:
            r = keyed.get((ds, sub, m, b))
            cells.append(f"{r[metric]:.2f}" if r else "-")
        lines.append(cells)
    widths = [max(len(row[i]) for row in lines) for i in range(len(header))]
    return "\n".join("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() for row in lines) + "\n"


def report_dict_to_rows(dataset: str, backend: str, prompt_mode: str, data: Mapping) -> list[dict]:
    rows = [{"dataset": dataset, "subset": "", "backend": backend, "prompt_mode": prompt_mode,
             "n": data["n"], "accuracy": data["accuracy"], "macro_f1": data["macro_f1"]}]
    for name, sub in data.get("subset_reports", {}).items():
        rows.append({"dataset": dataset, "subset": name, "backend": backend, "prompt_mode": prompt_mode,
                     "n": sub["n"], "accuracy": sub["accuracy"], "macro_f1": sub["macro_f1"]})
    return rows


__all__ = [
    "ConfusionMatrix",
    "EvalError",
    "EvalReport",
    "MatchRule",
    "accuracy",
    "evaluate",
    "macro_f1",
    "matrix_accuracy",
]
