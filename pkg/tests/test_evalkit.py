from __future__ import annotations

import json
import random

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import oracle_metrics
from webmeasure.evalkit import (
    ConfusionMatrix,
    EvalError,
    MatchRule,
    accuracy,
    evaluate,
    format_summary_table,
    macro_f1,
    matrix_accuracy,
    summary_rows,
)
from webmeasure.listsrc import MANUAL, DatasetManifest
from webmeasure.model import TaskKind, normalize_url


def cm(counts, unclassified=None, classes=None):
    counts = np.array(counts, dtype=np.int64)
    k = counts.shape[0]
    return ConfusionMatrix(
        tuple(classes or [f"c{i}" for i in range(k)]),
        counts,
        np.array(unclassified or [0] * k, dtype=np.int64),
    )


def test_accuracy_examples():
    assert accuracy(["A", "B"], ["A", "B"]) == 1.0
    assert accuracy(["Sport"], [["News", "Sport"]], MatchRule.ANY_OF_K) == 1.0
    assert accuracy(["Sport"], [["News", "Sport"]], MatchRule.EXACT) == 0.0
    assert accuracy(["A", "B", "C"], ["A", "B", "A"]) == pytest.approx(2 / 3, abs=0)
    assert accuracy(["A", "B"], ["A", None]) == 0.5
    with pytest.raises(EvalError):
        accuracy(["A"], ["A", "B"])


def test_macro_f1_worked_example():
    m = cm([[8, 2], [1, 9]])
    pc = m.per_class()
    assert pc["c0"]["f1"] == pytest.approx(16 / 19, abs=1e-12)
    assert pc["c1"]["f1"] == pytest.approx(18 / 21, abs=1e-12)
    assert macro_f1(m) == pytest.approx((16 / 19 + 18 / 21) / 2, abs=1e-12)
    assert round(macro_f1(m), 6) == 0.849624


def test_perfect_and_empty():
    assert macro_f1(cm([[3, 0], [0, 4]])) == 1.0
    with pytest.raises(EvalError):
        macro_f1(cm([[0, 0], [0, 0]]))


def test_zero_support_class_excluded():
    # c2 is never true and never predicted; c1 is predicted but never true.
    m = cm([[5, 1, 0], [0, 0, 0], [0, 0, 0]])
    assert set(m.per_class()) == {"c0"}
    assert macro_f1(m) == pytest.approx(2 * 5 / (2 * 5 + 1), abs=1e-12)


def test_unclassified_counts_as_error():
    m = ConfusionMatrix.from_labels(["A", "A", "B"], ["A", None, "B"])
    assert m.total == 3
    assert matrix_accuracy(m) == pytest.approx(2 / 3)
    assert m.per_class()["A"]["recall"] == 0.5
    assert m.per_class()["A"]["precision"] == 1.0


def test_any_of_k_credits_truth_cell():
    m = ConfusionMatrix.from_labels(["News", "Arts"], [("Sports", "News"), ("News", "Sports")], MatchRule.ANY_OF_K)
    i = {c: n for n, c in enumerate(m.classes)}
    assert m.counts[i["News"], i["News"]] == 1
    assert m.counts[i["Arts"], i["News"]] == 1
    assert matrix_accuracy(m) == 0.5


def test_oracle_1000_matrices():
    rng = random.Random(2024)
    for _ in range(1000):
        k = rng.randint(1, 6)
        counts = [[rng.randint(0, 50) for _ in range(k)] for _ in range(k)]
        unc = [rng.choice([0, 0, rng.randint(0, 50)]) for _ in range(k)]
        if sum(map(sum, counts)) + sum(unc) == 0:
            counts[0][0] = 1
        m = cm(counts, unc)
        acc, mf1 = oracle_metrics(counts, unc)
        assert abs(matrix_accuracy(m) - acc) <= 1e-12
        assert abs(macro_f1(m) - mf1) <= 1e-12


@given(st.data())
def test_permutation_invariance(data):
    k = data.draw(st.integers(1, 5))
    counts = data.draw(st.lists(st.lists(st.integers(0, 20), min_size=k, max_size=k), min_size=k, max_size=k))
    if sum(map(sum, counts)) == 0:
        counts[0][0] = 1
    perm = data.draw(st.permutations(range(k)))
    a = cm(counts)
    pc = [[counts[perm[i]][perm[j]] for j in range(k)] for i in range(k)]
    b = cm(pc, classes=[f"c{perm[i]}" for i in range(k)])
    assert macro_f1(a) == pytest.approx(macro_f1(b), abs=1e-12)
    assert matrix_accuracy(a) == matrix_accuracy(b)
    assert a.per_class().keys() == b.per_class().keys()
    for name in a.per_class():
        assert a.per_class()[name]["f1"] == pytest.approx(b.per_class()[name]["f1"], abs=1e-12)


@given(st.lists(st.tuples(st.sampled_from("ABCD"), st.sampled_from("ABCD"), st.sampled_from("ABCD")), min_size=1, max_size=40))
def test_bounds_and_any_of_two_dominates(rows):
    truth = [t for t, _, _ in rows]
    pred = [(a, b) if a != b else (a,) for _, a, b in rows]
    exact = accuracy(truth, pred, MatchRule.EXACT)
    anyk = accuracy(truth, pred, MatchRule.ANY_OF_K)
    assert 0 <= exact <= anyk <= 1
    for rule in MatchRule:
        m = ConfusionMatrix.from_labels(truth, pred, rule)
        assert 0 <= macro_f1(m) <= 1
        assert matrix_accuracy(m) == accuracy(truth, pred, rule)


def _country_manifest(n=100, generic_every=4):
    recs, prov, generic = [], {}, set()
    for i in range(n):
        label = ("IT", "DE", "US", "international")[i % 4]
        r = normalize_url(f"site{i}.com").with_label(TaskKind.COUNTRY, label)
        recs.append(r)
        prov[r.registrable_domain] = MANUAL
        if i % generic_every == 0:
            generic.add(r.registrable_domain)
    return DatasetManifest(TaskKind.COUNTRY, tuple(recs), prov, 0, frozenset(generic))


def test_evaluate_planted_corruption_and_subset():
    m = _country_manifest()
    preds = {r.url: (m.label(r),) for r in m.records}
    rep = evaluate(m, preds)
    assert rep.accuracy == 1.0 and rep.macro_f1 == 1.0
    corrupted = m.records[5::10]
    assert len(corrupted) == 10
    for r in corrupted:
        preds[r.url] = ("FR",)
    rep = evaluate(m, preds, subsets=["generic_tld"])
    assert rep.accuracy == 0.90
    sub = rep.subset_reports["generic_tld"]
    flagged = [r for r in m.records if m.is_generic(r)]
    assert sub.n == len(flagged) == 25
    expected = sum(preds[r.url][0] == m.label(r) for r in flagged) / len(flagged)
    assert sub.accuracy == expected


def test_evaluate_missing_prediction_is_unclassified():
    m = _country_manifest(8)
    preds = {r.url: (m.label(r),) for r in m.records[1:]}
    rep = evaluate(m, preds)
    assert rep.n == 8 and rep.accuracy == 7 / 8
    assert sum(rep.confusion.unclassified) == 1


def test_unknown_subset():
    with pytest.raises(EvalError, match="unknown subset"):
        evaluate(_country_manifest(4), {}, subsets=["nope"])


def test_report_serialization_and_table():
    m = _country_manifest(20)
    rep = evaluate(m, {r.url: (m.label(r),) for r in m.records}, subsets=["generic_tld"])
    data = json.loads(rep.to_json())
    assert data["subset_reports"]["generic_tld"]["n"] == 5
    assert rep.macro_f1 == pytest.approx(np.mean([v["f1"] for v in rep.per_class.values()]))
    rows = summary_rows("Countries", "mock", "url", rep) + summary_rows(
        "Countries", "mock", "url+screenshot", rep
    )
    table = format_summary_table(rows)
    lines = table.splitlines()
    assert lines[0].split()[0] == "dataset"
    assert "url/accuracy/mock" in lines[0] and "url+screenshot/macro_f1/mock" in lines[0]
    assert lines[1].startswith("Countries ") and lines[2].startswith("Countries:generic_tld")
    assert "1.00" in lines[1]
    assert rep.confusion.to_csv().splitlines()[0].endswith("unclassified")
