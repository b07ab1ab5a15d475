from __future__ import annotations

import pytest

from builders import country_replica, synthetic_tranco
from webmeasure.listsrc import (
    DEFAULT_EXCLUDED_TLDS,
    MANUAL,
    SEED_LIST,
    TRANCO_SAMPLE,
    CcTldMap,
    DatasetManifest,
    InsufficientPopulationError,
    MissingManualLabelError,
    TldClass,
    TrancoEntry,
    TrancoParseError,
    build_category_dataset,
    build_country_dataset,
    build_governmental_dataset,
    load_curlie,
    load_manual_labels,
    load_seed_records,
    load_tranco,
    tld_country_label,
)
from webmeasure.model import GOV, NON_GOV, TaskKind, normalize_url


def test_load_tranco(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("1,google.com\n2,amazon.com\n")
    assert load_tranco(p) == [TrancoEntry(1, "google.com"), TrancoEntry(2, "amazon.com")]
    p.write_text("")
    assert load_tranco(p) == []


@pytest.mark.parametrize("body,needle", [("1,google.com\n1,x.com\n", "2"), ("1,google.com\nzz\n", "2"), ("x,y\n", "1")])
def test_load_tranco_errors(tmp_path, body, needle):
    p = tmp_path / "t.csv"
    p.write_text(body)
    with pytest.raises(TrancoParseError, match=needle):
        load_tranco(p)


def test_tld_country_label():
    assert tld_country_label("ebay.co.uk") == "GB"
    assert tld_country_label("example.com") is TldClass.GENERIC
    assert tld_country_label("shop.example.de") == "DE"
    assert tld_country_label("example.zz") is TldClass.UNKNOWN


def test_cctld_map_validation():
    with pytest.raises(ValueError):
        CcTldMap({"com": "US"})
    with pytest.raises(ValueError):
        CcTldMap({"de": "international"})


def _seeds(n):
    return [normalize_url(f"agency{i}.gov") for i in range(n)]


def test_governmental_small_deterministic():
    tranco = [TrancoEntry(i, f"s{i}.com") for i in range(1, 11)]
    a = build_governmental_dataset(_seeds(3), tranco, seed=7)
    b = build_governmental_dataset(_seeds(3), tranco, seed=7)
    assert a.class_counts() == {GOV: 3, NON_GOV: 3}
    assert [r.url for r in a.records] == [r.url for r in b.records]
    assert {a.provenance[r.registrable_domain] for r in a.records} == {SEED_LIST, TRANCO_SAMPLE}


def test_governmental_insufficient():
    tranco = [TrancoEntry(i, f"s{i}.com") for i in range(1, 5)]
    with pytest.raises(InsufficientPopulationError):
        build_governmental_dataset(_seeds(5), tranco, seed=0)


def test_governmental_excludes_seed_and_gov_tlds():
    seeds = [normalize_url("site1.com"), normalize_url("x.gov")]
    tranco = [TrancoEntry(1, "site1.com"), TrancoEntry(2, "a.gov"), TrancoEntry(3, "b.gov.uk"),
              TrancoEntry(4, "c.com"), TrancoEntry(5, "d.org"), TrancoEntry(6, "government.com")]
    m = build_governmental_dataset(seeds, tranco, seed=1)
    sampled = {r.registrable_domain for r in m.records if r.labels[TaskKind.GOVERNMENTAL] == NON_GOV}
    assert sampled <= {"c.com", "d.org", "government.com"}
    assert len(sampled) == 2


def test_governmental_seed_duplicates_favor_seed():
    seeds = [normalize_url("a.com"), normalize_url("www.a.com")]
    tranco = [TrancoEntry(1, "a.com"), TrancoEntry(2, "b.com"), TrancoEntry(3, "c.com")]
    m = build_governmental_dataset(seeds, tranco, seed=2)
    assert m.class_counts() == {GOV: 1, NON_GOV: 1}
    assert m.provenance["a.com"] == SEED_LIST


def test_country_trivial():
    tranco = [TrancoEntry(1, "a.de"), TrancoEntry(2, "b.it")]
    m = build_country_dataset(tranco, CcTldMap({"de": "DE", "it": "IT"}), per_cc=1, generic_n=0, min_class=1)
    assert sorted(r.labels[TaskKind.COUNTRY] for r in m.records) == ["DE", "IT"]


def test_country_missing_manual_label():
    tranco = [TrancoEntry(1, "a.de"), TrancoEntry(2, "x.com"), TrancoEntry(3, "y.com")]
    with pytest.raises(MissingManualLabelError) as err:
        build_country_dataset(tranco, CcTldMap({"de": "DE"}), per_cc=1, generic_n=2, min_class=1,
                              manual_labels={"x.com": "US"})
    assert list(err.value.domains) == ["y.com"]
    assert "y.com" in str(err.value)


def test_country_insufficient_cctld():
    with pytest.raises(InsufficientPopulationError, match=r"\.it"):
        build_country_dataset([TrancoEntry(1, "a.de")], CcTldMap({"de": "DE", "it": "IT"}), per_cc=1, generic_n=0)


def test_country_replica_shape():
    tranco, manual = country_replica()
    m = build_country_dataset(tranco, per_cc=100, generic_n=500, min_class=10, manual_labels=manual, seed=5)
    counts = m.class_counts()
    assert len(m) == 2466 and len(counts) == 22
    assert min(counts.values()) >= 10
    assert len(m.generic_tld) == 466
    generic = [r for r in m.records if m.is_generic(r)]
    assert all(m.provenance[r.registrable_domain] == MANUAL for r in generic)
    assert all(r.registrable_domain.rsplit(".", 1)[1] in ("com", "net", "org", "io") for r in generic)
    tld_labeled = [r for r in m.records if not m.is_generic(r)]
    assert all(tld_country_label(r.registrable_domain) == r.labels[TaskKind.COUNTRY] for r in tld_labeled)


def test_category_dataset():
    curlie = [(f"s{c}.com", {c}) for c in ("Arts", "Business", "Computers", "Games", "Health", "Home",
                                          "Kids_and_Teens", "News", "Recreation", "Reference", "Science",
                                          "Shopping", "Society", "Sports")]
    m = build_category_dataset(curlie, per_class=1, seed=0)
    assert len(m) == 14 and set(m.class_counts().values()) == {1}
    with pytest.raises(InsufficientPopulationError):
        build_category_dataset([("a.com", {"Arts", "News"})], per_class=1)


def test_category_balanced_and_single_only():
    curlie = []
    for i in range(40):
        curlie.append((f"a{i}.com", {"Arts"}))
        curlie.append((f"n{i}.com", {"News"}))
        curlie.append((f"m{i}.com", {"Arts", "News"}))
    m = build_category_dataset(curlie, per_class=30, seed=4, categories=("Arts", "News"))
    assert m.class_counts() == {"Arts": 30, "News": 30}
    assert not any(r.registrable_domain.startswith("m") for r in m.records)


def test_manifest_roundtrip(tmp_path):
    tranco = synthetic_tranco(300)
    m = build_governmental_dataset(_seeds(20), tranco, seed=11)
    p = tmp_path / "m.jsonl"
    m.write(p)
    back = DatasetManifest.read(p)
    assert back.to_jsonl() == m.to_jsonl()
    assert back.seed == 11 and back.created_at == m.created_at


def test_manifest_filter_keeps_generic_flags():
    tranco, manual = country_replica()
    m = build_country_dataset(tranco, per_cc=100, generic_n=500, min_class=10, manual_labels=manual, seed=5)
    keep = [r.registrable_domain for r in m.records[::2]]
    f = m.filter(keep)
    assert len(f) == len(keep)
    assert f.generic_tld <= m.generic_tld


def test_loaders(tmp_path):
    (tmp_path / "labels.csv").write_text("domain,label\nx.com,US\nY.org,international\n")
    assert load_manual_labels(tmp_path / "labels.csv") == {"x.com": "US", "y.org": "international"}
    (tmp_path / "curlie.csv").write_text("domain,categories\na.com,Arts\nb.com,Arts|News\n")
    assert load_curlie(tmp_path / "curlie.csv") == [("a.com", frozenset({"Arts"})), ("b.com", frozenset({"Arts", "News"}))]
    (tmp_path / "seeds.txt").write_text("# gov\nhttps://www.agency.gov/\n\nother.gov.it\n")
    assert [r.registrable_domain for r in load_seed_records(tmp_path / "seeds.txt")] == ["agency.gov", "other.gov.it"]


def test_excluded_default_list():
    assert {"gov", "mil", "gov.uk"} <= DEFAULT_EXCLUDED_TLDS
