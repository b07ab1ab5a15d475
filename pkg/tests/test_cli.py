from __future__ import annotations

import csv
import json
import subprocess
import sys

import pytest

from builders import TRACKER_LIST, _artifact, country_replica, scope_rows, script_corpus, synthetic_tranco, tracker_corpus
from webmeasure.cli import main
from webmeasure.crawler import ArtifactStore

CONFIG = """
[backends.mock]
kind = "mock"

[backends.noisy]
kind = "mock"
error_rate = 0.2
seed = 4
max_concurrent = 2

[seeds]
sample = 7
"""


@pytest.fixture
def work(tmp_path):
    (tmp_path / "c.toml").write_text(CONFIG)
    return tmp_path


def run(work, *argv, out="out"):
    return main(["--config", str(work / "c.toml"), "--output-dir", str(work / out), *argv])


def last_json(capsys):
    return json.loads(capsys.readouterr().out.strip().splitlines()[-1])


def write_tranco(path, entries):
    with path.open("w", newline="") as fh:
        csv.writer(fh).writerows((e.rank, e.domain) for e in entries)


@pytest.fixture
def gov_inputs(work):
    write_tranco(work / "tranco.csv", synthetic_tranco(600))
    (work / "gov.txt").write_text("# seeds\n" + "".join(f"https://www.comune{i}.it/\n" for i in range(40)))
    return work


def test_sample_deterministic(gov_inputs, capsys):
    args = ["sample", "--task", "governmental", "--tranco", str(gov_inputs / "tranco.csv"),
            "--gov-seed", str(gov_inputs / "gov.txt"), "--created-at", "2026-01-01T00:00:00+00:00"]
    assert run(gov_inputs, *args, "--seed", "7", out="one") == 0
    assert last_json(capsys)["classes"] == {"gov": 40, "non-gov": 40}
    assert run(gov_inputs, *args, "--seed", "7", out="two") == 0
    assert run(gov_inputs, *args, "--seed", "8", out="three") == 0
    name = "governmental.manifest.jsonl"
    one = (gov_inputs / "one" / name).read_bytes()
    assert one == (gov_inputs / "two" / name).read_bytes()
    assert one != (gov_inputs / "three" / name).read_bytes()
    # Without --seed the [seeds] sample value applies.
    assert run(gov_inputs, *args, out="four") == 0
    assert (gov_inputs / "four" / name).read_bytes() == one


@pytest.fixture
def country_manifest(work, capsys):
    entries, labels = country_replica()
    write_tranco(work / "tranco.csv", entries)
    with (work / "manual.csv").open("w", newline="") as fh:
        csv.writer(fh).writerows(labels.items())
    assert run(work, "sample", "--task", "country", "--tranco", str(work / "tranco.csv"),
               "--manual-labels", str(work / "manual.csv")) == 0
    info = last_json(capsys)
    assert info["n"] == 2466 and len(info["classes"]) == 22
    return work / "out" / "country.manifest.jsonl"


def test_classify_and_evaluate_subset(work, country_manifest, capsys):
    assert run(work, "classify", "--manifest", str(country_manifest), "--backend", "mock") == 0
    info = last_json(capsys)
    assert (info["classified"], info["unclassified"], info["requests"]) == (2466, 0, 247)
    pred = work / "out" / "country.mock.url.predictions.jsonl"
    assert pred.exists()

    # Second run resumes from the prediction file.
    assert run(work, "classify", "--manifest", str(country_manifest), "--backend", "mock") == 0
    assert last_json(capsys)["requests"] == 0

    assert run(work, "evaluate", "--manifest", str(country_manifest), "--pred", str(pred),
               "--subset", "generic_tld") == 0
    table = capsys.readouterr().out
    assert "country:generic_tld" in table
    report = json.loads((work / "out" / "country.mock.url.predictions.eval.json").read_text())
    assert report["accuracy"] == 1.0 and report["n"] == 2466
    assert report["subset_reports"]["generic_tld"]["n"] == 466
    assert report["meta"]["backend"] == "mock"
    rows = list(csv.DictReader((work / "out" / "summary.csv").open()))
    assert [r["subset"] for r in rows] == ["", "generic_tld"]


def test_noisy_backend_summary_table(work, country_manifest, capsys):
    assert run(work, "classify", "--manifest", str(country_manifest), "--backend", "noisy", "--batch-size", "25") == 0
    capsys.readouterr()
    preds = [str(work / "out" / f"country.{b}.url.predictions.jsonl") for b in ("noisy",)]
    assert run(work, "evaluate", "--manifest", str(country_manifest), "--pred", *preds) == 0
    data = json.loads((work / "out" / "country.noisy.url.predictions.eval.json").read_text())
    assert 0.7 < data["accuracy"] < 0.9
    capsys.readouterr()
    assert run(work, "report", "table", "--input",
               str(work / "out" / "country.noisy.url.predictions.eval.json")) == 0
    assert "url/accuracy/noisy" in capsys.readouterr().out


def test_classify_without_screenshots_is_partial(work, country_manifest, capsys):
    code = run(work, "classify", "--manifest", str(country_manifest), "--backend", "mock", "--screenshots",
               "--store", str(work / "empty-store"))
    assert code == 1
    assert last_json(capsys)["unclassified"] == 2466


@pytest.fixture
def tracker_store(work):
    (work / "services.json").write_text(json.dumps(TRACKER_LIST))
    store = ArtifactStore(work / "store")
    arts = tracker_corpus() + [_artifact(f"sitio{i}.es", "ES", [("IDE", "doubleclick.net")] if i < 5 else [])
                               for i in range(50)]
    for a in arts:
        store.write(a)
    return work


def test_measure_trackers_threshold(tracker_store, capsys):
    w = tracker_store
    assert run(w, "measure", "trackers", "--store", str(w / "store"), "--disconnect", str(w / "services.json"),
               "--min-sites", "100") == 0
    assert last_json(capsys)["countries"] == ["DE", "IT"]
    data = json.loads((w / "out" / "trackers.json").read_text())
    assert data == {
        "DE": {"pct": 7.0, "sites_total": 100, "sites_with_tp_tracker": 7},
        "IT": {"pct": 25.0, "sites_total": 120, "sites_with_tp_tracker": 30},
    }
    assert (w / "out" / "trackers.csv").exists()

    assert run(w, "measure", "trackers", "--store", str(w / "store"), "--disconnect", str(w / "services.json"),
               "--min-sites", "1", "--name", "all") == 0
    assert last_json(capsys)["countries"] == ["AT", "DE", "ES", "FR", "IT"]

    assert run(w, "report", "trackers", "--input", f"top={w / 'out' / 'trackers.json'}",
               f"all={w / 'out' / 'all.json'}", "--intersect", "--name", "fig") == 0
    svg = (w / "out" / "fig.svg").read_text()
    assert svg.count('class="bar"') == 4


def test_measure_scripts(work, capsys):
    (work / "services.json").write_text(json.dumps(TRACKER_LIST))
    store = ArtifactStore(work / "scripts-store")
    for a in script_corpus():
        store.write(a)
    assert run(work, "measure", "scripts", "--store", str(store.root), "--disconnect", str(work / "services.json"),
               "-k", "3") == 0
    data = json.loads((work / "out" / "scripts.json").read_text())
    assert data == {
        "AU": [["googletagmanager.com", 2], ["facebook.net", 1]],
        "IT": [["google-analytics.com", 5], ["googletagmanager.com", 5], ["doubleclick.net", 4]],
    }


def test_measure_scopes_and_report(work, capsys):
    with (work / "scopes.csv").open("w", newline="") as fh:
        rows = scope_rows()
        wr = csv.DictWriter(fh, fieldnames=list(rows[0]))
        wr.writeheader()
        wr.writerows(rows)
    assert run(work, "measure", "scopes", "--scopes", str(work / "scopes.csv")) == 0
    info = last_json(capsys)
    assert info["max_category"] == "Blogs/Wiki"
    assert info["max_delta"] == pytest.approx(8.2, abs=1e-9)
    assert run(work, "report", "scopes", "--input", str(work / "out" / "scopes.json"), "--series-a", "Tool",
               "--series-b", "LLM") == 0
    paths = last_json(capsys)
    svg = open(paths["svg"]).read()
    assert svg.count('class="bar"') == 12
    # Re-plotting from the sidecar gives the same file.
    assert run(work, "report", "csv", "--input", paths["csv"], "--name", "again") == 0
    assert (work / "out" / "again.svg").read_bytes() == open(paths["svg"], "rb").read()


@pytest.mark.parametrize(
    "argv",
    [
        ["classify", "--manifest", "missing.jsonl", "--backend", "mock"],
        ["measure", "trackers", "--store", "nowhere"],
        ["evaluate", "--manifest", "missing.jsonl", "--pred", "x.jsonl"],
        ["sample", "--task", "governmental"],
    ],
)
def test_fatal_inputs(work, argv, capsys):
    assert run(work, *argv) == 2
    assert capsys.readouterr().err.startswith("webmeasure: error:")


def test_unknown_backend_and_bad_config(work, country_manifest, capsys):
    assert run(work, "classify", "--manifest", str(country_manifest), "--backend", "gpt") == 2
    assert "unknown backend" in capsys.readouterr().err
    (work / "bad.toml").write_text("[crawl]\nload_wait = 99\n")
    assert main(["--config", str(work / "bad.toml"), "sample", "--task", "country"]) == 2


def test_unknown_subcommand():
    with pytest.raises(SystemExit) as ei:
        main(["frobnicate"])
    assert ei.value.code == 2


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "webmeasure", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for cmd in ("sample", "crawl", "classify", "evaluate", "measure", "report"):
        assert cmd in res.stdout
