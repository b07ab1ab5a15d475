"""``webmeasure`` command line: sample, crawl, classify, evaluate, measure, report."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

from webmeasure import __version__
from webmeasure.config import ConfigError, MockBackendSpec, ToolConfig, load_config
from webmeasure.crawler import ArtifactStore, BrowserLaunchError, CrawlConfig, StoreError, crawl_all
from webmeasure.evalkit import EvalError, MatchRule, evaluate, format_summary_table, report_dict_to_rows
from webmeasure.figures import FigureError, FigureSpec, emit_grouped_bar, figure_from_csv
from webmeasure.listsrc import (
    DatasetError,
    DatasetManifest,
    build_category_dataset,
    build_country_dataset,
    build_governmental_dataset,
    load_curlie,
    load_manual_labels,
    load_seed_records,
    load_tranco,
)
from webmeasure.llmclient import AuthError, LLMClient, mock_backend
from webmeasure.measure import (
    MeasureError,
    compare_breakdowns,
    load_disconnect,
    load_scope_records,
    minimal_scope_by_category,
    prevalence_to_json,
    third_party_tracker_prevalence,
    top_script_trackers,
    write_prevalence_csv,
)
from webmeasure.model import TaskKind, normalize_url
from webmeasure.prompts import PredictionStore, classify, load_predictions, planted_generator, template_for
from webmeasure.prompts.countries import canonical_country
from webmeasure.psl import PublicSuffixTable, default_table

log = logging.getLogger("webmeasure")

EXIT_OK, EXIT_PARTIAL, EXIT_FATAL = 0, 1, 2


class Fatal(Exception):
    """Configuration or environment problem; maps to exit status 2."""


def _write_json(path: Path, data) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _need(path: str | Path | None, what: str) -> Path:
    if path is None:
        raise Fatal(f"missing input: {what} (pass it as a flag or set it under [paths] in the config)")
    p = Path(path)
    if not p.exists():
        raise Fatal(f"missing input: {what} {str(p)!r} does not exist")
    return p


class Context:
    def __init__(self, cfg: ToolConfig, output_dir: Path):
        self.cfg = cfg
        self.out = output_dir
        self._table: PublicSuffixTable | None = None

    @property
    def table(self) -> PublicSuffixTable:
        if self._table is None:
            psl = self.cfg.path("psl")
            self._table = PublicSuffixTable.from_file(_need(psl, "public suffix list")) if psl else default_table()
        return self._table

    def manifest(self, path: str | None) -> DatasetManifest:
        return DatasetManifest.read(_need(path, "manifest"), self.table)

    def artifact_store(self, path: str | None) -> ArtifactStore:
        p = Path(path) if path else self.cfg.path("artifact_store") or self.out / "artifacts"
        return ArtifactStore(p)


# sample ---------------------------------------------------------------------


def cmd_sample(ctx: Context, args) -> int:
    task = TaskKind.parse(args.task)
    seed = args.seed if args.seed is not None else ctx.cfg.seed("sample")
    if task is TaskKind.CATEGORY:
        curlie = load_curlie(_need(args.curlie, "curlie list"))
        m = build_category_dataset(curlie, args.per_class, seed, ctx.cfg.category_vocabulary, ctx.table)
    else:
        tranco = load_tranco(_need(args.tranco or ctx.cfg.path("tranco"), "tranco list"))
        if task is TaskKind.GOVERNMENTAL:
            gov = load_seed_records(_need(args.gov_seed, "governmental seed list"), ctx.table)
            m = build_governmental_dataset(gov, tranco, seed=seed, table=ctx.table)
        else:
            labels = load_manual_labels(_need(args.manual_labels, "manual labels")) if args.manual_labels else {}
            m = build_country_dataset(
                tranco, ctx.cfg.cctld_map, args.per_cc, args.generic_n, args.min_class, labels, seed, ctx.table
            )
    if args.created_at:
        m = DatasetManifest(m.task, m.records, m.provenance, m.seed, m.generic_tld, args.created_at)
    out = ctx.out / (args.name or f"{task.value}.manifest.jsonl")
    m.write(out)
    print(json.dumps({"manifest": str(out), "n": len(m), "classes": m.class_counts()}, sort_keys=True))
    return EXIT_OK


# crawl ----------------------------------------------------------------------


def cmd_crawl(ctx: Context, args) -> int:
    m = ctx.manifest(args.manifest)
    base = ctx.cfg.crawl
    overrides = {}
    if args.load_wait is not None:
        overrides["load_wait"] = args.load_wait
    if args.nav_timeout is not None:
        overrides["nav_timeout"] = args.nav_timeout
    if args.headless:
        overrides["headful"] = False
    if args.parallel is not None:
        overrides["max_parallel"] = args.parallel
    if args.browser:
        overrides["browser_path"] = args.browser
    try:
        config = CrawlConfig(**{**base.__dict__, **overrides})
    except ValueError as exc:
        raise Fatal(f"crawl settings: {exc}") from None
    store = ctx.artifact_store(args.store)
    summary = crawl_all(m, config, store)
    print(json.dumps({"store": str(store.root), **summary.to_dict()}, sort_keys=True))
    return EXIT_PARTIAL if summary.nav_error or summary.timeout else EXIT_OK


# classify -------------------------------------------------------------------


def _planted_truth(m: DatasetManifest, template) -> dict[str, tuple[str, ...]]:
    truth = {}
    vocab = template.labels_vocabulary
    for r in m.records:
        label = m.label(r)
        labels = (label,)
        if template.labels_per_site == 2:
            other = next(v for v in vocab[vocab.index(label) + 1 :] + vocab if v != label)
            labels = (label, other)
        truth[r.url] = labels
    return truth


def cmd_classify(ctx: Context, args) -> int:
    m = ctx.manifest(args.manifest)
    kwargs = {}
    if m.task is TaskKind.GOVERNMENTAL and args.university_hint:
        kwargs["university_hint"] = True
    if m.task is TaskKind.CATEGORY:
        kwargs["labels_per_site"] = 1 if args.single_label else 2
        kwargs["vocabulary"] = ctx.cfg.category_vocabulary
    template = template_for(m.task, args.screenshots, **kwargs)
    spec = ctx.cfg.backend(args.backend)
    if isinstance(spec, MockBackendSpec):
        backend = mock_backend(
            generator=planted_generator(_planted_truth(m, template), template),
            error_rate=spec.error_rate,
            seed=spec.seed,
            name=spec.name,
            max_concurrent=spec.max_concurrent,
        )
    else:
        backend = LLMClient(spec)
    artifacts = ctx.artifact_store(args.store) if args.screenshots else None
    out = ctx.out / (args.name or f"{m.task.value}.{args.backend}.{template.prompt_mode}.predictions.jsonl")
    result = classify(m, template, backend, args.batch_size, PredictionStore(out), artifacts, args.retries)
    print(
        json.dumps(
            {
                "predictions": str(out),
                "classified": len(result.predictions),
                "unclassified": len(result.unclassified),
                "requests": result.requests,
            },
            sort_keys=True,
        )
    )
    return EXIT_PARTIAL if result.unclassified else EXIT_OK


# evaluate -------------------------------------------------------------------


def _pred_meta(path: Path) -> tuple[str, str]:
    for row in PredictionStore(path).rows():
        return row.get("backend", path.stem), row.get("prompt_mode", "")
    return path.stem, ""


def cmd_evaluate(ctx: Context, args) -> int:
    m = ctx.manifest(args.manifest)
    rule = MatchRule(args.rule) if args.rule else (MatchRule.ANY_OF_K if m.task is TaskKind.CATEGORY else MatchRule.EXACT)
    dataset = args.dataset or m.task.value
    rows = []
    for pred_path in args.pred:
        p = _need(pred_path, "prediction file")
        preds = load_predictions(p)
        backend, mode = _pred_meta(p)
        report = evaluate(m, preds.predictions, rule, args.subset)
        data = report.to_dict()
        data["meta"] = {"dataset": dataset, "backend": backend, "prompt_mode": mode, "rule": rule.value,
                        "manifest": str(args.manifest), "predictions": str(p)}
        out = _write_json(ctx.out / f"{p.name.removesuffix('.jsonl')}.eval.json", data)
        log.info("wrote %s", out)
        rows.extend(report_dict_to_rows(dataset, backend, mode, data))
    _write_summary(ctx.out, rows)
    sys.stdout.write(format_summary_table(rows))
    return EXIT_OK


def _write_summary(out: Path, rows: list[dict]) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "summary.txt").write_text(format_summary_table(rows), encoding="utf-8")
    with open(out / "summary.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, ["dataset", "subset", "backend", "prompt_mode", "n", "accuracy", "macro_f1"],
                           lineterminator="\n")
        w.writeheader()
        w.writerows(rows)


# measure --------------------------------------------------------------------


def _countries(path: str | None) -> dict[str, str] | None:
    """Country per registrable domain from a domain,country CSV or a prediction file."""
    if not path:
        return None
    p = _need(path, "country labels")
    out: dict[str, str] = {}
    if p.suffix == ".jsonl":
        for url, raw in load_predictions(p).countries.items():
            code = canonical_country(raw)
            if code:
                out[normalize_url(url).registrable_domain] = code
    else:
        for domain, label in load_manual_labels(p).items():
            out[domain] = canonical_country(label) or label
    return out


def _artifacts(ctx: Context, args):
    store = ctx.artifact_store(args.store)
    if not store.root.is_dir():
        raise Fatal(f"missing input: artifact store {str(store.root)!r} does not exist")
    keep = None
    if args.manifest:
        keep = {r.registrable_domain for r in ctx.manifest(args.manifest).records}
    return [a for a in store if keep is None or a.record.registrable_domain in keep]


def cmd_measure(ctx: Context, args) -> int:
    if args.what == "scopes":
        records = load_scope_records(_need(args.scopes, "scope records"))
        a = minimal_scope_by_category(records, "a", args.top_n, args.idp)
        b = minimal_scope_by_category(records, "b", args.top_n, args.idp, rank_by="a")
        result = {"idp": args.idp, "a": a, "b": b, "comparison": compare_breakdowns(a, b).to_dict()}
        name = f"scopes.{args.idp.lower()}" if args.idp else "scopes"
        out = _write_json(ctx.out / f"{name}.json", result)
        print(json.dumps({"output": str(out), **result["comparison"]}, sort_keys=True))
        return EXIT_OK

    trackers = load_disconnect(_need(args.disconnect or ctx.cfg.path("disconnect"), "disconnect list"))
    artifacts = _artifacts(ctx, args)
    countries = _countries(args.countries)
    if countries is not None:
        artifacts = [a for a in artifacts if a.record.registrable_domain in countries]
    if args.what == "trackers":
        prev = third_party_tracker_prevalence(artifacts, trackers, ctx.table, args.min_sites, countries)
        out = _write_json(ctx.out / f"{args.name or 'trackers'}.json", prevalence_to_json(prev))
        write_prevalence_csv(prev, out.with_suffix(".csv"))
        print(json.dumps({"output": str(out), "countries": list(prev)}))
    else:
        top = top_script_trackers(artifacts, trackers, args.k, countries)
        out = _write_json(ctx.out / f"{args.name or 'scripts'}.json", {c: [list(x) for x in v] for c, v in top.items()})
        print(json.dumps({"output": str(out), "countries": list(top)}))
    return EXIT_OK


# report ---------------------------------------------------------------------


def _labeled_inputs(items: Sequence[str]) -> list[tuple[str, Path]]:
    out = []
    for item in items:
        name, sep, path = item.partition("=")
        if not sep:
            name, path = Path(item).stem, item
        out.append((name, _need(path, "report input")))
    return out


def cmd_report(ctx: Context, args) -> int:
    labels = {"title": args.title or "", "x_label": args.x_label or "", "y_label": args.y_label or ""}
    if args.what == "table":
        rows = []
        for _, p in _labeled_inputs(args.input):
            data = json.loads(p.read_text(encoding="utf-8"))
            meta = data.get("meta", {})
            rows.extend(report_dict_to_rows(meta.get("dataset", p.stem), meta.get("backend", ""),
                                            meta.get("prompt_mode", ""), data))
        _write_summary(ctx.out, rows)
        sys.stdout.write(format_summary_table(rows))
        return EXIT_OK

    output = ctx.out / f"{args.name or args.what}.svg"
    if args.what == "csv":
        ((_, src),) = _labeled_inputs(args.input)
        spec = figure_from_csv(src, output, **labels)
    elif args.what == "trackers":
        series = {}
        for name, p in _labeled_inputs(args.input):
            data = json.loads(p.read_text(encoding="utf-8"))
            series[name] = {c: float(v["pct"]) for c, v in data.items()}
        if args.intersect and series:
            common = set.intersection(*(set(s) for s in series.values()))
            series = {n: {c: v for c, v in s.items() if c in common} for n, s in series.items()}
        spec = FigureSpec(series, output, **labels)
    else:  # scopes
        ((_, src),) = _labeled_inputs(args.input)
        data = json.loads(src.read_text(encoding="utf-8"))
        a, b = data["a"], data["b"]
        order = [c for c in a if c in b]
        spec = FigureSpec(
            {args.series_a: {c: a[c]["minimal_pct"] for c in order}, args.series_b: {c: b[c]["minimal_pct"] for c in order}},
            output,
            **labels,
        )
    svg, sidecar = emit_grouped_bar(spec)
    print(json.dumps({"svg": str(svg), "csv": str(sidecar)}))
    return EXIT_OK


# parser ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="webmeasure", description=__doc__)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--config", help="TOML configuration file")
    p.add_argument("--output-dir", help="directory for all outputs (default: [paths] output_dir or .)")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    s = sub.add_parser("sample", help="build a labeled dataset manifest")
    s.add_argument("--task", required=True, choices=[t.value for t in TaskKind])
    s.add_argument("--seed", type=int)
    s.add_argument("--tranco")
    s.add_argument("--gov-seed", help="governmental seed list, one URL or domain per line")
    s.add_argument("--manual-labels", help="CSV domain,label for generic-TLD domains")
    s.add_argument("--curlie", help="CSV domain,categories (|-separated)")
    s.add_argument("--per-cc", type=int, default=100)
    s.add_argument("--generic-n", type=int, default=500)
    s.add_argument("--min-class", type=int, default=10)
    s.add_argument("--per-class", type=int, default=500)
    s.add_argument("--created-at", help="fix the manifest timestamp (for reproducible files)")
    s.add_argument("--name", help="output file name")
    s.set_defaults(func=cmd_sample)

    c = sub.add_parser("crawl", help="visit manifest sites and store artifacts")
    c.add_argument("--manifest", required=True)
    c.add_argument("--store", help="artifact store directory")
    c.add_argument("--load-wait", type=float)
    c.add_argument("--nav-timeout", type=float)
    c.add_argument("--parallel", type=int)
    c.add_argument("--browser")
    c.add_argument("--headless", action="store_true")
    c.set_defaults(func=cmd_crawl)

    k = sub.add_parser("classify", help="label manifest sites with a configured backend")
    k.add_argument("--manifest", required=True)
    k.add_argument("--backend", required=True)
    k.add_argument("--screenshots", action="store_true", help="attach screenshots from the artifact store")
    k.add_argument("--store", help="artifact store directory")
    k.add_argument("--batch-size", type=int, default=10)
    k.add_argument("--retries", type=int, default=2)
    k.add_argument("--single-label", action="store_true", help="one category per site")
    k.add_argument("--university-hint", action="store_true")
    k.add_argument("--name")
    k.set_defaults(func=cmd_classify)

    e = sub.add_parser("evaluate", help="score prediction files against a manifest")
    e.add_argument("--manifest", required=True)
    e.add_argument("--pred", required=True, nargs="+")
    e.add_argument("--subset", action="append", default=[])
    e.add_argument("--rule", choices=[r.value for r in MatchRule])
    e.add_argument("--dataset", help="row label in the summary table")
    e.set_defaults(func=cmd_evaluate)

    m = sub.add_parser("measure", help="privacy measurements over stored artifacts")
    m.add_argument("what", choices=["trackers", "scripts", "scopes"])
    m.add_argument("--store")
    m.add_argument("--manifest", help="restrict to the sites of this manifest")
    m.add_argument("--disconnect")
    m.add_argument("--countries", help="domain,country CSV or a Governmental prediction file")
    m.add_argument("--min-sites", type=int, default=100)
    m.add_argument("-k", type=int, default=5)
    m.add_argument("--scopes", help="ScopeRecord CSV or JSONL")
    m.add_argument("--top-n", type=int, default=10)
    m.add_argument("--idp")
    m.add_argument("--name")
    m.set_defaults(func=cmd_measure)

    r = sub.add_parser("report", help="figures and summary tables")
    r.add_argument("what", choices=["trackers", "scopes", "csv", "table"])
    r.add_argument("--input", nargs="+", required=True, help="files, optionally as SERIES=PATH")
    r.add_argument("--name")
    r.add_argument("--title")
    r.add_argument("--x-label")
    r.add_argument("--y-label")
    r.add_argument("--series-a", default="classifier A")
    r.add_argument("--series-b", default="classifier B")
    r.add_argument("--intersect", action="store_true", help="keep only categories present in every series")
    r.set_defaults(func=cmd_report)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s"
    )
    try:
        cfg = load_config(args.config)
        out = Path(args.output_dir) if args.output_dir else cfg.path("output_dir") or Path(".")
        return args.func(Context(cfg, out), args)
    except (Fatal, ConfigError, BrowserLaunchError, StoreError, AuthError, DatasetError, EvalError, MeasureError,
            FigureError, ValueError, OSError) as exc:
        print(f"webmeasure: error: {exc}", file=sys.stderr)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
