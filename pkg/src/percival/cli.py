"""Command-line front end.

Every subcommand is a thin shell over the library modules: parse
arguments, load inputs, call one function, serialize the result. No
behavior lives here that a library caller could not reach.
"""

import json
import sys
from pathlib import Path

import click

from .modelio import load_model_file
from .corpus import (
    Corpus,
    auto_label_model,
    auto_label_rules,
    balance_and_split,
    dedupe as dedupe_corpus,
    ingest as ingest_corpus,
    read_manifest,
    write_split_manifest,
)
from .evalkit import bench_pipeline, evaluate_model, write_eval_csv, write_json
from .filters import RequestContext, matches, parse_list
from .pipeline import BlockPolicy, PageFixture, PipelineConfig, run_page


def _parse_policy(text):
    if text == "clear":
        return BlockPolicy.clear()
    if text.startswith("replace="):
        path = text[len("replace="):]
        if not path:
            raise click.BadParameter("replace= needs an image path")
        return BlockPolicy.replace(Path(path).read_bytes())
    raise click.BadParameter(f"policy must be clear or replace=PATH, got {text!r}")


@click.group()
def main():
    """Perceptual ad-blocking toolkit: pipeline simulator, filter-list
    labeling, corpus management, evaluation, and benchmarks."""


@main.command("run-page")
@click.option("--fixture", "fixture_dir", required=True,
              type=click.Path(exists=True, file_okay=False))
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--mode", type=click.Choice(["sync", "async", "off"]), default="sync",
              show_default=True)
@click.option("--lanes", type=int, default=1, show_default=True)
@click.option("--policy", default="clear", show_default=True,
              help="clear or replace=PATH")
@click.option("--capacity", type=int, default=10000, show_default=True,
              help="verdict memo capacity")
@click.option("--threshold", type=float, default=0.5, show_default=True)
@click.option("--events-out", type=click.Path(dir_okay=False),
              help="write the render-event trace as JSONL")
@click.option("--stats-out", type=click.Path(dir_okay=False),
              help="write run statistics as JSON")
def run_page_cmd(fixture_dir, model_path, mode, lanes, policy, capacity,
                 threshold, events_out, stats_out):
    """Simulate one page load over a frame fixture."""
    fixture = PageFixture.load(fixture_dir)
    config = PipelineConfig(mode=mode, lanes=lanes, memo_capacity=capacity,
                            blocking_policy=_parse_policy(policy),
                            threshold=threshold)
    model = load_model_file(model_path) if model_path else None
    events, stats = run_page(fixture, config, model=model)
    if events_out:
        with open(events_out, "w", encoding="utf-8") as fh:
            for ev in events:
                fh.write(json.dumps(vars(ev)) + "\n")
    if stats_out:
        write_json(stats.to_dict(), stats_out)
    click.echo(f"frames={stats.frames} rendered={stats.rendered} "
               f"blocked={stats.blocked} bypassed={stats.bypassed} "
               f"forward_passes={stats.forward_passes} "
               f"cache_hits={stats.cache_hits} "
               f"page_complete_micros={stats.page_complete_micros}")


@main.command("label")
@click.option("--rules", "rules_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--manifest", "manifest_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def label_cmd(rules_path, manifest_path, out_path):
    """Label request URLs against a filter list.

    The manifest is JSONL; each record needs "url" and may carry
    "document_domain" (defaults to the URL itself acting first-party)
    and "resource_type" (defaults to image).
    """
    ruleset = parse_list(Path(rules_path).read_text(encoding="utf-8"))
    labeled = 0
    with open(manifest_path, encoding="utf-8") as src, \
            open(out_path, "w", encoding="utf-8") as dst:
        for lineno, line in enumerate(src, start=1):
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            try:
                ctx = RequestContext(
                    url=record["url"],
                    document_domain=record.get("document_domain", record["url"]),
                    resource_type=record.get("resource_type", "image"),
                )
            except (KeyError, ValueError) as exc:
                raise click.ClickException(
                    f"{manifest_path}:{lineno}: {exc}") from exc
            decision = matches(ruleset, ctx)
            dst.write(json.dumps({
                "url": record["url"],
                "label": "ad" if decision.blocked else "non-ad",
                "matched_rule": decision.matched_rule,
            }) + "\n")
            labeled += 1
    counts = ruleset.counts
    click.echo(f"labeled={labeled} rules={len(ruleset)} "
               f"unsupported={counts.unsupported}")


@main.group("corpus")
def corpus_group():
    """Manage the content-addressed image corpus."""


@corpus_group.command("ingest")
@click.option("--manifest", "manifest_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--corpus", "corpus_dir", required=True, type=click.Path(file_okay=False))
def corpus_ingest(manifest_path, corpus_dir):
    """Fetch manifest entries into the corpus."""
    corpus = Corpus.load(corpus_dir)
    report = ingest_corpus(corpus, read_manifest(manifest_path))
    click.echo(f"added={report.added} merged={report.merged_duplicates} "
               f"fetch_failures={len(report.fetch_failures)} "
               f"decode_failures={len(report.decode_failures)}")
    for ref, err in report.fetch_failures + report.decode_failures:
        click.echo(f"  failed {ref}: {err}", err=True)


@corpus_group.command("dedupe")
@click.option("--corpus", "corpus_dir", required=True,
              type=click.Path(exists=True, file_okay=False))
def corpus_dedupe(corpus_dir):
    """Merge index records that share a content hash."""
    report = dedupe_corpus(Corpus.load(corpus_dir))
    click.echo(f"merged={report.merged}")


@corpus_group.command("label")
@click.option("--corpus", "corpus_dir", required=True,
              type=click.Path(exists=True, file_okay=False))
@click.option("--rules", "rules_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--threshold", type=float, default=0.5, show_default=True)
def corpus_label(corpus_dir, rules_path, model_path, threshold):
    """Auto-label corpus records from filter rules or a model.

    Exactly one of --rules/--model. Labels never downgrade: human beats
    rules beats model.
    """
    if bool(rules_path) == bool(model_path):
        raise click.UsageError("pass exactly one of --rules or --model")
    corpus = Corpus.load(corpus_dir)
    if rules_path:
        ruleset = parse_list(Path(rules_path).read_text(encoding="utf-8"))
        report = auto_label_rules(corpus, ruleset)
    else:
        model = load_model_file(model_path)
        report = auto_label_model(corpus, model, threshold=threshold)
    click.echo(f"labeled={report.labeled} skipped={report.skipped}")


@corpus_group.command("split")
@click.option("--corpus", "corpus_dir", required=True,
              type=click.Path(exists=True, file_okay=False))
@click.option("--seed", type=int, required=True)
@click.option("--test-fraction", type=float, default=0.2, show_default=True)
@click.option("--out-train", required=True, type=click.Path(dir_okay=False))
@click.option("--out-test", required=True, type=click.Path(dir_okay=False))
def corpus_split(corpus_dir, seed, test_fraction, out_train, out_test):
    """Balance classes 50/50, then write disjoint train/test manifests."""
    corpus = Corpus.load(corpus_dir)
    train, test = balance_and_split(corpus, seed=seed, test_fraction=test_fraction)
    write_split_manifest(train, out_train)
    write_split_manifest(test, out_test)
    click.echo(f"train={len(train)} test={len(test)}")


@main.command("eval")
@click.option("--model", "model_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--threshold", type=float, default=0.5, show_default=True)
@click.option("--csv", "csv_path", type=click.Path(dir_okay=False),
              help="per-image log destination")
@click.option("--json", "json_path", type=click.Path(dir_okay=False),
              help="metrics report destination")
def eval_cmd(model_path, corpus_path, threshold, csv_path, json_path):
    """Classify a labeled corpus and report accuracy/precision/recall."""
    model = load_model_file(model_path)
    report, rows = evaluate_model(model, corpus_path, threshold=threshold)
    if csv_path:
        write_eval_csv(rows, csv_path)
    if json_path:
        write_json(report.to_json(), json_path)
    click.echo(f"images={report.counts.total} "
               f"accuracy={report.accuracy_display} "
               f"precision={report.precision_display} "
               f"recall={report.recall_display}")


@main.command("golden-check")
@click.option("--model", "model_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--golden", "golden_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--tolerance", type=float, default=1e-4, show_default=True,
              help="max absolute per-output difference")
def golden_check_cmd(model_path, golden_path, tolerance):
    """Verify a model reproduces a golden input/output fixture.

    The fixture's outputs typically come from another implementation
    (an exporter, an older build); agreement within tolerance proves
    the two compute the same network.
    """
    import numpy as np

    from .modelio import load_golden
    from .nn.ops import network_forward
    from .nn.tensor import Tensor

    net = load_model_file(model_path)
    pairs = load_golden(Path(golden_path).read_bytes())
    worst = 0.0
    for i, (inp, want) in enumerate(pairs):
        got = network_forward(Tensor(inp), net).array
        diff = float(np.abs(got - want).max())
        worst = max(worst, diff)
        if diff > tolerance:
            raise click.ClickException(
                f"pair {i}: max |diff| {diff:.3e} exceeds {tolerance:.0e}")
    click.echo(f"pairs={len(pairs)} max_abs_diff={worst:.3e} "
               f"tolerance={tolerance:.0e}")


@main.command("bench")
@click.option("--fixture", "fixture_dir", required=True,
              type=click.Path(exists=True, file_okay=False))
@click.option("--configs", "configs_path", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="JSON list of pipeline configs; first entry is the baseline")
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--repetitions", type=int, default=10, show_default=True)
@click.option("--warmups", type=int, default=2, show_default=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False),
              help="write the full report as JSON")
def bench_cmd(fixture_dir, configs_path, model_path, repetitions, warmups, out_path):
    """Time pipeline configurations sequentially over one fixture."""
    raw = json.loads(Path(configs_path).read_text(encoding="utf-8"))
    if not isinstance(raw, list) or not raw:
        raise click.ClickException("configs file must be a non-empty JSON list")
    labels = []
    configs = []
    for index, entry in enumerate(raw):
        entry = dict(entry)
        labels.append(entry.pop("label", f"config{index}"))
        policy = entry.pop("policy", "clear")
        try:
            configs.append(PipelineConfig(blocking_policy=_parse_policy(policy),
                                          **entry))
        except (TypeError, ValueError) as exc:
            raise click.ClickException(f"configs[{index}]: {exc}") from exc
    fixture = PageFixture.load(fixture_dir)
    model = load_model_file(model_path) if model_path else None
    report = bench_pipeline(fixture, configs, model=model,
                            repetitions=repetitions, warmups=warmups,
                            labels=labels)
    if out_path:
        write_json(report.to_json(), out_path)
    for run in report.runs:
        overhead = report.overhead_percent(run.label)
        click.echo(f"{run.label}: page_complete_median={run.median_page_complete}us "
                   f"overhead={overhead:+.1f}% forwards={run.forward_passes}")


if __name__ == "__main__":
    sys.exit(main())
