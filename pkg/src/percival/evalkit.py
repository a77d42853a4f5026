"""Evaluation arithmetic and the pipeline micro-benchmark harness.

Metric conventions: the positive class is "ad"; a false positive is a
non-ad that would have been blocked. Published result tables truncate
percentages at one decimal (0.78481 prints as 78.4), so MetricsReport
carries both the exact fraction and the truncated display value; a
metric with a zero denominator is reported as undefined, never as 0.
"""

from __future__ import annotations

import csv
import json
import math
import statistics
import time
from dataclasses import dataclass, field
from decimal import ROUND_DOWN, Decimal
from pathlib import Path

from .classifier import DecodeError, classify, decode_image
from .corpus import Corpus
from .pipeline import PageFixture, PipelineConfig, run_page

UNDEFINED = "undefined"


def truncate_fraction(value: float, decimals: int = 3) -> float:
    """Floor at the given decimal place, the way result tables print.

    Goes through the shortest decimal repr so 0.29 truncates to 0.290,
    not 0.289 (0.29 * 1000 is 289.999... in binary floating point).
    """
    quantum = Decimal(1).scaleb(-decimals)
    return float(Decimal(repr(value)).quantize(quantum, rounding=ROUND_DOWN))


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self):
        for name in ("tp", "fp", "fn", "tn"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 0:
                raise ValueError(f"{name} must be a non-negative int, got {v!r}")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def to_json(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn}


def confusion(predictions, labels) -> ConfusionCounts:
    """Tally aligned prediction/label sequences of 'ad' / 'non-ad'."""
    predictions = list(predictions)
    labels = list(labels)
    if len(predictions) != len(labels):
        raise ValueError(
            f"length mismatch: {len(predictions)} predictions, {len(labels)} labels"
        )
    tp = fp = fn = tn = 0
    for pred, label in zip(predictions, labels):
        if pred not in ("ad", "non-ad") or label not in ("ad", "non-ad"):
            raise ValueError(f"values must be 'ad' or 'non-ad', got ({pred!r}, {label!r})")
        if pred == "ad":
            if label == "ad":
                tp += 1
            else:
                fp += 1
        elif label == "ad":
            fn += 1
        else:
            tn += 1
    return ConfusionCounts(tp, fp, fn, tn)


@dataclass(frozen=True)
class MetricsReport:
    """Exact fractions plus table-style truncated displays."""

    counts: ConfusionCounts
    accuracy: float
    precision: float | None
    recall: float | None

    def _display(self, value: float | None) -> float | str:
        return UNDEFINED if value is None else truncate_fraction(value)

    @property
    def accuracy_display(self) -> float | str:
        return self._display(self.accuracy)

    @property
    def precision_display(self) -> float | str:
        return self._display(self.precision)

    @property
    def recall_display(self) -> float | str:
        return self._display(self.recall)

    def display_percent(self, name: str) -> float | str:
        value = getattr(self, name)
        if value is None:
            return UNDEFINED
        return truncate_fraction(value) * 100

    def to_json(self) -> dict:
        def cell(value):
            return UNDEFINED if value is None else value

        return {
            "counts": self.counts.to_json(),
            "accuracy": cell(self.accuracy),
            "precision": cell(self.precision),
            "recall": cell(self.recall),
            "accuracy_display": self.accuracy_display,
            "precision_display": self.precision_display,
            "recall_display": self.recall_display,
        }


def metrics(counts: ConfusionCounts) -> MetricsReport:
    if counts.total < 1:
        raise ValueError("metrics need at least one counted pair")
    accuracy = (counts.tp + counts.tn) / counts.total
    positives = counts.tp + counts.fp
    actual = counts.tp + counts.fn
    precision = counts.tp / positives if positives else None
    recall = counts.tp / actual if actual else None
    return MetricsReport(counts, accuracy, precision, recall)


def _p95(values) -> float:
    arr = sorted(values)
    if not arr:
        return float("nan")
    pos = 0.95 * (len(arr) - 1)
    lo = math.floor(pos)
    hi = math.ceil(pos)
    return arr[lo] + (arr[hi] - arr[lo]) * (pos - lo)


@dataclass
class ConfigBench:
    label: str
    config: PipelineConfig
    page_complete_micros: list[int] = field(default_factory=list)
    first_render_micros: list[int] = field(default_factory=list)
    inference_micros: list[int] = field(default_factory=list)
    forward_passes: int = 0

    @property
    def median_page_complete(self) -> float:
        return statistics.median(self.page_complete_micros)

    @property
    def mean_page_complete(self) -> float:
        return statistics.fmean(self.page_complete_micros)

    @property
    def p95_page_complete(self) -> float:
        return _p95(self.page_complete_micros)

    @property
    def median_first_render(self) -> float:
        return statistics.median(self.first_render_micros)

    def inference_summary(self) -> dict:
        if not self.inference_micros:
            return {"median": None, "p95": None, "count": 0}
        return {
            "median": statistics.median(self.inference_micros),
            "p95": _p95(self.inference_micros),
            "count": len(self.inference_micros),
        }

    def to_json(self) -> dict:
        return {
            "label": self.label,
            "mode": self.config.mode,
            "lanes": self.config.lanes,
            "median_page_complete_micros": self.median_page_complete,
            "mean_page_complete_micros": self.mean_page_complete,
            "p95_page_complete_micros": self.p95_page_complete,
            "median_first_render_micros": self.median_first_render,
            "forward_passes": self.forward_passes,
            "inference_micros": self.inference_summary(),
        }


@dataclass
class BenchReport:
    runs: list[ConfigBench]
    repetitions: int
    warmups: int

    @property
    def baseline(self) -> ConfigBench:
        return self.runs[0]

    def overhead_percent(self, label: str, measure: str = "page_complete") -> float:
        """(treatment - baseline) / baseline * 100, on medians. The
        first config is the baseline."""
        run = next(r for r in self.runs if r.label == label)
        if measure == "page_complete":
            base = self.baseline.median_page_complete
            treat = run.median_page_complete
        elif measure == "first_render":
            base = self.baseline.median_first_render
            treat = run.median_first_render
        else:
            raise ValueError(f"unknown measure {measure!r}")
        return (treat - base) / base * 100.0

    def to_json(self) -> dict:
        rows = []
        for i, run in enumerate(self.runs):
            row = run.to_json()
            row["overhead_percent"] = (
                0.0 if i == 0 else self.overhead_percent(run.label)
            )
            rows.append(row)
        return {
            "baseline": self.baseline.label,
            "repetitions": self.repetitions,
            "warmups": self.warmups,
            "configs": rows,
        }


def _config_label(i: int, config: PipelineConfig) -> str:
    return f"{i}:{config.mode}x{config.lanes}"


def bench_pipeline(fixture: PageFixture, configs: list[PipelineConfig],
                   model=None, repetitions: int = 10, warmups: int = 2,
                   labels: list[str] | None = None, _run=run_page) -> BenchReport:
    """Benchmark the fixture under each config, strictly sequentially
    (one config finishes all its runs before the next starts, to avoid
    interference). The first config is the overhead baseline."""
    if not configs:
        raise ValueError("need at least one config")
    if repetitions < 1 or warmups < 0:
        raise ValueError("repetitions must be >= 1 and warmups >= 0")
    if labels is None:
        labels = [_config_label(i, c) for i, c in enumerate(configs)]
    runs = []
    for label, config in zip(labels, configs):
        bench = ConfigBench(label=label, config=config)
        for rep in range(warmups + repetitions):
            _, stats = _run(fixture, config, model)
            if rep < warmups:
                continue
            bench.page_complete_micros.append(stats.page_complete_micros)
            bench.first_render_micros.append(stats.first_render_all_micros)
            bench.forward_passes = stats.forward_passes
            bench.inference_micros.extend(
                fs.inference_micros for fs in stats.per_frame.values()
                if fs.forward_pass
            )
        runs.append(bench)
    return BenchReport(runs=runs, repetitions=repetitions, warmups=warmups)


@dataclass
class EvalRow:
    sha256: str
    label: str
    predicted: str | None
    p_ad: float | None
    inference_micros: int | None
    error: str | None = None

    def to_csv_row(self) -> list:
        return [self.sha256, self.label, self.predicted or "",
                "" if self.p_ad is None else f"{self.p_ad:.6f}",
                "" if self.inference_micros is None else self.inference_micros,
                self.error or ""]


EVAL_CSV_HEADER = ["sha256", "label", "predicted", "p_ad", "inference_micros", "error"]


def evaluate_model(model, corpus: Corpus | str | Path, threshold: float = 0.5,
                   log_path: str | Path | None = None
                   ) -> tuple[MetricsReport, list[EvalRow]]:
    """Classify every labeled corpus image and compare to its label.
    Unreadable images are logged and excluded from the counts.
    Deterministic in (model, corpus, threshold)."""
    if not isinstance(corpus, Corpus):
        root = Path(corpus)
        if root.name == "index.jsonl":
            root = root.parent
        corpus = Corpus.load(root)
    rows: list[EvalRow] = []
    predictions: list[str] = []
    labels: list[str] = []
    for rec in corpus.records:
        if rec.label not in ("ad", "non-ad"):
            rows.append(EvalRow(rec.sha256, rec.label, None, None, None,
                                error="unlabeled"))
            continue
        try:
            bitmap = decode_image(corpus.object_bytes(rec))
        except (OSError, DecodeError) as exc:
            rows.append(EvalRow(rec.sha256, rec.label, None, None, None,
                                error=str(exc)))
            continue
        verdict = classify(bitmap, model, threshold=threshold, bypass=False)
        predicted = "ad" if verdict.is_ad else "non-ad"
        rows.append(EvalRow(rec.sha256, rec.label, predicted, verdict.p_ad,
                            verdict.inference_micros))
        predictions.append(predicted)
        labels.append(rec.label)
    if not predictions:
        raise ValueError("no labeled, decodable images to evaluate")
    report = metrics(confusion(predictions, labels))
    if log_path is not None:
        write_eval_csv(rows, log_path)
    return report, rows


def write_eval_csv(rows: list[EvalRow], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(EVAL_CSV_HEADER)
        for row in rows:
            writer.writerow(row.to_csv_row())


def write_json(payload: dict, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def timed(fn, *args, **kwargs):
    """Wall-clock a call; returns (result, elapsed_micros)."""
    t0 = time.perf_counter()
    result = fn(*args, **kwargs)
    return result, int((time.perf_counter() - t0) * 1e6)
