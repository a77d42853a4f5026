"""Dataset construction: ingest images, deduplicate, auto-label, split.

A corpus is a directory with content-addressed blobs under ``objects/``
(filename = hex sha256 of the bytes) and an ``index.jsonl`` of records.
Fetching is concurrent with a per-host cap; index mutations all go
through a single writer and land atomically (write-temp, rename), so a
crash never leaves a half-written index.
"""

from __future__ import annotations

import hashlib
import json
import os
import random
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import requests

from .classifier import DecodeError, classify, decode_image
from .filters import MalformedUrlError, RequestContext, RuleSet, label_url

USER_AGENT = "percival-corpus/0.1"
FETCH_TIMEOUT_SECONDS = 60.0
PER_HOST_CAP = 4

LABELS = ("ad", "non-ad", "unlabeled")
LABEL_SOURCES = ("human", "rules", "model")
# precedence when labels collide (dedupe merges, relabeling)
_SOURCE_RANK = {"human": 3, "rules": 2, "model": 1, None: 0}


@dataclass(frozen=True)
class ManifestEntry:
    """One row of an ingestion manifest: a remote url or a local path."""

    source_page: str = ""
    document_domain: str = ""
    url: str | None = None
    path: str | None = None
    label: str | None = None  # human-assigned, wins over everything

    def __post_init__(self):
        if (self.url is None) == (self.path is None):
            raise ValueError("exactly one of url/path must be set")
        if self.label is not None and self.label not in ("ad", "non-ad"):
            raise ValueError(f"label must be 'ad' or 'non-ad', got {self.label!r}")

    @property
    def ref(self) -> str:
        return self.url if self.url is not None else self.path

    @classmethod
    def from_json(cls, obj: dict) -> "ManifestEntry":
        return cls(
            source_page=obj.get("source_page", ""),
            document_domain=obj.get("document_domain", ""),
            url=obj.get("url"),
            path=obj.get("path"),
            label=obj.get("label"),
        )


def read_manifest(path: str | Path) -> list[ManifestEntry]:
    entries = []
    with open(path, encoding="utf-8") as fh:
        for i, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                entries.append(ManifestEntry.from_json(json.loads(line)))
            except (json.JSONDecodeError, ValueError) as exc:
                raise ValueError(f"{path}, line {i}: {exc}") from exc
    return entries


@dataclass
class CorpusRecord:
    sha256: str
    path: str  # relative to the corpus root
    width: int
    height: int
    label: str = "unlabeled"
    label_source: str | None = None
    origins: list[dict] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "sha256": self.sha256,
            "path": self.path,
            "width": self.width,
            "height": self.height,
            "label": self.label,
            "label_source": self.label_source,
            "origins": self.origins,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "CorpusRecord":
        rec = cls(
            sha256=obj["sha256"],
            path=obj["path"],
            width=int(obj["width"]),
            height=int(obj["height"]),
            label=obj.get("label", "unlabeled"),
            label_source=obj.get("label_source"),
            origins=list(obj.get("origins", [])),
        )
        if rec.label not in LABELS:
            raise ValueError(f"bad label {rec.label!r}")
        if rec.label_source not in LABEL_SOURCES + (None,):
            raise ValueError(f"bad label_source {rec.label_source!r}")
        return rec


class Corpus:
    """On-disk corpus handle. Records are kept as a list so an index
    stitched together from several crawl phases can carry duplicates
    until dedupe merges them."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.records: list[CorpusRecord] = []
        self._write_lock = threading.Lock()

    @property
    def index_path(self) -> Path:
        return self.root / "index.jsonl"

    @property
    def objects_dir(self) -> Path:
        return self.root / "objects"

    @classmethod
    def load(cls, root: str | Path) -> "Corpus":
        corpus = cls(root)
        if corpus.index_path.exists():
            with open(corpus.index_path, encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if line:
                        corpus.records.append(CorpusRecord.from_json(json.loads(line)))
        return corpus

    def save(self) -> None:
        with self._write_lock:
            self.root.mkdir(parents=True, exist_ok=True)
            tmp = self.index_path.with_suffix(".jsonl.tmp")
            with open(tmp, "w", encoding="utf-8") as fh:
                for rec in self.records:
                    fh.write(json.dumps(rec.to_json(), sort_keys=True) + "\n")
            os.replace(tmp, self.index_path)

    def by_sha(self) -> dict[str, CorpusRecord]:
        return {rec.sha256: rec for rec in self.records}

    def object_bytes(self, rec: CorpusRecord) -> bytes:
        return (self.root / rec.path).read_bytes()

    def store_object(self, data: bytes) -> str:
        digest = hashlib.sha256(data).hexdigest()
        self.objects_dir.mkdir(parents=True, exist_ok=True)
        target = self.objects_dir / digest
        if not target.exists():
            tmp = target.with_name(digest + ".tmp")
            tmp.write_bytes(data)
            os.replace(tmp, target)
        return digest


@dataclass
class IngestReport:
    added: int = 0
    merged_duplicates: int = 0
    fetch_failures: list[tuple[str, str]] = field(default_factory=list)
    decode_failures: list[tuple[str, str]] = field(default_factory=list)

    @property
    def ok(self) -> int:
        return self.added + self.merged_duplicates


class _HostGate:
    """Bounded per-host parallelism for polite fetching."""

    def __init__(self, cap: int):
        self.cap = cap
        self._lock = threading.Lock()
        self._sems: dict[str, threading.Semaphore] = {}

    def for_host(self, host: str) -> threading.Semaphore:
        with self._lock:
            if host not in self._sems:
                self._sems[host] = threading.Semaphore(self.cap)
            return self._sems[host]


def _fetch_entry(entry: ManifestEntry, gate: _HostGate,
                 timeout: float = FETCH_TIMEOUT_SECONDS) -> bytes:
    if entry.path is not None:
        return Path(entry.path).read_bytes()
    host = requests.utils.urlparse(entry.url).hostname or ""
    with gate.for_host(host):
        resp = requests.get(
            entry.url, headers={"User-Agent": USER_AGENT}, timeout=timeout
        )
        resp.raise_for_status()
        return resp.content


def ingest(corpus: Corpus, entries: list[ManifestEntry],
           fetch_concurrency: int = 8) -> IngestReport:
    """Fetch, validate, and store every manifest entry. Per-entry
    failures go into the report; nothing aborts the run."""
    report = IngestReport()
    gate = _HostGate(PER_HOST_CAP)

    fetched: list[tuple[ManifestEntry, bytes | None]] = []
    with ThreadPoolExecutor(max_workers=max(1, fetch_concurrency)) as pool:
        futures = [(e, pool.submit(_fetch_entry, e, gate)) for e in entries]
        for entry, fut in futures:
            try:
                fetched.append((entry, fut.result()))
            except (requests.RequestException, OSError) as exc:
                report.fetch_failures.append((entry.ref, str(exc)))

    # single-writer phase: all index mutations happen here, in manifest order
    known = corpus.by_sha()
    for entry, data in fetched:
        try:
            bitmap = decode_image(data)
        except DecodeError as exc:
            report.decode_failures.append((entry.ref, str(exc)))
            continue
        origin = {
            "ref": entry.ref,
            "source_page": entry.source_page,
            "document_domain": entry.document_domain,
        }
        digest = corpus.store_object(data)
        rec = known.get(digest)
        if rec is None:
            rec = CorpusRecord(
                sha256=digest,
                path=f"objects/{digest}",
                width=bitmap.width,
                height=bitmap.height,
                label=entry.label or "unlabeled",
                label_source="human" if entry.label else None,
                origins=[origin],
            )
            corpus.records.append(rec)
            known[digest] = rec
            report.added += 1
        else:
            if origin not in rec.origins:
                rec.origins.append(origin)
            if entry.label and _SOURCE_RANK["human"] > _SOURCE_RANK[rec.label_source]:
                rec.label, rec.label_source = entry.label, "human"
            report.merged_duplicates += 1
    corpus.save()
    return report


@dataclass
class DedupeReport:
    merged: int = 0
    merged_shas: list[str] = field(default_factory=list)


def dedupe(corpus: Corpus) -> DedupeReport:
    """Merge index records sharing a sha256 (e.g. after concatenating
    indexes from separate crawl phases). Origins are unioned and the
    highest-precedence label wins. Idempotent."""
    report = DedupeReport()
    merged: dict[str, CorpusRecord] = {}
    order: list[str] = []
    for rec in corpus.records:
        kept = merged.get(rec.sha256)
        if kept is None:
            merged[rec.sha256] = rec
            order.append(rec.sha256)
            continue
        report.merged += 1
        report.merged_shas.append(rec.sha256)
        for origin in rec.origins:
            if origin not in kept.origins:
                kept.origins.append(origin)
        if _SOURCE_RANK[rec.label_source] > _SOURCE_RANK[kept.label_source]:
            kept.label, kept.label_source = rec.label, rec.label_source
    if report.merged:
        corpus.records = [merged[sha] for sha in order]
        corpus.save()
    return report


@dataclass
class LabelReport:
    labeled: int = 0
    skipped: int = 0  # no usable origin url / not eligible


def _eligible(rec: CorpusRecord, incoming_source: str) -> bool:
    return _SOURCE_RANK[incoming_source] > _SOURCE_RANK[rec.label_source]


def auto_label_rules(corpus: Corpus, ruleset: RuleSet) -> LabelReport:
    """Label records from their origin URL via the filter engine.
    Human labels are never touched; model labels are upgraded."""
    report = LabelReport()
    for rec in corpus.records:
        if not _eligible(rec, "rules"):
            continue
        ctx = None
        for origin in rec.origins:
            ref = origin.get("ref", "")
            if "://" not in ref:
                continue
            try:
                ctx = RequestContext(
                    url=ref,
                    document_domain=origin.get("document_domain", ""),
                    resource_type="image",
                )
                break
            except MalformedUrlError:
                continue
        if ctx is None:
            report.skipped += 1
            continue
        rec.label = label_url(ruleset, ctx)
        rec.label_source = "rules"
        report.labeled += 1
    corpus.save()
    return report


def auto_label_model(corpus: Corpus, model, threshold: float = 0.5) -> LabelReport:
    """Label records by classifying the stored bytes. Lowest precedence:
    only records nothing else has labeled are touched."""
    report = LabelReport()
    for rec in corpus.records:
        if not _eligible(rec, "model"):
            continue
        try:
            bitmap = decode_image(corpus.object_bytes(rec))
        except (DecodeError, OSError):
            report.skipped += 1
            continue
        verdict = classify(bitmap, model, threshold=threshold, bypass=False)
        rec.label = "ad" if verdict.is_ad else "non-ad"
        rec.label_source = "model"
        report.labeled += 1
    corpus.save()
    return report


def balance_and_split(corpus: Corpus, seed: int, test_fraction: float = 0.2
                      ) -> tuple[list[CorpusRecord], list[CorpusRecord]]:
    """Cap the majority class to the minority count, then split each
    class by ``test_fraction``. Deterministic in ``seed``; the returned
    lists are disjoint and each is balanced to within one record."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must be in (0, 1), got {test_fraction}")
    ads = sorted((r for r in corpus.records if r.label == "ad"),
                 key=lambda r: r.sha256)
    nonads = sorted((r for r in corpus.records if r.label == "non-ad"),
                    key=lambda r: r.sha256)
    if not ads or not nonads:
        raise ValueError(
            f"both classes must be nonempty, got {len(ads)} ads / {len(nonads)} non-ads"
        )
    rng = random.Random(seed)
    n = min(len(ads), len(nonads))
    ads = rng.sample(ads, n)
    nonads = rng.sample(nonads, n)
    n_test = round(n * test_fraction)
    train, test = [], []
    for group in (ads, nonads):
        rng.shuffle(group)
        test.extend(group[:n_test])
        train.extend(group[n_test:])
    rng.shuffle(train)
    rng.shuffle(test)
    return train, test


def write_split_manifest(records: list[CorpusRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps({
                "sha256": rec.sha256,
                "path": rec.path,
                "label": rec.label,
                "width": rec.width,
                "height": rec.height,
            }, sort_keys=True) + "\n")
