"""Raster-phase choke-point simulator.

Every image frame of a page fixture is decoded on one of `lanes` raster
workers and must pass the classifier before (sync) or concurrently with
(async) its render event. Async mode paints immediately and retracts ads
when the verdict lands; classification there runs on a second worker pool
at strictly lower priority than raster work, so painting latency never
waits on inference. Verdicts are memoized by content hash with single-
flight coalescing, so a repeated image costs one forward pass no matter
how many lanes race on it.

Event sequences per frame are exactly one of [Rendered], [Blocked], or
[Rendered, Retracted]. Decode failures render unmodified (fail-open) and
are recorded in stats.
"""

import hashlib
import json
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from percival.classifier import (
    Bitmap,
    DecodeError,
    classify,
    decode_image,
    should_bypass,
)
from percival.memo import MemoGate, VerdictCache
from percival.nn.backend import kernels

RENDERED = "rendered"
BLOCKED = "blocked"
RETRACTED = "retracted"

_FINAL_WAIT_SECONDS = 300.0  # liveness backstop; a hang here is a bug


def content_hash(data):
    """128-bit hash of encoded bytes; the memo key."""
    return hashlib.blake2b(data, digest_size=16).digest()


@dataclass(frozen=True)
class ImageFrame:
    frame_id: int
    data: bytes
    origin_url: str
    content_hash: bytes

    @classmethod
    def make(cls, frame_id, data, origin_url=""):
        return cls(frame_id=frame_id, data=data, origin_url=origin_url,
                   content_hash=content_hash(data))


@dataclass
class PageFixture:
    frames: list

    def __post_init__(self):
        ids = [f.frame_id for f in self.frames]
        if len(set(ids)) != len(ids):
            raise ValueError("frame_ids must be unique within a fixture")

    @classmethod
    def load(cls, directory):
        directory = Path(directory)
        manifest = directory / "manifest.jsonl"
        frames = []
        for line_no, line in enumerate(manifest.read_text().splitlines(), 1):
            if not line.strip():
                continue
            row = json.loads(line)
            path = directory / row["file"]
            if not path.is_file():
                raise ValueError(f"manifest line {line_no}: missing file {row['file']!r}")
            frames.append(ImageFrame.make(
                int(row["frame_id"]), path.read_bytes(), row.get("origin_url", "")
            ))
        return cls(frames=frames)

    def save(self, directory):
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        with open(directory / "manifest.jsonl", "w") as fh:
            for frame in self.frames:
                name = f"{frame.frame_id:05d}.img"
                (directory / name).write_bytes(frame.data)
                fh.write(json.dumps({
                    "frame_id": frame.frame_id,
                    "file": name,
                    "origin_url": frame.origin_url,
                }) + "\n")


@dataclass
class BlockPolicy:
    kind: str  # "clear" | "replace"
    replacement: Bitmap = None

    @classmethod
    def clear(cls):
        return cls(kind="clear")

    @classmethod
    def replace(cls, image_bytes):
        """Decodes at construction: an unreadable replacement image is a
        configuration error at startup, never a per-frame surprise."""
        try:
            bitmap = decode_image(image_bytes)
        except DecodeError as exc:
            raise ValueError(f"replacement image unreadable: {exc}") from exc
        return cls(kind="replace", replacement=bitmap)


@dataclass
class PipelineConfig:
    mode: str  # "sync" | "async" | "off"
    lanes: int = 1
    memo_capacity: int = 10000
    blocking_policy: BlockPolicy = field(default_factory=BlockPolicy.clear)
    threshold: float = 0.5

    def __post_init__(self):
        if self.mode not in ("sync", "async", "off"):
            raise ValueError(f"mode must be sync, async, or off, got {self.mode!r}")
        if self.lanes < 1:
            raise ValueError("lanes must be >= 1")
        if self.memo_capacity < 0:
            raise ValueError("memo_capacity must be >= 0")


@dataclass
class RenderEvent:
    frame_id: int
    kind: str
    t_micros: int
    cache_hit: bool = False


@dataclass
class FrameStats:
    frame_id: int
    decode_micros: int = 0
    inference_micros: int = 0
    bypassed: bool = False
    decode_failed: bool = False
    cache_hit: bool = False
    forward_pass: bool = False
    error: bool = False
    verdict_micros: int = None  # when the verdict was known, if classified
    first_event_micros: int = None
    final_event_micros: int = None
    outcome: str = None  # "rendered" | "blocked"


@dataclass
class PipelineStats:
    mode: str
    lanes: int
    frames: int
    rendered: int
    blocked: int
    bypassed: int
    decode_failures: int
    classified_frames: int
    forward_passes: int
    cache_hits: int
    errors: int
    wall_micros: int
    first_render_all_micros: int
    page_complete_micros: int
    per_frame: dict

    def to_dict(self):
        d = {k: v for k, v in self.__dict__.items() if k != "per_frame"}
        d["per_frame"] = [vars(fs) for fs in self.per_frame.values()]
        return d


def apply_block(bitmap, policy):
    """Produce the pixels the compositor shows instead of a blocked frame."""
    if policy.kind == "clear":
        return Bitmap(bitmap.width, bitmap.height,
                      np.zeros((bitmap.height, bitmap.width, 4), np.uint8))
    resized = kernels.bilinear_resize_rgba(
        policy.replacement.pixels, bitmap.height, bitmap.width
    )
    # round half up, clamp, back to 8-bit
    pixels = np.clip(np.floor(resized + 0.5), 0, 255).astype(np.uint8)
    return Bitmap(bitmap.width, bitmap.height, pixels)


class _Run:
    def __init__(self, fixture, config, model):
        self.fixture = fixture
        self.cfg = config
        self.model = model
        self.gate = MemoGate(VerdictCache(config.memo_capacity))
        self.events = []
        self._ev_lock = threading.Lock()
        self._count_lock = threading.Lock()
        self.forward_passes = 0
        self.fstats = {f.frame_id: FrameStats(f.frame_id) for f in fixture.frames}
        self._final = {f.frame_id: threading.Event() for f in fixture.frames}
        self._pending_raster = len(fixture.frames)
        self.raster_idle = threading.Event()
        if not fixture.frames:
            self.raster_idle.set()
        self.classify_futures = []
        self.classify_pool = None
        self.t0 = time.perf_counter_ns()

    def now(self):
        return (time.perf_counter_ns() - self.t0) // 1000

    # -- event bookkeeping -------------------------------------------------

    def emit(self, frame_id, kind, cache_hit=False, final=True):
        with self._ev_lock:
            t = self.now()
            self.events.append(RenderEvent(frame_id, kind, t, cache_hit))
            fs = self.fstats[frame_id]
            if fs.first_event_micros is None:
                fs.first_event_micros = t
            if final:
                fs.final_event_micros = t
                fs.outcome = "blocked" if kind in (BLOCKED, RETRACTED) else "rendered"
        if final:
            self._final[frame_id].set()

    def finalize_quietly(self, frame_id):
        """The frame's earlier Rendered event turned out to be final."""
        with self._ev_lock:
            fs = self.fstats[frame_id]
            fs.final_event_micros = fs.first_event_micros
            fs.outcome = "rendered"
        self._final[frame_id].set()

    def count_forward(self, fs):
        with self._count_lock:
            self.forward_passes += 1
        fs.forward_pass = True

    def raster_done(self):
        with self._count_lock:
            self._pending_raster -= 1
            if self._pending_raster == 0:
                self.raster_idle.set()

    # -- shared stages ------------------------------------------------------

    def decode_frame(self, frame, fs):
        t0 = time.perf_counter_ns()
        try:
            bitmap = decode_image(frame.data)
        except DecodeError:
            fs.decode_micros = (time.perf_counter_ns() - t0) // 1000
            fs.decode_failed = True
            self.emit(frame.frame_id, RENDERED)  # fail-open
            return None
        fs.decode_micros = (time.perf_counter_ns() - t0) // 1000
        return bitmap

    def block_pixels(self, bitmap):
        apply_block(bitmap, self.cfg.blocking_policy)

    def classify_owner(self, frame, bitmap, fs):
        """Run the forward pass as the owner of this hash's flight."""
        try:
            verdict = classify(bitmap, self.model, self.cfg.threshold, bypass=False)
        except BaseException as exc:
            self.gate.fail(frame.content_hash, exc)
            raise
        self.count_forward(fs)
        fs.inference_micros = verdict.inference_micros
        fs.verdict_micros = self.now()
        self.gate.complete(frame.content_hash, verdict)
        return verdict

    # -- sync / off ---------------------------------------------------------

    def raster_sync(self, frame):
        fs = self.fstats[frame.frame_id]
        bitmap = self.decode_frame(frame, fs)
        if bitmap is None:
            return
        if self.cfg.mode == "off":
            self.emit(frame.frame_id, RENDERED)
            return
        if should_bypass(bitmap.width, bitmap.height):
            fs.bypassed = True
            self.emit(frame.frame_id, RENDERED)
            return
        status, val = self.gate.begin(frame.content_hash)
        if status == "hit":
            verdict, cache_hit = val, True
            fs.verdict_micros = self.now()
        elif status == "wait":
            try:
                verdict, cache_hit = val.result(), True
                fs.verdict_micros = self.now()
            except BaseException:
                fs.error = True
                self.emit(frame.frame_id, RENDERED)  # fail-open
                return
        else:
            verdict, cache_hit = self.classify_owner(frame, bitmap, fs), False
        fs.cache_hit = cache_hit
        if verdict.is_ad:
            self.block_pixels(bitmap)
            self.emit(frame.frame_id, BLOCKED, cache_hit=cache_hit)
        else:
            self.emit(frame.frame_id, RENDERED, cache_hit=cache_hit)

    # -- async --------------------------------------------------------------

    def raster_async(self, frame):
        fs = self.fstats[frame.frame_id]
        try:
            bitmap = self.decode_frame(frame, fs)
            if bitmap is None:
                return
            if should_bypass(bitmap.width, bitmap.height):
                fs.bypassed = True
                self.emit(frame.frame_id, RENDERED)
                return
            status, val = self.gate.begin(frame.content_hash)
            if status == "hit":
                fs.cache_hit = True
                fs.verdict_micros = self.now()
                self._finish_async(frame, bitmap, fs, val, cache_hit=True)
            elif status == "wait":
                fs.cache_hit = True
                val.add_done_callback(
                    lambda fut: self._follower_done(frame, bitmap, fs, fut)
                )
            else:
                # paint now, classify later at lower priority
                self.emit(frame.frame_id, RENDERED, final=False)
                self.classify_futures.append(
                    self.classify_pool.submit(self.classify_async, frame, bitmap, fs)
                )
        finally:
            self.raster_done()

    def classify_async(self, frame, bitmap, fs):
        self.raster_idle.wait()
        try:
            verdict = classify(bitmap, self.model, self.cfg.threshold, bypass=False)
        except BaseException as exc:
            self.gate.fail(frame.content_hash, exc)
            fs.error = True
            self.finalize_quietly(frame.frame_id)  # fail-open: stays rendered
            return
        self.count_forward(fs)
        fs.inference_micros = verdict.inference_micros
        fs.verdict_micros = self.now()
        self.gate.complete(frame.content_hash, verdict)
        if verdict.is_ad:
            self.block_pixels(bitmap)
            self.emit(frame.frame_id, RETRACTED)
        else:
            self.finalize_quietly(frame.frame_id)

    def _follower_done(self, frame, bitmap, fs, fut):
        try:
            verdict = fut.result()
        except BaseException:
            fs.error = True
            self.emit(frame.frame_id, RENDERED)  # fail-open
            return
        fs.verdict_micros = self.now()
        self._finish_async(frame, bitmap, fs, verdict, cache_hit=True)

    def _finish_async(self, frame, bitmap, fs, verdict, cache_hit):
        """Final event for a frame that never painted: verdict arrived first."""
        if verdict.is_ad:
            self.block_pixels(bitmap)
            self.emit(frame.frame_id, BLOCKED, cache_hit=cache_hit)
        else:
            self.emit(frame.frame_id, RENDERED, cache_hit=cache_hit)


def run_page(fixture, config, model=None):
    """Execute one page load; returns (events, PipelineStats)."""
    if config.mode != "off" and model is None:
        raise ValueError("a model is required unless mode == off")

    run = _Run(fixture, config, model)
    raster = ThreadPoolExecutor(max_workers=config.lanes, thread_name_prefix="raster")
    if config.mode == "async":
        run.classify_pool = ThreadPoolExecutor(
            max_workers=config.lanes, thread_name_prefix="classify"
        )
    try:
        work = run.raster_async if config.mode == "async" else run.raster_sync
        futures = [raster.submit(work, frame) for frame in fixture.frames]
        raster.shutdown(wait=True)
        for fut in futures:
            fut.result()  # surface raster-stage bugs loudly
        if run.classify_pool is not None:
            run.classify_pool.shutdown(wait=True)
            for fut in run.classify_futures:
                fut.result()
    finally:
        raster.shutdown(wait=True)
        if run.classify_pool is not None:
            run.classify_pool.shutdown(wait=True)

    for frame_id, latch in run._final.items():
        if not latch.wait(timeout=_FINAL_WAIT_SECONDS):
            raise RuntimeError(f"frame {frame_id} never received a final event")

    wall = run.now()
    fstats = run.fstats
    first_all = max((fs.first_event_micros for fs in fstats.values()), default=0)
    complete = max((fs.final_event_micros for fs in fstats.values()), default=0)
    stats = PipelineStats(
        mode=config.mode,
        lanes=config.lanes,
        frames=len(fixture.frames),
        rendered=sum(1 for fs in fstats.values() if fs.outcome == "rendered"),
        blocked=sum(1 for fs in fstats.values() if fs.outcome == "blocked"),
        bypassed=sum(1 for fs in fstats.values() if fs.bypassed),
        decode_failures=sum(1 for fs in fstats.values() if fs.decode_failed),
        classified_frames=sum(1 for fs in fstats.values() if fs.verdict_micros is not None),
        forward_passes=run.forward_passes,
        cache_hits=sum(1 for fs in fstats.values() if fs.cache_hit),
        errors=sum(1 for fs in fstats.values() if fs.error),
        wall_micros=wall,
        first_render_all_micros=first_all,
        page_complete_micros=complete,
        per_frame=fstats,
    )
    return run.events, stats
