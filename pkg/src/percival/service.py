"""HTTP deployment surface: classification API and filtering forward proxy.

Two faces over one engine. ``POST /classify`` returns a verdict for the
raw image bytes in the body. Proxy mode relays plain-HTTP absolute-form
requests and rewrites ad images in transit (HTTPS is tunneled untouched
via CONNECT; no TLS interception). Every path fails open: a classifier
problem never turns into a 5xx, it turns into a pass-through plus an
error counter.

The engine watches the model file and hot-swaps on mtime/size change, so
a retrained model lands without a restart; the memo cache is replaced at
the same instant because old verdicts do not describe the new weights.
"""

from __future__ import annotations

import hashlib
import json
import logging
import select
import socket
import statistics
import threading
from collections import deque
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import click
import requests

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .classifier import (
    CorruptImageError,
    DecodeError,
    UnsupportedFormatError,
    classify,
    decode_image,
    encode_png,
    should_bypass,
)
from .memo import MemoGate, VerdictCache
from .modelio import load_model
from .pipeline import BlockPolicy, apply_block, content_hash

log = logging.getLogger("percival.service")

DEFAULT_MAX_BODY = 20 * 1024 * 1024
PROXY_TIMEOUT_SECONDS = 60.0
# hop-by-hop headers never relayed (RFC 7230 section 6.1)
_HOP_BY_HOP = {
    "connection", "keep-alive", "proxy-authenticate", "proxy-authorization",
    "proxy-connection", "te", "trailers", "transfer-encoding", "upgrade",
}


@dataclass
class ServiceConfig:
    model_path: str
    listen_host: str = "127.0.0.1"
    listen_port: int = 8478
    threshold: float = 0.5
    blocking_policy: str = "clear"
    replacement_image: str | None = None
    memo_capacity: int = 10000
    max_body_bytes: int = DEFAULT_MAX_BODY
    mode: str = "api"

    def __post_init__(self):
        if self.mode not in ("api", "proxy", "both"):
            raise ValueError(f"mode must be api/proxy/both, got {self.mode!r}")
        if self.blocking_policy not in ("clear", "replace"):
            raise ValueError(
                f"blocking_policy must be clear/replace, got {self.blocking_policy!r}")
        if self.blocking_policy == "replace" and not self.replacement_image:
            raise ValueError("blocking_policy 'replace' needs replacement_image")
        if self.max_body_bytes < 1 or self.memo_capacity < 0:
            raise ValueError("max_body_bytes must be >= 1, memo_capacity >= 0")
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError(f"threshold must be in [0, 1], got {self.threshold}")

    @classmethod
    def from_toml(cls, path: str | Path) -> "ServiceConfig":
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
        unknown = set(data) - {f.name for f in cls.__dataclass_fields__.values()}
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if "model_path" not in data:
            raise ValueError("config must set model_path")
        return cls(**data)

    def build_policy(self) -> BlockPolicy:
        if self.blocking_policy == "replace":
            return BlockPolicy.replace(Path(self.replacement_image).read_bytes())
        return BlockPolicy.clear()


def _quantile(samples, q: float) -> float:
    arr = sorted(samples)
    pos = q * (len(arr) - 1)
    lo = int(pos)
    hi = min(lo + 1, len(arr) - 1)
    return arr[lo] + (arr[hi] - arr[lo]) * (pos - lo)


@dataclass
class _Counters:
    requests: int = 0
    classifications: int = 0
    forward_passes: int = 0
    bypassed: int = 0
    blocks: int = 0
    cache_hits: int = 0
    errors: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock)
    _inference: deque = field(default_factory=lambda: deque(maxlen=8192))

    def bump(self, name: str, by: int = 1):
        with self._lock:
            setattr(self, name, getattr(self, name) + by)

    def record_inference(self, micros: int):
        with self._lock:
            self._inference.append(micros)

    def snapshot(self) -> dict:
        with self._lock:
            samples = list(self._inference)
            counts = {
                "requests": self.requests,
                "classifications": self.classifications,
                "forward_passes": self.forward_passes,
                "bypassed": self.bypassed,
                "blocks": self.blocks,
                "cache_hits": self.cache_hits,
                "errors": self.errors,
            }
        counts["inference_micros"] = {
            "p50": statistics.median(samples) if samples else None,
            "p95": _quantile(samples, 0.95) if samples else None,
            "count": len(samples),
        }
        return counts


class ClassifierEngine:
    """Shared model + memo + counters behind the HTTP faces.

    The model file must load at construction; a service with no model
    refuses to start rather than serving garbage verdicts.
    """

    def __init__(self, config: ServiceConfig):
        self.config = config
        self.counters = _Counters()
        self.policy = config.build_policy()
        self._swap_lock = threading.Lock()
        self._load()

    def _file_stamp(self):
        st = Path(self.config.model_path).stat()
        return (st.st_mtime_ns, st.st_size)

    def _load(self):
        path = Path(self.config.model_path)
        data = path.read_bytes()
        model = load_model(data)
        with self._swap_lock:
            self._model = model
            self.model_id = hashlib.sha256(data).hexdigest()
            self._stamp = self._file_stamp()
            # verdicts from the previous weights must not leak through
            self._gate = MemoGate(VerdictCache(self.config.memo_capacity))
        log.info("model %s loaded (%s)", path, self.model_id[:12])

    def maybe_reload(self):
        try:
            stamp = self._file_stamp()
        except OSError:
            return  # keep serving the loaded model
        if stamp != self._stamp:
            try:
                self._load()
            except (OSError, ValueError) as exc:
                log.warning("model reload failed, keeping old model: %s", exc)
                self._stamp = stamp  # do not retry a broken file every request

    def _snapshot(self):
        with self._swap_lock:
            return self._model, self._gate, self.model_id

    def classify_bytes(self, data: bytes, hinted_format: str | None = None):
        """Memoized, single-flight verdict for raw image bytes.

        Returns (verdict, cache_hit, model_id). Decode errors propagate
        (the API layer maps them to statuses; the proxy fails open).
        """
        self.maybe_reload()
        model, gate, model_id = self._snapshot()
        key = content_hash(data)
        state, val = gate.begin(key)
        if state == "hit":
            self.counters.bump("cache_hits")
            return val, True, model_id
        if state == "wait":
            try:
                verdict = val.result()
            except DecodeError:
                raise
            self.counters.bump("cache_hits")
            return verdict, True, model_id
        try:
            bitmap = decode_image(data, hinted_format)
            verdict = classify(bitmap, model, threshold=self.config.threshold)
        except BaseException as exc:
            gate.fail(key, exc)
            raise
        gate.complete(key, verdict)
        self.counters.bump("classifications")
        if verdict.bypassed:
            self.counters.bump("bypassed")
        else:
            self.counters.bump("forward_passes")
            self.counters.record_inference(verdict.inference_micros)
        return verdict, False, model_id

    def block_body(self, data: bytes) -> bytes:
        """Replacement bytes for a blocked image, per the blocking policy."""
        bitmap = decode_image(data)
        return encode_png(apply_block(bitmap, self.policy))


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    engine: ClassifierEngine = None
    config: ServiceConfig = None

    # ---- plumbing ----

    def log_message(self, fmt, *args):
        log.debug("%s %s", self.address_string(), fmt % args)

    def _send_json(self, code: int, payload: dict, close: bool = False):
        body = json.dumps(payload).encode()
        self.send_response(code)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        if close:
            self.send_header("Connection", "close")
        self.end_headers()
        self.wfile.write(body)
        if close:
            self.close_connection = True

    def _error(self, code: int, message: str, close: bool = False):
        self._send_json(code, {"error": message}, close=close)

    # ---- classify API ----

    def do_POST(self):
        if self.path != "/classify":
            self._error(404, "unknown endpoint")
            return
        if self.config.mode == "proxy":
            self._error(404, "classification api disabled")
            return
        length = self.headers.get("Content-Length")
        if length is None:
            self._error(411, "Content-Length required")
            return
        length = int(length)
        if length > self.config.max_body_bytes:
            # refuse before reading; the connection is unusable afterwards
            self._error(413, f"body exceeds {self.config.max_body_bytes} bytes",
                        close=True)
            return
        data = self.rfile.read(length)
        self.engine.counters.bump("requests")
        try:
            verdict, cache_hit, model_id = self.engine.classify_bytes(
                data, self.headers.get("Content-Type"))
        except UnsupportedFormatError as exc:
            self._error(415, str(exc))
            return
        except CorruptImageError as exc:
            self._error(422, str(exc))
            return
        if verdict.is_ad:
            self.engine.counters.bump("blocks")
        self._send_json(200, {
            "is_ad": verdict.is_ad,
            "p_ad": verdict.p_ad,
            "bypassed": verdict.bypassed,
            "inference_micros": verdict.inference_micros,
            "model_id": model_id,
            "cache_hit": cache_hit,
        })

    # ---- stats ----

    def do_GET(self):
        if self.path == "/stats":
            self.engine.maybe_reload()
            payload = self.engine.counters.snapshot()
            payload["model_id"] = self.engine.model_id
            payload["mode"] = self.config.mode
            self._send_json(200, payload)
            return
        if self.path.startswith("http://"):
            if self.config.mode == "api":
                self._error(403, "proxy disabled")
                return
            self._proxy_request()
            return
        self._error(404, "unknown endpoint")

    # ---- proxy ----

    def _upstream_headers(self) -> dict:
        headers = {}
        for name, value in self.headers.items():
            if name.lower() in _HOP_BY_HOP or name.lower() == "host":
                continue
            headers[name] = value
        # ask for identity encoding so pass-through stays byte-identical
        headers["Accept-Encoding"] = "identity"
        return headers

    def _proxy_request(self):
        self.engine.counters.bump("requests")
        try:
            upstream = requests.get(
                self.path, headers=self._upstream_headers(),
                timeout=PROXY_TIMEOUT_SECONDS, allow_redirects=False,
            )
        except requests.RequestException as exc:
            self._error(502, f"upstream fetch failed: {exc}")
            return
        body = upstream.content
        extra = {}
        content_type = upstream.headers.get("Content-Type", "")
        if upstream.ok and content_type.split(";")[0].strip().lower().startswith("image/"):
            filtered = self._filter_image(body, content_type)
            if filtered is not None:
                body = filtered
                extra["X-Percival"] = "blocked"
                extra["Content-Type"] = "image/png"
        self.send_response(upstream.status_code)
        sent = set()
        for name, value in upstream.headers.items():
            low = name.lower()
            if low in _HOP_BY_HOP or low in ("content-length", "content-encoding"):
                continue
            if low == "content-type" and "Content-Type" in extra:
                continue
            self.send_header(name, value)
            sent.add(low)
        for name, value in extra.items():
            self.send_header(name, value)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _filter_image(self, body: bytes, content_type: str) -> bytes | None:
        """Classify an image response; replacement bytes when it is an ad,
        None to pass through. Never raises (fail-open)."""
        if len(body) > self.config.max_body_bytes:
            return None
        try:
            bitmap = decode_image(body, content_type)
        except DecodeError:
            return None
        if should_bypass(bitmap.width, bitmap.height):
            self.engine.counters.bump("bypassed")
            return None
        try:
            verdict, _, _ = self.engine.classify_bytes(body, content_type)
        except Exception:
            self.engine.counters.bump("errors")
            return None
        if not verdict.is_ad:
            return None
        try:
            replacement = self.engine.block_body(body)
        except Exception:
            self.engine.counters.bump("errors")
            return None
        self.engine.counters.bump("blocks")
        return replacement

    def do_CONNECT(self):
        if self.config.mode == "api":
            self._error(403, "proxy disabled")
            return
        host, _, port = self.path.partition(":")
        try:
            remote = socket.create_connection((host, int(port or 443)), timeout=10)
        except OSError as exc:
            self._error(502, f"cannot reach {self.path}: {exc}")
            return
        self.send_response(200, "Connection Established")
        self.end_headers()
        self._tunnel(self.connection, remote)
        self.close_connection = True

    @staticmethod
    def _tunnel(client: socket.socket, remote: socket.socket):
        """Opaque byte pump; the payload is never inspected."""
        try:
            while True:
                readable, _, _ = select.select([client, remote], [], [], 30)
                if not readable:
                    break
                for src in readable:
                    dst = remote if src is client else client
                    data = src.recv(65536)
                    if not data:
                        return
                    dst.sendall(data)
        except OSError:
            pass
        finally:
            remote.close()


def build_server(config: ServiceConfig) -> ThreadingHTTPServer:
    engine = ClassifierEngine(config)
    handler = type("BoundHandler", (_Handler,), {"engine": engine, "config": config})
    server = ThreadingHTTPServer((config.listen_host, config.listen_port), handler)
    server.engine = engine
    return server


@click.command()
@click.option("--config", "config_path", type=click.Path(exists=True),
              help="TOML config file; keys mirror ServiceConfig.")
@click.option("--model", "model_path", type=click.Path(exists=True),
              help="Model file; overrides the config file's model_path.")
@click.option("--host", default=None, help="Listen address override.")
@click.option("--port", type=int, default=None, help="Listen port override.")
@click.option("--mode", type=click.Choice(["api", "proxy", "both"]), default=None)
@click.option("--threshold", type=float, default=None)
def main(config_path, model_path, host, port, mode, threshold):
    """Run the classification service / filtering proxy."""
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    if config_path:
        config = ServiceConfig.from_toml(config_path)
    elif model_path:
        config = ServiceConfig(model_path=model_path)
    else:
        raise click.UsageError("need --config or --model")
    overrides = {"listen_host": host, "listen_port": port, "mode": mode,
                 "threshold": threshold}
    if model_path and config_path:
        overrides["model_path"] = model_path
    for key, value in overrides.items():
        if value is not None:
            setattr(config, key, value)
    config.__post_init__()  # re-validate after overrides
    server = build_server(config)
    log.info("listening on %s:%d (%s)", config.listen_host,
             config.listen_port, config.mode)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()


if __name__ == "__main__":
    main()
