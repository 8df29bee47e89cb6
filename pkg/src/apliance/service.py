"""Analysis backend: POST /analyze with a persistent, TTL-bounded disk cache.

Cache keys are fixed bit-exactly so caches stay portable:

    key = sha256(utf8(url) + 0x1F + utf8(title) + 0x1F
                 + ascii(sha256(utf8(text)).hexdigest())).hexdigest()

Entries live as one `<key>.entry` JSON file per key, written atomically
(temp file + rename) so a partially written entry is never served. An
entry is served only while younger than the TTL and only when it was
produced by the same engine version; anything else is a miss and gets
recomputed. Error responses are never cached.

The clock, cache store, and extractor are injectable; request handling is
single-flight per key so concurrent identical requests trigger at most one
extraction.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
import threading
import time
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from .dpdp import Verdict, compliance_verdict
from .extraction import ExtractionError, ExtractionResult

DEFAULT_TTL_S = 86400.0
CACHE_DIR_ENV = "APLIANCE_CACHE_DIR"


class ServiceError(Exception):
    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status
        self.message = message


@dataclass(frozen=True)
class AnalyzeRequest:
    url: str
    title: str
    text: str


@dataclass(frozen=True)
class CacheEntry:
    key: str
    created_at: float
    response: dict


def cache_key(url: str, title: str, text: str) -> str:
    inner = hashlib.sha256(text.encode("utf-8")).hexdigest()
    outer = hashlib.sha256(
        url.encode("utf-8") + b"\x1f" + title.encode("utf-8") + b"\x1f" + inner.encode("ascii")
    )
    return outer.hexdigest()


# ---------------------------------------------------------------------------
# Disk cache
# ---------------------------------------------------------------------------

class DiskCacheStore:
    """One JSON file per key under `directory`, atomic writes."""

    def __init__(self, directory: str):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def _path(self, key: str) -> Path:
        return self.directory / f"{key}.entry"

    def get(self, key: str) -> CacheEntry | None:
        path = self._path(key)
        try:
            payload = json.loads(path.read_text("utf-8"))
            return CacheEntry(payload["key"], payload["created_at"], payload["response"])
        except FileNotFoundError:
            return None
        except (json.JSONDecodeError, KeyError, TypeError):
            # unreadable entries are treated as misses, never served
            return None

    def put(self, entry: CacheEntry) -> None:
        path = self._path(entry.key)
        payload = json.dumps(
            {"key": entry.key, "created_at": entry.created_at, "response": entry.response}
        )
        fd, tmp_name = tempfile.mkstemp(dir=self.directory, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as handle:
                handle.write(payload)
            os.replace(tmp_name, path)
        except BaseException:
            try:
                os.unlink(tmp_name)
            except OSError:
                pass
            raise

    def keys(self) -> list[str]:
        return sorted(p.stem for p in self.directory.glob("*.entry"))

    def delete(self, key: str) -> None:
        try:
            self._path(key).unlink()
        except FileNotFoundError:
            pass
        except OSError as exc:
            raise ServiceError(500, f"cache delete failed for {self._path(key)}: {exc}")


# ---------------------------------------------------------------------------
# Analysis service
# ---------------------------------------------------------------------------

def build_response(result: ExtractionResult, verdict: Verdict, cached: bool) -> dict:
    """Wire-format response body; key order is part of the contract."""
    return {
        "verdict": "COMPLIANT" if verdict.compliant else "NON_COMPLIANT",
        "violations": [
            {"attribute": v.attribute, "reason": v.reason, "description": v.description}
            for v in verdict.violations
        ],
        "attributes": result.values(),
        "cached": cached,
        "engine_version": __version__,
    }


def render_response_json(response: dict) -> bytes:
    """Canonical JSON encoding shared by the HTTP layer and the CLI."""
    return json.dumps(response, ensure_ascii=False, separators=(", ", ": ")).encode("utf-8")


class AnalysisService:
    def __init__(self, extractor, store: DiskCacheStore, ttl_s: float = DEFAULT_TTL_S,
                 clock=time.time):
        self.extractor = extractor
        self.store = store
        self.ttl_s = ttl_s
        self.clock = clock
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()

    def _key_lock(self, key: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(key, threading.Lock())

    def _fresh(self, entry: CacheEntry | None, now: float) -> bool:
        return (
            entry is not None
            and (now - entry.created_at) < self.ttl_s
            and entry.response.get("engine_version") == __version__
        )

    def handle_analyze(self, request: AnalyzeRequest) -> dict:
        text = request.text.strip()
        if not text:
            raise ServiceError(400, "policy text is empty")
        key = cache_key(request.url, request.title, request.text)

        entry = self.store.get(key)
        now = self.clock()
        if self._fresh(entry, now):
            return {**entry.response, "cached": True}

        with self._key_lock(key):
            entry = self.store.get(key)
            now = self.clock()
            if self._fresh(entry, now):
                return {**entry.response, "cached": True}
            try:
                from .dpdp import builtin

                schema, _ = builtin()
                result = self.extractor.extract(schema, request.text)
            except ExtractionError as exc:
                raise ServiceError(502, f"extraction failed: {exc}") from exc
            verdict = compliance_verdict(result.to_assignment())
            response = build_response(result, verdict, cached=False)
            self.store.put(CacheEntry(key, self.clock(), response))
            return response

    def gc(self) -> int:
        """Remove expired entries; returns the purge count. Idempotent."""
        now = self.clock()
        purged = 0
        for key in self.store.keys():
            entry = self.store.get(key)
            if entry is None or (now - entry.created_at) >= self.ttl_s:
                self.store.delete(key)
                purged += 1
        return purged


def cache_gc(store: DiskCacheStore, clock=time.time, ttl_s: float = DEFAULT_TTL_S) -> int:
    service = AnalysisService(extractor=None, store=store, ttl_s=ttl_s, clock=clock)
    return service.gc()


# ---------------------------------------------------------------------------
# HTTP layer
# ---------------------------------------------------------------------------

def make_http_server(service: AnalysisService, host: str = "127.0.0.1", port: int = 0,
                     auth_token: str | None = None):
    """ThreadingHTTPServer exposing POST /analyze and GET /healthz."""
    from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

    class Handler(BaseHTTPRequestHandler):
        def log_message(self, *args):  # quiet by default
            pass

        def _send(self, status: int, body: bytes, content_type="application/json"):
            self.send_response(status)
            self.send_header("Content-Type", content_type)
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def _send_error(self, status: int, message: str):
            self._send(status, render_response_json({"error": message}))

        def do_GET(self):
            if self.path == "/healthz":
                self._send(200, render_response_json({"status": "ok", "version": __version__}))
            else:
                self._send_error(404, "not found")

        def do_POST(self):
            if self.path != "/analyze":
                self._send_error(404, "not found")
                return
            if auth_token and self.headers.get("X-Apliance-Token") != auth_token:
                self._send_error(401, "missing or invalid token")
                return
            try:
                length = int(self.headers.get("Content-Length", "0"))
                payload = json.loads(self.rfile.read(length).decode("utf-8"))
                request = AnalyzeRequest(
                    url=str(payload.get("url", "")),
                    title=str(payload.get("title", "")),
                    text=str(payload.get("text", "")),
                )
            except (ValueError, AttributeError):
                self._send_error(400, "request body is not valid JSON")
                return
            try:
                response = service.handle_analyze(request)
            except ServiceError as exc:
                self._send_error(exc.status, exc.message)
                return
            except Exception as exc:  # pragma: no cover - defensive
                self._send_error(500, f"internal error: {exc}")
                return
            self._send(200, render_response_json(response))

    return ThreadingHTTPServer((host, port), Handler)
