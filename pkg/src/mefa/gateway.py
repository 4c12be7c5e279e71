"""Cached access to chat-completion backends and multi-round evidence gathering.

Three backend kinds:

* ``http``     - OpenAI-style ``POST {endpoint}/chat/completions``.
* ``replay``   - answers only from the on-disk cache; never touches the network.
* ``scripted`` - in-memory response table, for tests and fixtures.

Cache entries live one-per-file in the cache directory, named by the sha256
key of ``(model, temperature, top_p, prompt, round)``.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
import threading
import time
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Mapping, Sequence, Union

import httpx

from .domain import (
    UNIFORM,
    DependencyLevel,
    Document,
    EventMention,
    EvidenceBundle,
    MefaConfig,
    ProbTriple,
    validate_bundle,
)
from .prompts import (
    MAIN_TASKS,
    ParseFailure,
    PromptRequest,
    SubTask,
    parse_clues,
    parse_coreference,
    parse_dependency,
    parse_triple,
    render,
)

log = logging.getLogger(__name__)

BACKEND_KINDS = ("http", "replay", "scripted")

# prompt text or "task:event1:event2" -> answer (or per-round answers); or fn(prompt, label, round)
ScriptedTable = Union[Mapping[str, Union[str, Sequence[str]]], Callable[[str, str, int], str]]


class GatewayError(RuntimeError):
    pass


class TransportError(GatewayError):
    """Network failure that persisted through every retry."""


class BackendError(GatewayError):
    """The backend answered with an error status or an unusable body."""


class CacheMissError(GatewayError):
    """Replay mode asked for a response that was never cached."""


@dataclass(frozen=True)
class BackendSpec:
    kind: str
    model: str = "scripted"
    endpoint: str | None = None
    api_key_env: str = "OPENAI_API_KEY"
    temperature: float = 0.1
    top_p: float = 0.7
    cache_dir: str | Path | None = None
    responses: ScriptedTable | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.kind not in BACKEND_KINDS:
            raise ValueError(f"backend kind must be one of {BACKEND_KINDS}, got {self.kind!r}")
        if self.kind == "http" and not (self.endpoint and self.model):
            raise ValueError("http backend requires endpoint and model")
        if self.kind == "replay" and self.cache_dir is None:
            raise ValueError("replay backend requires a cache directory")
        if self.kind == "scripted" and self.responses is None:
            raise ValueError("scripted backend requires a response table")

    def with_temperature(self, temperature: float) -> BackendSpec:
        return replace(self, temperature=temperature)

    def describe(self) -> dict:
        """Manifest-safe description; the API key itself is never held."""
        return {
            "kind": self.kind,
            "model": self.model,
            "endpoint": self.endpoint,
            "api_key_env": self.api_key_env,
            "temperature": self.temperature,
            "top_p": self.top_p,
            "cache_dir": str(self.cache_dir) if self.cache_dir is not None else None,
        }


def cache_key(model: str, temperature: float, top_p: float, prompt: str, round_index: int) -> str:
    payload = json.dumps(
        {"model": model, "temperature": temperature, "top_p": top_p,
         "prompt": prompt, "round": round_index},
        sort_keys=True, ensure_ascii=False, separators=(",", ":"),
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class CacheEntry:
    key: str
    raw_response: str
    created_at: str


class DiskCache:
    def __init__(self, directory: str | Path):
        self.directory = Path(directory)

    def path(self, key: str) -> Path:
        return self.directory / f"{key}.json"

    def get(self, key: str) -> CacheEntry | None:
        p = self.path(key)
        try:
            data = json.loads(p.read_text(encoding="utf-8"))
        except FileNotFoundError:
            return None
        return CacheEntry(data["key"], data["raw_response"], data["created_at"])

    def put(self, key: str, raw_response: str) -> CacheEntry:
        existing = self.get(key)
        if existing is not None:
            return existing
        entry = CacheEntry(key, raw_response, datetime.now(timezone.utc).isoformat())
        self.directory.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=self.directory, prefix=".tmp-", suffix=".json")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                json.dump(entry.__dict__, fh, ensure_ascii=False)
            os.replace(tmp, self.path(key))
        except BaseException:
            Path(tmp).unlink(missing_ok=True)
            raise
        return entry

    def entries(self) -> list[CacheEntry]:
        if not self.directory.is_dir():
            return []
        out = []
        for p in sorted(self.directory.glob("*.json")):
            if p.name.startswith(".tmp-"):
                continue
            data = json.loads(p.read_text(encoding="utf-8"))
            out.append(CacheEntry(data["key"], data["raw_response"], data["created_at"]))
        return out

    def clear(self) -> int:
        n = 0
        if self.directory.is_dir():
            for p in self.directory.glob("*.json"):
                p.unlink()
                n += 1
        return n


class Gateway:
    """Cache-first query front end for one backend. Thread-safe."""

    def __init__(
        self,
        backend: BackendSpec,
        retries: int = 2,
        timeout: float = 60.0,
        transport: httpx.BaseTransport | None = None,
        backoff: float = 1.0,
    ):
        self.backend = backend
        self.retries = retries
        self.timeout = timeout
        self.backoff = backoff
        self._transport = transport
        self.disk = DiskCache(backend.cache_dir) if backend.cache_dir is not None else None
        self._memory: dict[str, str] = {}
        self._lock = threading.Lock()
        self.stats = {"hits": 0, "misses": 0, "network_calls": 0}

    def _bump(self, name: str) -> None:
        with self._lock:
            self.stats[name] += 1

    def key_for(self, prompt: str, round_index: int) -> str:
        b = self.backend
        return cache_key(b.model, b.temperature, b.top_p, prompt, round_index)

    def query(self, request: PromptRequest, round_index: int = 1) -> str:
        """Cache-first answer for a rendered sub-task prompt."""
        label = f"{request.task.value}:{request.event1}:{request.event2}"
        return self.query_text(request.rendered, round_index, label)

    def query_text(self, prompt: str, round_index: int = 1, label: str = "") -> str:
        """Cache-first answer for arbitrary prompt text.

        ``label`` is a human-readable alias used in errors and as a secondary
        lookup key for scripted tables.
        """
        if round_index < 1:
            raise ValueError("round index starts at 1")
        key = self.key_for(prompt, round_index)
        with self._lock:
            cached = self._memory.get(key)
        if cached is None and self.disk is not None:
            entry = self.disk.get(key)
            cached = entry.raw_response if entry is not None else None
        if cached is not None:
            self._bump("hits")
            with self._lock:
                self._memory[key] = cached
            return cached

        self._bump("misses")
        kind = self.backend.kind
        if kind == "replay":
            raise CacheMissError(f"no cached response for {label or key} round {round_index}")
        if kind == "scripted":
            text = self._scripted(prompt, label, round_index)
        else:
            text = self._http(prompt)
        if self.disk is not None:
            text = self.disk.put(key, text).raw_response
        with self._lock:
            self._memory[key] = text
        return text

    def _scripted(self, prompt: str, label: str, round_index: int) -> str:
        table = self.backend.responses
        if callable(table):
            return table(prompt, label, round_index)
        for k in (prompt, label):
            if k in table:
                value = table[k]
                if isinstance(value, str):
                    return value
                return value[min(round_index, len(value)) - 1]
        raise BackendError(f"scripted backend has no response for {label or prompt[:60]!r}")

    def _http(self, prompt: str) -> str:
        b = self.backend
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(b.api_key_env)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        body = {
            "model": b.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": b.temperature,
            "top_p": b.top_p,
        }
        url = b.endpoint.rstrip("/") + "/chat/completions"
        last_exc: Exception | None = None
        with httpx.Client(timeout=self.timeout, transport=self._transport) as client:
            for attempt in range(self.retries + 1):
                if attempt:
                    time.sleep(self.backoff * 2 ** (attempt - 1))
                self._bump("network_calls")
                try:
                    resp = client.post(url, json=body, headers=headers)
                except httpx.TransportError as exc:
                    last_exc = exc
                    log.warning("request to %s failed (attempt %d): %s", url, attempt + 1, exc)
                    continue
                if resp.status_code == 429 or resp.status_code >= 500:
                    last_exc = BackendError(f"HTTP {resp.status_code}: {resp.text[:200]}")
                    log.warning("backend returned %d (attempt %d)", resp.status_code, attempt + 1)
                    continue
                if not resp.is_success:
                    raise BackendError(f"HTTP {resp.status_code}: {resp.text[:500]}")
                try:
                    return resp.json()["choices"][0]["message"]["content"]
                except (ValueError, KeyError, IndexError, TypeError) as exc:
                    raise BackendError(f"malformed completion body: {resp.text[:200]}") from exc
        if isinstance(last_exc, BackendError):
            raise last_exc
        raise TransportError(f"{url} unreachable after {self.retries + 1} attempts: {last_exc}")


def gather_evidence(
    gateway: Gateway,
    doc: Document,
    pair: tuple[EventMention, EventMention],
    config: MefaConfig,
    style: str = "mefa",
    template_dir: str | Path | None = None,
) -> EvidenceBundle:
    """Query all six sub-tasks for one ordered pair.

    Main tasks run ``config.rounds`` times; rounds that fail to parse are
    dropped and the rest are averaged entry-wise. Parse failures never
    propagate: they fall back to uniform / ``none`` / empty / ``False`` and set
    the task's degraded flag. Transport errors do propagate.
    """
    if config.rounds < 1:
        raise ValueError("rounds must be >= 1")
    degraded: set[str] = set()
    triples: dict[SubTask, ProbTriple] = {}
    for task in MAIN_TASKS:
        request = render(task, doc, pair, style, template_dir)
        parsed = []
        for r in range(1, config.rounds + 1):
            raw = gateway.query(request, r)
            try:
                triple, flagged = parse_triple(task, raw)
            except ParseFailure:
                degraded.add(task.value)
                continue
            if flagged:
                degraded.add(task.value)
            parsed.append(triple)
        if parsed:
            mean = [sum(t.as_tuple()[i] for t in parsed) / len(parsed) for i in range(3)]
            triples[task] = ProbTriple(*mean)
        else:
            triples[task] = UNIFORM

    def aux(task: SubTask, parser, fallback):
        raw = gateway.query(render(task, doc, pair, style, template_dir), 1)
        try:
            return parser(raw)
        except ParseFailure:
            degraded.add(task.value)
            return fallback

    level = aux(SubTask.DEPENDENCY, parse_dependency, DependencyLevel.NONE)
    clues = aux(SubTask.CAUSAL_CLUE, parse_clues, [])
    coref = aux(SubTask.COREFERENCE, parse_coreference, False)

    bundle = EvidenceBundle(
        t=triples[SubTask.TEMPORALITY],
        n=triples[SubTask.NECESSITY],
        u=triples[SubTask.SUFFICIENCY],
        d=level,
        clues=tuple(clues),
        coref=coref,
        rounds_used=config.rounds,
        degraded=frozenset(degraded),
    )
    return validate_bundle(bundle)
