"""Chat backends: remote chat-completion endpoints, deterministic scripted stubs,
and a record/replay wrapper for byte-identical reruns of remote sessions."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from dataclasses import dataclass, replace
from typing import Callable, Optional, Union

import requests

log = logging.getLogger(__name__)


class BackendError(Exception):
    """Any backend failure surfaced to the orchestrator."""


class Timeout(BackendError):
    pass


class EndpointError(BackendError):
    def __init__(self, status: int, detail: str = ""):
        super().__init__(f"endpoint returned {status}: {detail[:200]}")
        self.status = status


class ScriptExhausted(BackendError):
    pass


class ReplayMiss(BackendError):
    pass


@dataclass(frozen=True)
class ChatRequest:
    system_prompt: str
    turns: tuple[tuple[str, str], ...]  # (role, content), role in {"user", "assistant"}
    temperature: Optional[float] = None
    max_tokens: Optional[int] = None
    tag: str = ""  # which agent issued the request

    def with_turns(self, *extra: tuple[str, str]) -> "ChatRequest":
        return replace(self, turns=self.turns + extra)

    def merged_turns(self) -> tuple[tuple[str, str], ...]:
        """Turns with consecutive same-role entries merged, so roles alternate."""
        merged: list[tuple[str, str]] = []
        for role, content in self.turns:
            if merged and merged[-1][0] == role:
                merged[-1] = (role, merged[-1][1] + "\n\n" + content)
            else:
                merged.append((role, content))
        return tuple(merged)

    def canonical(self) -> str:
        return json.dumps(
            {
                "system": self.system_prompt,
                "turns": list(self.merged_turns()),
                "temperature": self.temperature,
                "max_tokens": self.max_tokens,
            },
            sort_keys=True,
            ensure_ascii=False,
        )

    def digest(self) -> str:
        return hashlib.sha256(self.canonical().encode("utf-8")).hexdigest()

    @property
    def last_user_content(self) -> str:
        for role, content in reversed(self.turns):
            if role == "user":
                return content
        return ""


Matcher = Optional[Union[str, Callable[[ChatRequest], bool]]]  # None = wildcard


@dataclass(frozen=True)
class ScriptEntry:
    reply: str
    match: Matcher = None

    def accepts(self, request: ChatRequest) -> bool:
        if self.match is None:
            return True
        if callable(self.match):
            return bool(self.match(request))
        haystack = request.system_prompt + "\n" + "\n".join(c for _, c in request.turns)
        return self.match in haystack


REPEAT_LAST = "repeat_last"
FAIL = "fail"


@dataclass(frozen=True)
class Script:
    entries: tuple[ScriptEntry, ...]
    exhaustion: str = FAIL  # "repeat_last" | "fail"

    def __post_init__(self) -> None:
        if not self.entries:
            raise ValueError("script must be nonempty")
        if self.exhaustion not in (REPEAT_LAST, FAIL):
            raise ValueError(f"bad exhaustion policy: {self.exhaustion!r}")

    @classmethod
    def of(cls, *replies: str, exhaustion: str = FAIL) -> "Script":
        return cls(tuple(ScriptEntry(r) for r in replies), exhaustion=exhaustion)


@dataclass(frozen=True)
class RemoteBinding:
    endpoint: str
    model: str
    credentials_env: str = ""
    timeout: float = 60.0
    retry_budget: int = 3
    concurrency: int = 4
    backoff_base: float = 0.5

    def __post_init__(self) -> None:
        if self.timeout <= 0 or self.retry_budget <= 0:
            raise ValueError("timeout and retry budget must be positive")


@dataclass(frozen=True)
class ScriptedBinding:
    script_id: str


@dataclass(frozen=True)
class RecordBinding:
    inner: "BackendBinding"
    store_path: str


@dataclass(frozen=True)
class ReplayBinding:
    store_path: str


BackendBinding = Union[RemoteBinding, ScriptedBinding, RecordBinding, ReplayBinding]


class ScriptedBackend:
    """Sequential playback: each call consumes the next matching entry."""

    def __init__(self, script: Script):
        self.script = script
        self._cursor = 0
        self._last_reply: Optional[str] = None

    def complete(self, request: ChatRequest) -> str:
        while self._cursor < len(self.script.entries):
            entry = self.script.entries[self._cursor]
            self._cursor += 1
            if entry.accepts(request):
                self._last_reply = entry.reply
                return entry.reply
        if self.script.exhaustion == REPEAT_LAST and self._last_reply is not None:
            return self._last_reply
        raise ScriptExhausted(f"script exhausted after {len(self.script.entries)} entries")


class RemoteBackend:
    """Chat-completion JSON over HTTP with bounded retries and a concurrency cap."""

    def __init__(self, binding: RemoteBinding, semaphore: Optional[threading.Semaphore] = None):
        self.binding = binding
        self._semaphore = semaphore or threading.Semaphore(binding.concurrency)

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self.binding.credentials_env:
            token = os.environ.get(self.binding.credentials_env, "")
            if token:
                headers["Authorization"] = f"Bearer {token}"
        return headers

    def _payload(self, request: ChatRequest) -> dict:
        messages = []
        if request.system_prompt:
            messages.append({"role": "system", "content": request.system_prompt})
        messages.extend({"role": role, "content": content} for role, content in request.merged_turns())
        payload: dict = {"model": self.binding.model, "messages": messages}
        if request.temperature is not None:
            payload["temperature"] = request.temperature
        if request.max_tokens is not None:
            payload["max_tokens"] = request.max_tokens
        return payload

    def complete(self, request: ChatRequest) -> str:
        last_error: Optional[BackendError] = None
        with self._semaphore:
            for attempt in range(self.binding.retry_budget):
                if attempt:
                    time.sleep(self.binding.backoff_base * (2 ** (attempt - 1)))
                try:
                    response = requests.post(
                        self.binding.endpoint,
                        json=self._payload(request),
                        headers=self._headers(),
                        timeout=self.binding.timeout,
                    )
                except (requests.Timeout, requests.ConnectionError) as exc:
                    last_error = Timeout(str(exc))
                    continue
                if response.status_code >= 500:
                    last_error = EndpointError(response.status_code, response.text)
                    continue
                if response.status_code != 200:
                    raise EndpointError(response.status_code, response.text)
                try:
                    data = response.json()
                    return data["choices"][0]["message"]["content"]
                except (ValueError, KeyError, IndexError, TypeError) as exc:
                    raise EndpointError(response.status_code, f"bad completion payload: {exc}")
        raise last_error if last_error is not None else Timeout("retry budget exhausted")


class RecordingBackend:
    """Persists every (request, reply) pair as JSON Lines keyed by request digest."""

    def __init__(self, inner, store_path: str):
        self.inner = inner
        self.store_path = store_path
        self._lock = threading.Lock()

    def complete(self, request: ChatRequest) -> str:
        reply = self.inner.complete(request)
        row = {"digest": request.digest(), "request": request.canonical(), "reply": reply}
        with self._lock, open(self.store_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")
        return reply


class ReplayBackend:
    """Serves recorded replies by request digest, in recorded order per digest."""

    def __init__(self, store_path: str):
        self._queues: dict[str, list[str]] = {}
        self._last: dict[str, str] = {}
        with open(store_path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                row = json.loads(line)
                self._queues.setdefault(row["digest"], []).append(row["reply"])
                self._last[row["digest"]] = row["reply"]
        self._lock = threading.Lock()

    def complete(self, request: ChatRequest) -> str:
        digest = request.digest()
        with self._lock:
            queue = self._queues.get(digest)
            if queue:
                return queue.pop(0)
            if digest in self._last:
                return self._last[digest]
        raise ReplayMiss(f"request {digest[:12]}… was never recorded")


class BackendRegistry:
    """Named bindings plus the script store; hands out per-dialogue backend instances."""

    def __init__(self):
        self._bindings: dict[str, BackendBinding] = {}
        self._scripts: dict[str, Script] = {}
        self._semaphores: dict[str, threading.Semaphore] = {}

    def register(self, name: str, binding: BackendBinding) -> None:
        self._bindings[name] = binding

    def register_script(self, script_id: str, script: Script) -> None:
        self._scripts[script_id] = script

    def has(self, name: str) -> bool:
        return name in self._bindings

    def binding(self, name: str) -> BackendBinding:
        if name not in self._bindings:
            raise KeyError(f"no backend binding named {name!r}")
        return self._bindings[name]

    def make(self, name: str):
        """Fresh backend for one dialogue; scripted cursors never leak across dialogues."""
        return self._instantiate(self.binding(name), name)

    def _instantiate(self, binding: BackendBinding, name: str):
        if isinstance(binding, ScriptedBinding):
            if binding.script_id not in self._scripts:
                raise KeyError(f"no script named {binding.script_id!r}")
            return ScriptedBackend(self._scripts[binding.script_id])
        if isinstance(binding, RemoteBinding):
            semaphore = self._semaphores.setdefault(name, threading.Semaphore(binding.concurrency))
            return RemoteBackend(binding, semaphore)
        if isinstance(binding, RecordBinding):
            return RecordingBackend(self._instantiate(binding.inner, name + ".inner"), binding.store_path)
        if isinstance(binding, ReplayBinding):
            return ReplayBackend(binding.store_path)
        raise TypeError(f"unknown binding type: {binding!r}")


def record_and_replay(binding: BackendBinding, store_path: str) -> RecordBinding:
    """Wrap a binding so every exchange is persisted to store_path."""
    return RecordBinding(binding, store_path)


def replay_from(store_path: str) -> ReplayBinding:
    return ReplayBinding(store_path)


def _script_from_config(data: dict) -> Script:
    entries: list[ScriptEntry] = []
    for item in data.get("entries", []):
        entries.append(ScriptEntry(reply=item["reply"], match=item.get("match")))
    for reply in data.get("replies", []):
        entries.append(ScriptEntry(reply=reply))
    return Script(tuple(entries), exhaustion=data.get("exhaustion", FAIL))


def _binding_from_config(data: dict) -> BackendBinding:
    kind = data.get("type", "scripted")
    if kind == "scripted":
        return ScriptedBinding(script_id=data["script"])
    if kind == "remote":
        return RemoteBinding(
            endpoint=data["endpoint"],
            model=data["model"],
            credentials_env=data.get("credentials_env", ""),
            timeout=data.get("timeout", 60.0),
            retry_budget=data.get("retry_budget", 3),
            concurrency=data.get("concurrency", 4),
        )
    if kind == "replay":
        return ReplayBinding(store_path=data["store"])
    raise ValueError(f"unknown backend type: {kind!r}")


def load_backend_config(path: str) -> tuple[BackendRegistry, dict[str, str]]:
    """Read a TOML or JSON config; returns (registry, role -> binding-name map).

    Credentials never live in the file: remote bindings name an environment
    variable instead.
    """
    if path.endswith(".json"):
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    else:
        try:
            import tomllib  # py311+
        except ModuleNotFoundError:
            import tomli as tomllib
        with open(path, "rb") as fh:
            data = tomllib.load(fh)

    registry = BackendRegistry()
    for script_id, script_data in data.get("scripts", {}).items():
        registry.register_script(script_id, _script_from_config(script_data))
    for name, binding_data in data.get("bindings", {}).items():
        binding = _binding_from_config(binding_data)
        if binding_data.get("record"):
            binding = record_and_replay(binding, binding_data["record"])
        registry.register(name, binding)
    roles = dict(data.get("roles", {}))
    for role, name in roles.items():
        if not registry.has(name):
            raise KeyError(f"role {role!r} refers to unregistered binding {name!r}")
    return registry, roles
