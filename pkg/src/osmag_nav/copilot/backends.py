"""Chat backends: anything with ``complete(system, user) -> str``.

``RuleBackend`` (see rules.py) answers offline, ``ScriptedBackend`` replays
recorded transcripts and ``LiveBackend`` talks to an HTTP chat-completions
endpoint.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import time
from typing import Protocol

import httpx

from .rules import RuleBackend

log = logging.getLogger(__name__)

URL_ENV = "OSMAG_NAV_LLM_URL"
KEY_ENV = "OSMAG_NAV_LLM_KEY"
MODEL_ENV = "OSMAG_NAV_LLM_MODEL"


class ChatBackend(Protocol):
    name: str
    model: str

    def complete(self, system: str, user: str) -> str: ...


class BackendError(RuntimeError):
    pass


def prompt_key(system: str, user: str) -> str:
    return hashlib.sha256(f"{system}\x00{user}".encode("utf-8")).hexdigest()[:16]


class ScriptedBackend:
    """Replays canned replies.

    Replies keyed by prompt hash are served for matching prompts; otherwise
    the unkeyed replies are handed out in order.
    """

    name = "scripted"

    def __init__(self, replies=None, keyed: dict | None = None, model: str = "transcript"):
        self.queue = list(replies or [])
        self.keyed = dict(keyed or {})
        self.model = model
        self.calls: list[tuple[str, str]] = []

    @classmethod
    def from_transcript(cls, path) -> "ScriptedBackend":
        with open(path, encoding="utf-8") as fh:
            records = json.load(fh)
        keyed = {r["key"]: r["response"] for r in records if r.get("key")}
        queue = [r["response"] for r in records if not r.get("key")]
        return cls(queue, keyed, model=os.path.basename(str(path)))

    def complete(self, system: str, user: str) -> str:
        self.calls.append((system, user))
        key = prompt_key(system, user)
        if key in self.keyed:
            return self.keyed[key]
        if not self.queue:
            raise BackendError(f"transcript exhausted (no reply for prompt {key})")
        return self.queue.pop(0)


class RecordingBackend:
    """Wraps another backend and keeps a transcript of every exchange."""

    def __init__(self, inner):
        self.inner = inner
        self.name = f"recording({inner.name})"
        self.model = inner.model
        self.records: list[dict] = []

    def complete(self, system: str, user: str) -> str:
        reply = self.inner.complete(system, user)
        self.records.append({"key": prompt_key(system, user), "task": system.splitlines()[0], "response": reply})
        return reply

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.records, fh, indent=2, sort_keys=True)
            fh.write("\n")


class LiveBackend:
    """OpenAI-style chat-completions over HTTP."""

    name = "live"

    def __init__(
        self,
        base_url: str | None = None,
        model: str | None = None,
        api_key: str | None = None,
        timeout: float = 30.0,
        retries: int = 2,
        transport: httpx.BaseTransport | None = None,
    ):
        base_url = base_url or os.environ.get(URL_ENV)
        if not base_url:
            raise BackendError(f"no endpoint configured; set {URL_ENV}")
        self.url = base_url.rstrip("/")
        if not self.url.endswith("/chat/completions"):
            self.url += "/chat/completions"
        self.model = model or os.environ.get(MODEL_ENV, "gpt-4o")
        self.api_key = api_key if api_key is not None else os.environ.get(KEY_ENV, "")
        self.retries = retries
        self.client = httpx.Client(timeout=timeout, transport=transport)

    def complete(self, system: str, user: str) -> str:
        body = {
            "model": self.model,
            "messages": [{"role": "system", "content": system}, {"role": "user", "content": user}],
            "temperature": 0,
        }
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        last = None
        for attempt in range(self.retries + 1):
            try:
                resp = self.client.post(self.url, json=body, headers=headers)
                if resp.status_code == 429 or resp.status_code >= 500:
                    last = BackendError(f"HTTP {resp.status_code}")
                else:
                    resp.raise_for_status()
                    return resp.json()["choices"][0]["message"]["content"]
            except httpx.TransportError as exc:
                last = exc
            except (httpx.HTTPStatusError, KeyError, IndexError, ValueError) as exc:
                raise BackendError(f"chat endpoint error: {exc}") from exc
            log.warning("chat request failed (%s), attempt %d/%d", last, attempt + 1, self.retries + 1)
            if attempt < self.retries:
                time.sleep(0.5 * (attempt + 1))
        raise BackendError(f"chat endpoint unreachable after {self.retries + 1} attempts: {last}")


def make_backend(kind: str, transcript: str | None = None):
    if kind == "rule":
        return RuleBackend()
    if kind == "scripted":
        if not transcript:
            raise BackendError("the scripted backend needs a transcript file")
        return ScriptedBackend.from_transcript(transcript)
    if kind == "live":
        return LiveBackend()
    raise BackendError(f"unknown backend {kind!r}")
