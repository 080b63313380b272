"""Versioned prompt templates and prompt assembly.

The user prompt carries a human-readable part (instruction or notification,
map summary) followed by a fenced JSON context block.  Live models read
either; the rule backend reads only the JSON block.
"""

from __future__ import annotations

import json
import re
from functools import lru_cache
from importlib import resources

PROMPT_VERSION = 1
TASKS = ("passage_cost", "event_ingest", "path_approval")

_TASK_RE = re.compile(r"^task:\s*(\w+)", re.MULTILINE)
_CONTEXT_RE = re.compile(r"Context \(JSON\):\s*```json\n(.*?)\n```", re.DOTALL)


@lru_cache(maxsize=None)
def load_template(task: str, version: int = PROMPT_VERSION) -> str:
    if task not in TASKS:
        raise KeyError(f"unknown prompt task {task!r}")
    return resources.files(__package__).joinpath("prompts", f"{task}_v{version}.txt").read_text(encoding="utf-8")


def build_user_prompt(heading: str, body: str, summary: str, payload: dict) -> str:
    ctx = json.dumps(payload, indent=1, sort_keys=True, ensure_ascii=False)
    return f"{heading}:\n{body}\n\nMap:\n{summary}\nContext (JSON):\n```json\n{ctx}\n```\n"


def task_of(system: str) -> str:
    m = _TASK_RE.search(system)
    if not m:
        raise ValueError("system prompt carries no task marker")
    return m.group(1)


def payload_of(user: str) -> dict:
    m = _CONTEXT_RE.search(user)
    if not m:
        raise ValueError("user prompt carries no JSON context block")
    return json.loads(m.group(1))
