"""Simulated world state, experience ledger and trial results."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from datetime import datetime, timedelta

from ..copilot.contracts import ExperienceStats
from ..mapmodel import MapDocument

OPEN = "open"
CLOSED = "closed"


@dataclass(frozen=True)
class WorldState:
    door_state: dict  # passage id -> "open" | "closed"; unlisted passages are open
    restricted_truth: frozenset = frozenset()

    def __post_init__(self):
        for pid, state in self.door_state.items():
            if state not in (OPEN, CLOSED):
                raise ValueError(f"passage {pid}: door state must be open or closed, got {state!r}")

    def check(self, doc: MapDocument) -> None:
        for pid in self.door_state:
            if pid not in doc.passages:
                raise ValueError(f"door state given for unknown passage {pid}")
        for aid in self.restricted_truth:
            if aid not in doc.areas:
                raise ValueError(f"restricted area {aid} is not on the map")

    def is_open(self, pid: int) -> bool:
        return self.door_state.get(pid, OPEN) == OPEN

    @property
    def closed(self) -> frozenset:
        return frozenset(p for p, s in self.door_state.items() if s == CLOSED)


class ExperienceLedger:
    """Append-only record of passage traversal attempts."""

    def __init__(self, clock: datetime | None = None):
        self.records: list[dict] = []
        self._clock = clock or datetime(2024, 1, 1)

    def append(self, task: str, passage: int, success: bool) -> dict:
        # one simulated second per record keeps timestamps unique and ordered
        ts = self._clock + timedelta(seconds=len(self.records))
        rec = {"ts": ts.isoformat(), "task": task, "passage": int(passage), "outcome": "success" if success else "failure"}
        self.records.append(rec)
        return rec

    def stats(self) -> ExperienceStats:
        out = ExperienceStats()
        for r in self.records:
            out.record(r["passage"], r["outcome"] == "success")
        return out

    def attempts(self, passage: int) -> int:
        return sum(1 for r in self.records if r["passage"] == passage)

    def save(self, path) -> None:
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            for r in self.records:
                fh.write(json.dumps(r, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "ExperienceLedger":
        led = cls()
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    r = json.loads(line)
                    if r.get("outcome") not in ("success", "failure"):
                        raise ValueError(f"bad ledger record {line.strip()!r}")
                    led.records.append(r)
        return led


@dataclass
class TrialResult:
    config: str
    trial: int
    traveled_length: float
    restricted_entries: int
    replans: int
    reached: bool
    final_area: int
    trace: list = field(default_factory=list)  # plans / approval rounds, JSON-ready
    path: list = field(default_factory=list)  # [(level, [(x, y), ...]), ...] executed polylines

    def row(self) -> dict:
        return {
            "trial": self.trial,
            "traveled_m": f"{self.traveled_length:.3f}",
            "restricted_entries": self.restricted_entries,
            "replans": self.replans,
            "reached": int(self.reached),
        }
