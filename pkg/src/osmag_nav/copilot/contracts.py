"""Data types and JSON schemas exchanged with the chat backends."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime

WINDOW = 5

BOOL = {"type": "boolean"}
NAMES = {"type": "array", "items": {"type": "string", "minLength": 1}}
STAMP = {"type": ["string", "null"]}

SCHEMAS = {
    "passage_cost": {
        "type": "object",
        "required": ["destination_area", "costs"],
        "properties": {
            "destination_area": {"type": "string", "minLength": 1},
            "destination_level": {"type": ["integer", "null"]},
            "costs": {
                "type": "object",
                "propertyNames": {"pattern": "^[0-9]+$"},
                "additionalProperties": {"type": "number", "minimum": 0},
            },
            "rationale": {"type": "string"},
        },
        "additionalProperties": False,
    },
    "event_ingest": {
        "type": "object",
        "required": ["relevant", "areas_to_avoid", "areas_try_to_avoid"],
        "properties": {
            "relevant": BOOL,
            "areas_to_avoid": NAMES,
            "areas_try_to_avoid": NAMES,
            "start": STAMP,
            "end": STAMP,
            "reason": {"type": "string"},
            "unresolved": NAMES,
        },
        "additionalProperties": False,
    },
    "path_approval": {
        "type": "object",
        "required": ["is_valid", "areas_to_avoid", "areas_try_to_avoid"],
        "properties": {
            "is_valid": BOOL,
            "areas_to_avoid": NAMES,
            "areas_try_to_avoid": NAMES,
            "rationale": {"type": "string"},
            "unresolved": NAMES,
        },
        "additionalProperties": False,
    },
}

# fields holding area names, per schema; the normalizer resolves these against the map
NAME_LIST_FIELDS = {
    "passage_cost": (),
    "event_ingest": ("areas_to_avoid", "areas_try_to_avoid"),
    "path_approval": ("areas_to_avoid", "areas_try_to_avoid"),
}


class CopilotError(RuntimeError):
    pass


class NormalizationError(CopilotError):
    pass


class UnrepairableOutputError(CopilotError):
    def __init__(self, task: str, errors: list):
        super().__init__(f"{task}: backend output unusable after {len(errors)} attempts: {errors[-1]}")
        self.task = task
        self.errors = errors


@dataclass(frozen=True)
class PassageStats:
    successes: int = 0
    failures: int = 0
    last_outcomes: tuple = ()  # most recent last, True = success

    def __post_init__(self):
        if self.successes < 0 or self.failures < 0:
            raise ValueError("counts must be >= 0")
        if len(self.last_outcomes) > WINDOW:
            raise ValueError(f"outcome window holds at most {WINDOW} entries")

    def add(self, success: bool) -> "PassageStats":
        return PassageStats(
            self.successes + bool(success),
            self.failures + (not success),
            (self.last_outcomes + (bool(success),))[-WINDOW:],
        )

    def to_json(self) -> dict:
        return {
            "successes": self.successes,
            "failures": self.failures,
            "last_outcomes": ["success" if o else "failure" for o in self.last_outcomes],
        }


@dataclass
class ExperienceStats:
    passages: dict = field(default_factory=dict)  # passage id -> PassageStats

    def get(self, pid: int) -> PassageStats:
        return self.passages.get(pid, PassageStats())

    def record(self, pid: int, success: bool) -> None:
        self.passages[pid] = self.get(pid).add(success)

    def to_json(self) -> dict:
        return {str(pid): s.to_json() for pid, s in sorted(self.passages.items())}


@dataclass(frozen=True)
class RobotCapabilities:
    locomotion: str = "wheeled"
    can_open_handle_doors: bool = True
    usable_vertical_connectors: frozenset = frozenset({"elevator"})

    def __post_init__(self):
        if self.locomotion not in ("wheeled", "legged"):
            raise ValueError(f"unknown locomotion {self.locomotion!r}")
        object.__setattr__(self, "usable_vertical_connectors", frozenset(self.usable_vertical_connectors))
        unknown = self.usable_vertical_connectors - {"elevator", "stairs"}
        if unknown:
            raise ValueError(f"unknown vertical connectors {sorted(unknown)}")
        if self.locomotion == "wheeled" and "stairs" in self.usable_vertical_connectors:
            raise ValueError("a wheeled robot cannot use stairs")

    def allows(self, area_type: str) -> bool:
        if area_type in ("elevator", "stairs"):
            return area_type in self.usable_vertical_connectors
        return True

    def to_json(self) -> dict:
        return {
            "locomotion": self.locomotion,
            "can_open_handle_doors": self.can_open_handle_doors,
            "usable_vertical_connectors": sorted(self.usable_vertical_connectors),
        }


@dataclass(frozen=True)
class PassageCostMap:
    costs: dict  # passage id -> pc
    destination_area: int
    rationale: str = ""

    def __post_init__(self):
        for pid, pc in self.costs.items():
            if not (math.isfinite(pc) and pc >= 0):
                raise ValueError(f"passage {pid}: cost must be finite and >= 0, got {pc}")

    def get(self, pid: int, default: float = 0.0) -> float:
        return self.costs.get(pid, default)


@dataclass(frozen=True)
class EventRecord:
    id: str
    source_text: str
    areas_to_avoid: tuple
    areas_try_to_avoid: tuple
    start: datetime
    end: datetime
    reason: str = ""
    unresolved: tuple = ()

    def __post_init__(self):
        if self.start > self.end:
            raise ValueError(f"event {self.id}: start after end")
        if not (self.areas_to_avoid or self.areas_try_to_avoid):
            raise ValueError(f"event {self.id}: no areas")

    def active(self, now: datetime) -> bool:
        return self.start <= now <= self.end

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "source_text": self.source_text,
            "areas_to_avoid": list(self.areas_to_avoid),
            "areas_try_to_avoid": list(self.areas_try_to_avoid),
            "start": self.start.isoformat(),
            "end": self.end.isoformat(),
            "reason": self.reason,
            "unresolved": list(self.unresolved),
        }

    @classmethod
    def from_json(cls, d: dict) -> "EventRecord":
        return cls(
            id=d["id"],
            source_text=d["source_text"],
            areas_to_avoid=tuple(d.get("areas_to_avoid", ())),
            areas_try_to_avoid=tuple(d.get("areas_try_to_avoid", ())),
            start=datetime.fromisoformat(d["start"]),
            end=datetime.fromisoformat(d["end"]),
            reason=d.get("reason", ""),
            unresolved=tuple(d.get("unresolved", ())),
        )


@dataclass(frozen=True)
class ApprovalVerdict:
    is_valid: bool
    areas_to_avoid: tuple = ()  # area ids
    areas_try_to_avoid: tuple = ()
    rationale: str = ""
    overridden: bool = False

    def to_json(self) -> dict:
        return {
            "is_valid": self.is_valid,
            "areas_to_avoid": list(self.areas_to_avoid),
            "areas_try_to_avoid": list(self.areas_try_to_avoid),
            "rationale": self.rationale,
            "overridden": self.overridden,
        }
