"""Event tracking from notifications and path approval against active events."""

from __future__ import annotations

import hashlib
import json
import logging
import os
from dataclasses import dataclass, field
from datetime import datetime, time

from ..mapmodel import MapDocument, map_summary
from .contracts import ApprovalVerdict, EventRecord, RobotCapabilities, UnrepairableOutputError
from .evaluator import adjacency_payload, areas_payload
from .normalize import call_structured
from .prompts import build_user_prompt, load_template
from .resolve import AreaResolver
from .rules import RuleBackend

log = logging.getLogger(__name__)


@dataclass
class EventStore:
    records: list = field(default_factory=list)

    def add(self, record: EventRecord) -> None:
        if any(r.id == record.id for r in self.records):
            return
        self.records.append(record)

    def active(self, now: datetime) -> list[EventRecord]:
        return [r for r in self.records if r.active(now)]

    def __len__(self) -> int:
        return len(self.records)

    def to_json(self) -> list:
        return [r.to_json() for r in self.records]

    def save(self, path) -> None:
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, indent=2, sort_keys=True, ensure_ascii=False)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "EventStore":
        if not os.path.exists(path):
            return cls()
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        if not isinstance(data, list):
            raise ValueError(f"{path}: event store must be a JSON array")
        return cls([EventRecord.from_json(d) for d in data])


def expire_events(store: EventStore, now: datetime) -> EventStore:
    return EventStore([r for r in store.records if r.end >= now])


def _event_id(text: str, start: datetime) -> str:
    return "evt-" + hashlib.sha1(f"{text}|{start.isoformat()}".encode("utf-8")).hexdigest()[:10]


def ingest_notification(
    backend,
    text: str,
    now: datetime,
    doc: MapDocument,
    store: EventStore | None = None,
    resolver: AreaResolver | None = None,
) -> EventRecord | None:
    """Record a navigation-relevant notification; ``None`` for irrelevant ones."""
    if not text.strip():
        raise ValueError("notification text must be nonempty")
    resolver = resolver or AreaResolver(doc)
    payload = {
        "notification": text,
        "now": now.isoformat(),
        "areas": areas_payload(doc),
        "adjacency": adjacency_payload(doc),
    }
    user = build_user_prompt("Notification", text, map_summary(doc), payload)
    out = call_structured(backend, load_template("event_ingest"), user, "event_ingest", resolver)
    if not out["relevant"]:
        return None
    unresolved = tuple(out.get("unresolved", ()))
    avoid = tuple(out["areas_to_avoid"])
    if not avoid and not out["areas_try_to_avoid"]:
        if not unresolved:
            log.info("relevant notification without areas ignored: %r", text)
            return None
        avoid = unresolved  # kept verbatim and flagged
    start = datetime.fromisoformat(out["start"]) if out.get("start") else datetime.combine(now.date(), time(0, 0))
    end = datetime.fromisoformat(out["end"]) if out.get("end") else datetime.combine(start.date(), time(23, 59, 59))
    start, end = start.replace(tzinfo=None), end.replace(tzinfo=None)
    if end < start:
        end = start
    record = EventRecord(
        id=_event_id(text, start),
        source_text=text,
        areas_to_avoid=avoid,
        areas_try_to_avoid=tuple(out["areas_try_to_avoid"]),
        start=start,
        end=end,
        reason=out.get("reason", ""),
        unresolved=unresolved,
    )
    if store is not None:
        store.add(record)
    return record


def approve_path(
    backend,
    path_areas: list[int],
    store: EventStore | None,
    now: datetime,
    caps: RobotCapabilities,
    doc: MapDocument,
    resolver: AreaResolver | None = None,
) -> ApprovalVerdict:
    """Ask the backend whether a planned area sequence is acceptable.

    The reply is checked against the events and capabilities themselves: a
    verdict that lets the path through a blocked area is overridden, and a
    rejection that names no area on the path does not block it.
    """
    if not path_areas:
        raise ValueError("path_areas must be nonempty")
    resolver = resolver or AreaResolver(doc)
    active = store.active(now) if store is not None else []
    areas = [doc.areas[a] for a in path_areas]
    payload = {
        "path": [{"name": a.name, "type": a.area_type, "level": a.level} for a in areas],
        "events": [
            {"areas_to_avoid": list(r.areas_to_avoid), "areas_try_to_avoid": list(r.areas_try_to_avoid), "reason": r.reason}
            for r in active
        ],
        "capabilities": caps.to_json(),
        "now": now.isoformat(),
    }
    body = " -> ".join(f"{a.name} (L{a.level})" for a in areas)
    user = build_user_prompt("Planned path", body, map_summary(doc), payload)
    system = load_template("path_approval")
    try:
        out = call_structured(backend, system, user, "path_approval", resolver)
    except UnrepairableOutputError as exc:
        log.warning("approval falls back to rules: %s", exc)
        out = call_structured(RuleBackend(), system, user, "path_approval", resolver)

    on_path = set(path_areas)
    said_avoid = resolver.ids_for_names(out["areas_to_avoid"])
    said_soft = resolver.ids_for_names(out["areas_try_to_avoid"])
    event_avoid = resolver.ids_for_names(n for r in active for n in r.areas_to_avoid)
    event_soft = resolver.ids_for_names(n for r in active for n in r.areas_try_to_avoid)
    cap_block = {a.id for a in areas if not caps.allows(a.area_type)}
    truth = (event_avoid & on_path) | cap_block

    avoid = set(said_avoid)
    overridden = False
    if truth and not (said_avoid & on_path):
        overridden = True
        avoid |= event_avoid | cap_block
    is_valid = not (avoid & on_path)
    if out["is_valid"] != is_valid:
        overridden = True
    rationale = out.get("rationale", "")
    if overridden:
        rationale = (rationale + " [verdict adjusted by event and capability check]").strip()
    soft = (said_soft | event_soft) - avoid
    return ApprovalVerdict(is_valid, tuple(sorted(avoid)), tuple(sorted(soft)), rationale, overridden)


class EventMonitor:
    """Approval adapter for the planner loop, bound to one map and robot."""

    def __init__(self, backend, doc: MapDocument, caps: RobotCapabilities | None = None, resolver=None):
        self.backend = backend
        self.doc = doc
        self.caps = caps or RobotCapabilities()
        self.resolver = resolver or AreaResolver(doc)

    def ingest(self, text: str, now: datetime, store: EventStore) -> EventRecord | None:
        return ingest_notification(self.backend, text, now, self.doc, store, self.resolver)

    def approve_path(self, path_areas, store, now) -> ApprovalVerdict:
        return approve_path(self.backend, list(path_areas), store, now, self.caps, self.doc, self.resolver)
