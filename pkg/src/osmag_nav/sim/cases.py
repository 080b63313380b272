"""Benchmark case files (YAML): map, door states, notifications, instruction, trials."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from datetime import datetime

import yaml

from ..copilot.contracts import RobotCapabilities
from ..copilot.resolve import AreaResolver, ResolutionError
from ..mapmodel import LocalPoint, MapDocument, load_osmag
from ..planner import RobotPose
from .world import CLOSED, OPEN, WorldState

SECTIONS = ("map", "world", "notifications", "instruction", "trials", "restricted")


class CaseError(ValueError):
    pass


@dataclass(frozen=True)
class Notification:
    at: datetime
    text: str


@dataclass
class CaseSpec:
    name: str
    map_path: str
    doc: MapDocument
    world: WorldState
    notifications: list
    instruction: str
    destination: int
    trials: list  # RobotPose per trial
    now: datetime
    capabilities: RobotCapabilities = field(default_factory=RobotCapabilities)
    description: str = ""


def _stamp(value, what: str) -> datetime:
    if isinstance(value, datetime):
        return value
    try:
        return datetime.fromisoformat(str(value))
    except ValueError:
        raise CaseError(f"{what}: {value!r} is not an ISO-8601 timestamp") from None


def _areas(resolver: AreaResolver, doc: MapDocument, ref, what: str) -> list[int]:
    if isinstance(ref, int) and ref in doc.areas:
        return [ref]
    try:
        return resolver.ids(str(ref))
    except ResolutionError as exc:
        raise CaseError(f"{what}: {exc}") from None


def _area(resolver: AreaResolver, doc: MapDocument, ref, what: str, level=None) -> int:
    ids = _areas(resolver, doc, ref, what)
    if level is not None:
        ids = [i for i in ids if doc.areas[i].level == level]
    if len(ids) != 1:
        raise CaseError(f"{what}: {ref!r} names {len(ids)} areas")
    return ids[0]


def parse_case(data: dict, base_dir: str = ".", name: str = "case") -> CaseSpec:
    if not isinstance(data, dict):
        raise CaseError("case file must be a mapping")
    missing = [s for s in SECTIONS if s not in data]
    if missing:
        raise CaseError(f"case {name}: missing sections {missing}")
    map_path = os.path.normpath(os.path.join(base_dir, data["map"]))
    doc = load_osmag(map_path)
    resolver = AreaResolver(doc)

    world = data["world"] or {}
    doors = {}
    for state in (OPEN, CLOSED):
        for pid in world.get(state, []) or []:
            if pid in doors:
                raise CaseError(f"passage {pid} listed as both open and closed")
            doors[int(pid)] = state
    # a name shared across floors (an elevator shaft, say) restricts every floor
    restricted = frozenset(i for r in data["restricted"] or [] for i in _areas(resolver, doc, r, "restricted"))
    ws = WorldState(doors, restricted)
    try:
        ws.check(doc)
    except ValueError as exc:
        raise CaseError(str(exc)) from None

    notes = []
    for i, item in enumerate(data["notifications"] or []):
        if not isinstance(item, dict) or "text" not in item or "at" not in item:
            raise CaseError(f"notification {i}: needs 'at' and 'text'")
        notes.append(Notification(_stamp(item["at"], f"notification {i}"), str(item["text"])))

    trials = []
    for i, t in enumerate(data["trials"] or []):
        try:
            aid = _area(resolver, doc, t["area"], f"trial {i}", t.get("level"))
            pos = LocalPoint(float(t["x"]), float(t["y"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise CaseError(f"trial {i}: {exc}") from None
        trials.append(RobotPose(pos, aid, doc.areas[aid].level))
    if not trials:
        raise CaseError(f"case {name}: no trials")

    instruction = str(data["instruction"]).strip()
    if not instruction:
        raise CaseError("instruction must be nonempty")
    dest_ref = data.get("destination")
    if dest_ref is None:
        raise CaseError("case needs a destination check")
    destination = _area(resolver, doc, dest_ref, "destination", data.get("destination_level"))

    caps_data = data.get("capabilities") or {}
    try:
        caps = RobotCapabilities(
            caps_data.get("locomotion", "wheeled"),
            bool(caps_data.get("can_open_handle_doors", True)),
            frozenset(caps_data.get("usable_vertical_connectors", ["elevator"])),
        )
    except ValueError as exc:
        raise CaseError(str(exc)) from None
    now = _stamp(data.get("now", notes[-1].at if notes else "2024-01-01T12:00:00"), "now")
    return CaseSpec(
        name=str(data.get("name", name)),
        map_path=map_path,
        doc=doc,
        world=ws,
        notifications=notes,
        instruction=instruction,
        destination=destination,
        trials=trials,
        now=now,
        capabilities=caps,
        description=str(data.get("description", "")),
    )


def load_case(path) -> CaseSpec:
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise CaseError(f"{path}: {exc}") from None
    stem = os.path.splitext(os.path.basename(str(path)))[0]
    return parse_case(data, os.path.dirname(os.path.abspath(path)), stem)
