"""Passage cost evaluation: destination lookup plus per-passage pricing."""

from __future__ import annotations

import logging

from ..mapmodel import MapDocument, map_summary
from .contracts import ExperienceStats, PassageCostMap, RobotCapabilities
from .normalize import call_structured
from .prompts import build_user_prompt, load_template
from .resolve import AreaResolver, ResolutionError, area_refs, area_sector

log = logging.getLogger(__name__)


def areas_payload(doc: MapDocument) -> list[dict]:
    out = []
    for a in sorted(doc.areas.values(), key=lambda a: (a.level, a.name, a.id)):
        out.append({"name": a.name, "type": a.area_type, "level": a.level, "refs": area_refs(a), "sector": area_sector(a)})
    return out


def adjacency_payload(doc: MapDocument) -> dict:
    adj: dict[str, set] = {}
    for p in doc.passages.values():
        a, b = doc.areas[p.area_a].name, doc.areas[p.area_b].name
        if a != b:
            adj.setdefault(a, set()).add(b)
            adj.setdefault(b, set()).add(a)
    return {k: sorted(v) for k, v in sorted(adj.items())}


def passages_payload(doc: MapDocument) -> list[dict]:
    out = []
    for pid in sorted(doc.passages):
        p = doc.passages[pid]
        ends = [doc.areas[p.area_a], doc.areas[p.area_b]]
        out.append({
            "id": pid,
            "door_type": p.door_type,
            "areas": [e.name for e in ends],
            "area_types": [e.area_type for e in ends],
            "levels": [e.level for e in ends],
        })
    return out


def _pick_destination(doc: MapDocument, resolver: AreaResolver, name: str, level) -> int:
    ids = resolver.ids(name)
    if level is not None and len(ids) > 1:
        on_level = [i for i in ids if doc.areas[i].level == level]
        ids = on_level or ids
    if len(ids) != 1:
        labels = [f"{doc.areas[i].name} (L{doc.areas[i].level})" for i in ids]
        raise ResolutionError(name, labels)
    return ids[0]


def evaluate_passages(
    backend,
    instruction: str,
    doc: MapDocument,
    stats: ExperienceStats | None = None,
    caps: RobotCapabilities | None = None,
    resolver: AreaResolver | None = None,
) -> PassageCostMap:
    if not instruction.strip():
        raise ValueError("instruction must be nonempty")
    stats = stats or ExperienceStats()
    caps = caps or RobotCapabilities()
    resolver = resolver or AreaResolver(doc)
    payload = {
        "instruction": instruction,
        "areas": areas_payload(doc),
        "passages": passages_payload(doc),
        "experience": stats.to_json(),
        "capabilities": caps.to_json(),
    }
    user = build_user_prompt("Instruction", instruction, map_summary(doc), payload)
    out = call_structured(backend, load_template("passage_cost"), user, "passage_cost", resolver)
    dest = _pick_destination(doc, resolver, out["destination_area"], out.get("destination_level"))
    costs = {}
    for key, pc in out["costs"].items():
        pid = int(key)
        if pid not in doc.passages:
            log.warning("ignoring cost for unknown passage %s", key)
            continue
        costs[pid] = float(pc)
    return PassageCostMap(costs, dest, out.get("rationale", ""))
