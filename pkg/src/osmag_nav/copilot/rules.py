"""Deterministic rule backend: answers the three copilot prompts without a model.

It reads the JSON context block of the prompt and applies fixed keyword,
set-intersection and pricing rules, so the whole stack runs offline and
tests are reproducible.
"""

from __future__ import annotations

import json
import re
from datetime import datetime, time, timedelta

from .prompts import payload_of, task_of

BASE_COST = {"open": 0.0, "automatic": 0.0, "handle": 5.0, "elevator_door": 10.0}
FAILURE_WEIGHT = 100.0
STUBBORN_RUN = 3
STUBBORN_COST = 1000.0
CAPABILITY_COST = 1000.0

DISRUPTION_RE = re.compile(
    r"\b(maintenance|maintained|clos(?:ed|ure|ing)|renovat\w*|construction|repair\w*|drills?|part(?:y|ies)"
    r"|ceremon(?:y|ies)|celebration|graduation|blocked|out of (?:service|order)|upgrad\w*"
    r"|install\w*|cleaning|inspection|restricted|no entry|do not enter|inaccessible|evacuat\w*"
    r"|shut\w*|spill\w*|wet floor|exams?|examination|conference|fair|painting|disinfect\w*|fumigat\w*"
    r"|off[- ]limits|cordoned|leak\w*)\b",
    re.IGNORECASE,
)
SECTOR_RE = re.compile(r"\b([A-Z])[ \-]?[Ss]ector\b|\b[Ss]ector ([A-Z])\b")
ROOM_RE = re.compile(r"\b([A-Z]\d{3})\b")
RANGE_RE = re.compile(
    r"\b(\d{1,2})(?::(\d{2}))?\s*(am|pm)?\s*(?:-|–|—|to|until)\s*(\d{1,2})(?::(\d{2}))?\s*(am|pm)?\b",
    re.IGNORECASE,
)
DATE_RE = re.compile(r"\b(\d{4}-\d{2}-\d{2})\b")
WEEKDAYS = ("mon", "tue", "wed", "thu", "fri", "sat", "sun")
WEEKDAY_RE = re.compile(r"\b(mon|tue|wed|thu|fri|sat|sun)[a-z]*\b", re.IGNORECASE)
LEVEL_WORDS = {"ground": 1, "first": 1, "second": 2, "third": 3, "fourth": 4, "fifth": 5}
LEVEL_RE = re.compile(
    r"\b(?:level|floor|L)\s*(\d+)\b|\b(\d+)(?:st|nd|rd|th)\s+floor\b|\b(ground|first|second|third|fourth|fifth)\s+floor\b",
    re.IGNORECASE,
)


# --------------------------------------------------------------------------
# passage pricing


def rule_passage_cost(door_type: str, stats: dict | None = None, allowed: bool = True) -> float:
    """Price of one passage from its door type and recorded outcomes."""
    if not allowed:
        return CAPABILITY_COST
    stats = stats or {}
    s = int(stats.get("successes", 0))
    f = int(stats.get("failures", 0))
    recent = list(stats.get("last_outcomes", ()))[-STUBBORN_RUN:]
    if len(recent) == STUBBORN_RUN and all(o == "failure" for o in recent):
        return STUBBORN_COST
    return BASE_COST.get(door_type, 0.0) + FAILURE_WEIGHT * f / (s + f + 1)


def _find_names(text: str, names) -> list[tuple[int, str]]:
    """Whole-word, case-insensitive occurrences; longer names claim their span first."""
    hits = []
    taken = [False] * len(text)
    for name in sorted(set(names), key=lambda n: (-len(n), n)):
        for m in re.finditer(r"(?<!\w)" + re.escape(name) + r"(?!\w)", text, re.IGNORECASE):
            if any(taken[m.start() : m.end()]):
                continue
            for k in range(m.start(), m.end()):
                taken[k] = True
            hits.append((m.start(), name))
    return sorted(hits)


def _destination(instruction: str, areas: list[dict]) -> tuple[str, int | None]:
    by_name = {a["name"]: a["name"] for a in areas}
    by_ref = {r: a["name"] for a in areas for r in a.get("refs", ())}
    hits = _find_names(instruction, list(by_name) + list(by_ref))
    level = None
    m = LEVEL_RE.search(instruction)
    if m:
        level = int(m.group(1) or m.group(2)) if (m.group(1) or m.group(2)) else LEVEL_WORDS[m.group(3).lower()]
    if hits:
        # longest mention wins; among equals, the last one (destinations tend to come last)
        pos, key = max(hits, key=lambda h: (len(h[1]), h[0]))
        return by_name.get(key) or by_ref[key], level
    m = re.search(r"\bto\s+(?:the\s+)?([^.,;!?]+)", instruction, re.IGNORECASE)
    phrase = m.group(1).strip() if m else instruction.strip()
    return phrase, level


def answer_passage_cost(payload: dict) -> dict:
    caps = payload.get("capabilities", {})
    usable = set(caps.get("usable_vertical_connectors", ()))
    handles = caps.get("can_open_handle_doors", True)
    exp = payload.get("experience", {})
    costs = {}
    for p in payload["passages"]:
        allowed = all(t not in ("elevator", "stairs") or t in usable for t in p.get("area_types", ()))
        if p["door_type"] == "handle" and not handles:
            allowed = False
        costs[str(p["id"])] = rule_passage_cost(p["door_type"], exp.get(str(p["id"])), allowed)
    dest, level = _destination(payload["instruction"], payload["areas"])
    return {
        "destination_area": dest,
        "destination_level": level,
        "costs": costs,
        "rationale": "door-type base cost plus failure-rate penalty; repeated recent failures priced prohibitively",
    }


# --------------------------------------------------------------------------
# notifications


def _clock(h: str, m: str | None, ampm: str | None) -> time:
    hour, minute = int(h), int(m or 0)
    if ampm:
        hour = hour % 12 + (12 if ampm.lower() == "pm" else 0)
    if hour == 24 and minute == 0:
        return time(23, 59, 59)
    return time(hour, minute)


def event_window(text: str, now: datetime) -> tuple[datetime, datetime]:
    """Time window stated in a notification, read relative to ``now``."""
    low = text.lower()
    dates = [datetime.fromisoformat(d).date() for d in DATE_RE.findall(text)]
    if dates:
        first, last = min(dates), max(dates)
    else:
        day = now.date()
        wd = WEEKDAY_RE.search(text)
        if "tomorrow" in low:
            day = day + timedelta(days=1)
        elif wd:
            target = WEEKDAYS.index(wd.group(1).lower())
            day = day + timedelta(days=(target - day.weekday()) % 7)
        first = last = day
    m = RANGE_RE.search(DATE_RE.sub(" ", text))
    if m and (m.group(2) or m.group(3) or m.group(5) or m.group(6)):
        t0 = _clock(m.group(1), m.group(2), m.group(3) or m.group(6))
        t1 = _clock(m.group(4), m.group(5), m.group(6))
        start, end = datetime.combine(first, t0), datetime.combine(last, t1)
        if end < start:
            end += timedelta(days=1)
    elif "tonight" in low:
        start, end = datetime.combine(first, time(18, 0)), datetime.combine(last, time(23, 59, 59))
    else:
        start, end = datetime.combine(first, time(0, 0)), datetime.combine(last, time(23, 59, 59))
    if "until further notice" in low:
        start = min(start, now)
        end = start + timedelta(days=365)
    return start, end


def mentioned_areas(text: str, areas: list[dict]) -> tuple[list[str], list[str]]:
    """Area names referenced by a notification, and the sector letters it names."""
    names = [a["name"] for a in areas]
    out = [n for _, n in _find_names(text, names)]
    for ref in ROOM_RE.findall(text):
        for a in areas:
            if ref in a.get("refs", ()) and a["name"] not in out:
                out.append(a["name"])
    sectors = []
    for m in SECTOR_RE.finditer(text):
        letter = m.group(1) or m.group(2)
        if letter not in sectors and any(a.get("sector") == letter for a in areas):
            sectors.append(letter)
    for letter in sectors:
        for a in areas:
            if a.get("sector") == letter and a["name"] not in out:
                out.append(a["name"])
    return out, sectors


def answer_event(payload: dict) -> dict:
    text = payload["notification"]
    now = datetime.fromisoformat(payload["now"])
    areas = payload["areas"]
    avoid, sectors = mentioned_areas(text, areas)
    disruption = DISRUPTION_RE.search(text)
    if not (avoid and disruption):
        why = "no map area mentioned" if not avoid else "no disruption described"
        return {"relevant": False, "areas_to_avoid": [], "areas_try_to_avoid": [], "start": None, "end": None, "reason": why}
    types = {a["name"]: a["type"] for a in areas}
    in_sector = {a["name"] for a in areas if a.get("sector") in sectors}
    adjacency = payload.get("adjacency", {})
    soft = []
    for name in sorted(in_sector):
        for nb in adjacency.get(name, ()):
            if types.get(nb) == "corridor" and nb not in in_sector and nb not in avoid and nb not in soft:
                soft.append(nb)
    start, end = event_window(text, now)
    return {
        "relevant": True,
        "areas_to_avoid": avoid,
        "areas_try_to_avoid": sorted(soft),
        "start": start.isoformat(),
        "end": end.isoformat(),
        "reason": disruption.group(0).lower(),
    }


# --------------------------------------------------------------------------
# path approval


def answer_approval(payload: dict) -> dict:
    caps = payload.get("capabilities", {})
    usable = set(caps.get("usable_vertical_connectors", ("elevator",)))
    events = payload.get("events", [])
    hard = []
    soft = []
    for ev in events:
        hard += [n for n in ev.get("areas_to_avoid", ()) if n not in hard]
        soft += [n for n in ev.get("areas_try_to_avoid", ()) if n not in soft]
    hard_fold = {n.casefold() for n in hard}
    blocked_by_event = [a["name"] for a in payload["path"] if a["name"].casefold() in hard_fold]
    blocked_by_caps = [
        a["name"] for a in payload["path"] if a["type"] in ("elevator", "stairs") and a["type"] not in usable
    ]
    if not (blocked_by_event or blocked_by_caps):
        return {"is_valid": True, "areas_to_avoid": [], "areas_try_to_avoid": soft, "rationale": "no active event or capability conflict on the path"}
    avoid = list(hard)
    for n in blocked_by_caps:
        if n not in avoid:
            avoid.append(n)
    parts = []
    if blocked_by_event:
        parts.append("path enters " + ", ".join(dict.fromkeys(blocked_by_event)) + " during an active event")
    if blocked_by_caps:
        parts.append("robot cannot use " + ", ".join(dict.fromkeys(blocked_by_caps)))
    return {"is_valid": False, "areas_to_avoid": avoid, "areas_try_to_avoid": [n for n in soft if n not in avoid], "rationale": "; ".join(parts)}


ANSWERS = {"passage_cost": answer_passage_cost, "event_ingest": answer_event, "path_approval": answer_approval}


class RuleBackend:
    name = "rule"
    model = "rules-v1"

    def complete(self, system: str, user: str) -> str:
        answer = ANSWERS[task_of(system)](payload_of(user))
        return json.dumps(answer, sort_keys=True)
