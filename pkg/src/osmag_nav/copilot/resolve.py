"""Resolve free-text area references (names, room numbers, sectors) to map areas."""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..mapmodel import MapDocument

FUZZY_THRESHOLD = 0.85

_SECTOR_RE = re.compile(r"^(?:sector\s+([A-Za-z])|([A-Za-z])[\s\-]*sector)$", re.IGNORECASE)
_SECTOR_NAME_RE = re.compile(r"^([A-Z])(?=[\s\d\-])")
_ROOM_PREFIX_RE = re.compile(r"^(?:the\s+)?(?:(?:room|rm\.?|no\.?)\s*)?", re.IGNORECASE)


class ResolutionError(LookupError):
    def __init__(self, name: str, candidates: list[str]):
        hint = f"; closest: {', '.join(candidates)}" if candidates else ""
        super().__init__(f"cannot resolve area {name!r}{hint}")
        self.name = name
        self.candidates = candidates


def edit_similarity(a: str, b: str) -> float:
    """1 - Levenshtein(a, b) / max(len(a), len(b))."""
    if a == b:
        return 1.0
    if not a or not b:
        return 0.0
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return 1.0 - prev[-1] / max(len(a), len(b))


def area_sector(area) -> str | None:
    tagged = area.tag("osmAG:sector")
    if tagged:
        return tagged.upper()
    m = _SECTOR_NAME_RE.match(area.name)
    return m.group(1) if m else None


def area_refs(area) -> list[str]:
    ref = area.tag("ref")
    return [r.strip() for r in ref.split(";") if r.strip()] if ref else []


@dataclass(frozen=True)
class Resolution:
    ids: tuple
    how: str  # exact | casefold | room | sector | fuzzy


class AreaResolver:
    """Name resolution: exact, case-insensitive, room number, sector, fuzzy."""

    def __init__(self, doc: MapDocument):
        self.doc = doc
        self._by_name: dict[str, list[int]] = {}
        self._by_fold: dict[str, list[int]] = {}
        self._by_ref: dict[str, list[int]] = {}
        self._by_sector: dict[str, list[int]] = {}
        for a in sorted(doc.areas.values(), key=lambda a: (a.level, a.name, a.id)):
            self._by_name.setdefault(a.name, []).append(a.id)
            self._by_fold.setdefault(a.name.casefold(), []).append(a.id)
            for r in area_refs(a):
                self._by_ref.setdefault(r.casefold(), []).append(a.id)
            s = area_sector(a)
            if s:
                self._by_sector.setdefault(s, []).append(a.id)

    @property
    def sectors(self) -> list[str]:
        return sorted(self._by_sector)

    def sector_areas(self, letter: str) -> list[int]:
        return list(self._by_sector.get(letter.upper(), []))

    def resolve(self, text: str) -> Resolution:
        name = " ".join(str(text).split())
        if name in self._by_name:
            return Resolution(tuple(self._by_name[name]), "exact")
        folded = name.casefold()
        if folded in self._by_fold:
            return Resolution(tuple(self._by_fold[folded]), "casefold")
        bare = _ROOM_PREFIX_RE.sub("", name).casefold()
        if bare in self._by_fold:
            return Resolution(tuple(self._by_fold[bare]), "casefold")
        if bare in self._by_ref:
            return Resolution(tuple(self._by_ref[bare]), "room")
        m = _SECTOR_RE.match(name)
        if m:
            letter = (m.group(1) or m.group(2)).upper()
            if letter in self._by_sector:
                return Resolution(tuple(self._by_sector[letter]), "sector")
        scored = sorted(((edit_similarity(folded, k), k) for k in self._by_fold), key=lambda t: (-t[0], t[1]))
        if scored and scored[0][0] >= FUZZY_THRESHOLD:
            if len(scored) < 2 or scored[1][0] < scored[0][0]:
                return Resolution(tuple(self._by_fold[scored[0][1]]), "fuzzy")
        candidates = [self.doc.areas[self._by_fold[k][0]].name for _, k in scored[:3]]
        raise ResolutionError(name, candidates)

    def ids(self, text: str) -> list[int]:
        return list(self.resolve(text).ids)

    def names(self, text: str) -> list[str]:
        out = []
        for aid in self.resolve(text).ids:
            n = self.doc.areas[aid].name
            if n not in out:
                out.append(n)
        return out

    def ids_for_names(self, names) -> set[int]:
        out: set[int] = set()
        for n in names:
            try:
                out.update(self.resolve(n).ids)
            except ResolutionError:
                pass
        return out
