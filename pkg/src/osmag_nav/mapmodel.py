"""osmAG map documents: parsing, validation, serialization and projection.

An osmAG file is an OSM XML v0.6 document.  Areas are closed ways tagged
``osmAG:type=area``; passages are two-node ways tagged ``osmAG:type=passage``
that sit on the wall shared by two areas.
"""

from __future__ import annotations

import hashlib
import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from typing import Iterable, Mapping

EARTH_RADIUS = 6371000.0
MAX_EXTENT_M = 10_000.0

AREA_TYPES = ("room", "corridor", "lobby", "elevator", "stairs")
DOOR_TYPES = ("open", "automatic", "handle", "elevator_door")
VERTICAL_TYPES = ("elevator", "stairs")

AREA_KEYS = ("osmAG:type", "osmAG:areaType", "name", "level", "osmAG:parent")
PASSAGE_KEYS = ("osmAG:type", "osmAG:from", "osmAG:to", "osmAG:doorType")

TYPE_LABELS = {
    "room": "Room",
    "corridor": "Corridor",
    "lobby": "Lobby",
    "elevator": "Elevator",
    "stairs": "Stairs",
}
DOOR_LABELS = {
    "open": "open passage",
    "automatic": "automatic door",
    "handle": "handle door",
    "elevator_door": "elevator door",
}


class MapError(ValueError):
    """Raised for malformed osmAG input; ``element_id`` names the culprit."""

    def __init__(self, message: str, element_id=None):
        super().__init__(message if element_id is None else f"{message} (element {element_id})")
        self.element_id = element_id


Tags = tuple  # tuple[tuple[str, str], ...], sorted by key


@dataclass(frozen=True)
class GeoNode:
    id: int
    lat: float
    lon: float
    tags: Tags = ()


@dataclass(frozen=True)
class Area:
    id: int
    name: str
    area_type: str
    level: int
    polygon: tuple
    parent: int | None = None
    tags: Tags = ()

    def tag(self, key: str, default=None):
        return dict(self.tags).get(key, default)


@dataclass(frozen=True)
class Passage:
    id: int
    area_a: int
    area_b: int
    segment: tuple
    door_type: str
    level_a: int
    level_b: int
    tags: Tags = ()

    @property
    def areas(self) -> tuple:
        return (self.area_a, self.area_b)

    def other(self, area_id: int) -> int:
        return self.area_b if area_id == self.area_a else self.area_a


@dataclass(frozen=True)
class OtherWay:
    """A way that is neither area nor passage, kept verbatim for round trips."""

    id: int
    refs: tuple
    tags: Tags = ()


@dataclass(frozen=True)
class MapDocument:
    nodes: Mapping[int, GeoNode]
    areas: Mapping[int, Area]
    passages: Mapping[int, Passage]
    origin: tuple  # (lat, lon)
    other_ways: Mapping[int, OtherWay] = field(default_factory=dict)
    attrs: Tags = ()

    def area_by_name(self, name: str, level: int | None = None) -> Area:
        hits = [a for a in self.areas.values() if a.name == name and (level is None or a.level == level)]
        if len(hits) != 1:
            raise KeyError(f"area name {name!r} matches {len(hits)} areas")
        return hits[0]

    def passages_of(self, area_id: int) -> list[Passage]:
        return sorted((p for p in self.passages.values() if area_id in p.areas), key=lambda p: p.id)

    def levels(self) -> list[int]:
        return sorted({a.level for a in self.areas.values()})


@dataclass(frozen=True)
class Violation:
    rule: str
    element_id: int
    message: str

    def __str__(self) -> str:
        return f"{self.rule}\t{self.element_id}\t{self.message}"


# --------------------------------------------------------------------------
# parsing


def _sorted_tags(items: Iterable[tuple[str, str]]) -> Tags:
    return tuple(sorted(items))


def _int(value: str, what: str, element_id) -> int:
    try:
        return int(value)
    except (TypeError, ValueError):
        raise MapError(f"malformed integer for {what}: {value!r}", element_id) from None


def _signed_area_ll(coords: list[tuple[float, float]]) -> float:
    s = 0.0
    for (x0, y0), (x1, y1) in zip(coords, coords[1:]):
        s += x0 * y1 - x1 * y0
    return 0.5 * s


def parse_osmag(xml_text: str) -> MapDocument:
    try:
        root = ET.fromstring(xml_text)
    except ET.ParseError as exc:
        line, col = exc.position
        raise MapError(f"XML syntax error at line {line}, column {col}: {exc}") from None
    if root.tag != "osm":
        raise MapError(f"root element must be <osm>, got <{root.tag}>")

    nodes: dict[int, GeoNode] = {}
    for el in root.iter("node"):
        nid = _int(el.get("id"), "node id", el.get("id"))
        if nid in nodes:
            raise MapError("duplicate node id", nid)
        try:
            lat, lon = float(el.get("lat")), float(el.get("lon"))
        except (TypeError, ValueError):
            raise MapError("node lacks numeric lat/lon", nid) from None
        tags = _sorted_tags((t.get("k"), t.get("v")) for t in el.iter("tag"))
        nodes[nid] = GeoNode(nid, lat, lon, tags)

    raw_ways = []
    for el in root.iter("way"):
        wid = _int(el.get("id"), "way id", el.get("id"))
        refs = tuple(_int(nd.get("ref"), "nd ref", wid) for nd in el.iter("nd"))
        for r in refs:
            if r not in nodes:
                raise MapError(f"dangling node reference {r}", wid)
        tags = {t.get("k"): t.get("v") for t in el.iter("tag")}
        raw_ways.append((wid, refs, tags))

    ids = [w[0] for w in raw_ways]
    if len(ids) != len(set(ids)):
        raise MapError("duplicate way id")

    origin_nodes = [n for n in nodes.values() if dict(n.tags).get("osmAG:origin") == "yes"]
    if origin_nodes:
        o = origin_nodes[0]
        origin = (o.lat, o.lon)
    elif nodes:
        o = nodes[min(nodes)]
        origin = (o.lat, o.lon)
    else:
        origin = (0.0, 0.0)

    areas: dict[int, Area] = {}
    for wid, refs, tags in raw_ways:
        if tags.get("osmAG:type") != "area":
            continue
        for key in ("name", "osmAG:areaType", "level"):
            if key not in tags:
                raise MapError(f"area missing mandatory tag {key!r}", wid)
        polygon = refs
        if len(refs) >= 4 and refs[0] == refs[-1]:
            if _signed_area_ll([_local_xy(nodes[r], origin) for r in refs]) < 0:
                polygon = tuple(reversed(refs))
        parent = tags.get("osmAG:parent")
        areas[wid] = Area(
            id=wid,
            name=tags["name"],
            area_type=tags["osmAG:areaType"],
            level=_int(tags["level"], "level", wid),
            polygon=polygon,
            parent=None if parent is None else _int(parent, "osmAG:parent", wid),
            tags=_sorted_tags((k, v) for k, v in tags.items() if k not in AREA_KEYS),
        )
    for a in areas.values():
        if a.parent is not None and a.parent not in areas:
            raise MapError(f"dangling parent reference {a.parent}", a.id)

    passages: dict[int, Passage] = {}
    others: dict[int, OtherWay] = {}
    for wid, refs, tags in raw_ways:
        kind = tags.get("osmAG:type")
        if kind == "area":
            continue
        if kind != "passage":
            others[wid] = OtherWay(wid, refs, _sorted_tags(tags.items()))
            continue
        for key in ("osmAG:from", "osmAG:to", "osmAG:doorType"):
            if key not in tags:
                raise MapError(f"passage missing mandatory tag {key!r}", wid)
        a = _int(tags["osmAG:from"], "osmAG:from", wid)
        b = _int(tags["osmAG:to"], "osmAG:to", wid)
        for x in (a, b):
            if x not in areas:
                raise MapError(f"dangling area reference {x}", wid)
        passages[wid] = Passage(
            id=wid,
            area_a=a,
            area_b=b,
            segment=refs,
            door_type=tags["osmAG:doorType"],
            level_a=areas[a].level,
            level_b=areas[b].level,
            tags=_sorted_tags((k, v) for k, v in tags.items() if k not in PASSAGE_KEYS),
        )

    attrs = _sorted_tags((k, v) for k, v in root.attrib.items())
    return MapDocument(nodes, areas, passages, origin, others, attrs)


def load_osmag(path) -> MapDocument:
    with open(path, encoding="utf-8") as fh:
        return parse_osmag(fh.read())


# --------------------------------------------------------------------------
# serialization


def _tag_elements(parent: ET.Element, tags: Iterable[tuple[str, str]]) -> None:
    for k, v in tags:
        ET.SubElement(parent, "tag", {"k": k, "v": v})


def serialize_osmag(doc: MapDocument) -> str:
    attrs = dict(doc.attrs) or {"version": "0.6", "generator": "osmag_nav"}
    root = ET.Element("osm", dict(sorted(attrs.items())))
    for nid in sorted(doc.nodes):
        n = doc.nodes[nid]
        el = ET.SubElement(root, "node", {"id": str(n.id), "lat": repr(n.lat), "lon": repr(n.lon)})
        _tag_elements(el, n.tags)

    ways = []
    for a in doc.areas.values():
        tags = [("osmAG:type", "area"), ("osmAG:areaType", a.area_type), ("name", a.name), ("level", str(a.level))]
        if a.parent is not None:
            tags.append(("osmAG:parent", str(a.parent)))
        ways.append((a.id, a.polygon, tags + list(a.tags)))
    for p in doc.passages.values():
        tags = [
            ("osmAG:type", "passage"),
            ("osmAG:from", str(p.area_a)),
            ("osmAG:to", str(p.area_b)),
            ("osmAG:doorType", p.door_type),
        ]
        ways.append((p.id, p.segment, tags + list(p.tags)))
    for w in doc.other_ways.values():
        ways.append((w.id, w.refs, list(w.tags)))

    for wid, refs, tags in sorted(ways, key=lambda w: w[0]):
        el = ET.SubElement(root, "way", {"id": str(wid)})
        for r in refs:
            ET.SubElement(el, "nd", {"ref": str(r)})
        _tag_elements(el, tags)

    ET.indent(root, space="  ")
    return "<?xml version='1.0' encoding='UTF-8'?>\n" + ET.tostring(root, encoding="unicode") + "\n"


def save_osmag(doc: MapDocument, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_osmag(doc))


# --------------------------------------------------------------------------
# validation


def _segments_intersect(p1, p2, q1, q2) -> bool:
    """Closed-segment intersection test, collinear overlaps included."""

    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        eps = 1e-9 * max(1.0, abs(b[0] - a[0]) + abs(b[1] - a[1])) ** 2
        return 0 if abs(v) <= eps else (1 if v > 0 else -1)

    def on_seg(a, b, c):
        return min(a[0], b[0]) <= c[0] <= max(a[0], b[0]) and min(a[1], b[1]) <= c[1] <= max(a[1], b[1])

    d1, d2 = orient(q1, q2, p1), orient(q1, q2, p2)
    d3, d4 = orient(p1, p2, q1), orient(p1, p2, q2)
    if d1 * d2 < 0 and d3 * d4 < 0:
        return True
    return (
        (d1 == 0 and on_seg(q1, q2, p1))
        or (d2 == 0 and on_seg(q1, q2, p2))
        or (d3 == 0 and on_seg(p1, p2, q1))
        or (d4 == 0 and on_seg(p1, p2, q2))
    )


def polygon_is_simple(pts: list) -> bool:
    """``pts`` is a closed ring (first == last)."""
    n = len(pts) - 1
    if n < 3:
        return False
    if len(set(pts[:-1])) != n:
        return False
    edges = [(pts[i], pts[i + 1]) for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            a, b = edges[i], edges[j]
            if j == i + 1 or (i == 0 and j == n - 1):
                # adjacent edges may only share their common vertex; reject spikes
                shared, ea, eb = (a[1], a[0], b[1]) if j == i + 1 else (a[0], a[1], b[0])
                ux, uy = ea[0] - shared[0], ea[1] - shared[1]
                vx, vy = eb[0] - shared[0], eb[1] - shared[1]
                scale = ux * ux + uy * uy + vx * vx + vy * vy
                if ux * vx + uy * vy > 0 and abs(ux * vy - uy * vx) <= 1e-9 * scale:
                    return False
                continue
            if _segments_intersect(a[0], a[1], b[0], b[1]):
                return False
    return True


def _ring_edges(ring: tuple) -> set:
    return {frozenset((ring[i], ring[i + 1])) for i in range(len(ring) - 1)}


def _local_xy(node: GeoNode, origin: tuple) -> tuple[float, float]:
    lat0, lon0 = origin
    return (
        EARTH_RADIUS * math.cos(math.radians(lat0)) * math.radians(node.lon - lon0),
        EARTH_RADIUS * math.radians(node.lat - lat0),
    )


def validate(doc: MapDocument) -> list[Violation]:
    out: list[Violation] = []
    add = lambda rule, eid, msg: out.append(Violation(rule, eid, msg))  # noqa: E731

    for n in doc.nodes.values():
        if not -90.0 <= n.lat <= 90.0 or not math.isfinite(n.lat):
            add("node-lat-range", n.id, f"latitude {n.lat} outside [-90, 90]")
        if not -180.0 <= n.lon <= 180.0 or not math.isfinite(n.lon):
            add("node-lon-range", n.id, f"longitude {n.lon} outside [-180, 180]")

    names_seen: dict[tuple[int, str], list[int]] = {}
    for a in doc.areas.values():
        missing = [r for r in a.polygon if r not in doc.nodes]
        if missing:
            add("node-ref-exists", a.id, f"polygon references unknown nodes {missing}")
        if a.area_type not in AREA_TYPES:
            add("area-type", a.id, f"unknown area type {a.area_type!r}")
        if not a.name or not a.name.strip():
            add("area-name-nonempty", a.id, "area name is empty")
        else:
            names_seen.setdefault((a.level, a.name), []).append(a.id)
        if len(a.polygon) < 4:
            add("polygon-min-size", a.id, f"polygon has {len(a.polygon)} entries, need >= 4")
        if not a.polygon or a.polygon[0] != a.polygon[-1]:
            add("polygon-closed", a.id, "first node differs from last node")
        elif len(a.polygon) >= 4 and not missing:
            pts = [_local_xy(doc.nodes[r], doc.origin) for r in a.polygon]
            if not polygon_is_simple(pts):
                add("polygon-simple", a.id, "polygon self-intersects or repeats a vertex")
            elif _signed_area_ll(pts) <= 0:
                add("polygon-orientation", a.id, "polygon is not counter-clockwise with positive area")
        if a.parent is not None and a.parent not in doc.areas:
            add("parent-exists", a.id, f"parent {a.parent} does not exist")

    for (level, name), ids in names_seen.items():
        if len(ids) > 1:
            for aid in ids:
                add("area-name-unique", aid, f"name {name!r} used by {len(ids)} areas on level {level}")

    for a in doc.areas.values():
        seen = {a.id}
        cur = a.parent
        while cur is not None and cur in doc.areas:
            if cur in seen:
                add("parent-acyclic", a.id, "parent chain contains a cycle")
                break
            seen.add(cur)
            cur = doc.areas[cur].parent

    for p in doc.passages.values():
        if p.door_type not in DOOR_TYPES:
            add("passage-door-type", p.id, f"unknown door type {p.door_type!r}")
        if len(p.segment) != 2 or p.segment[0] == p.segment[1]:
            add("passage-segment", p.id, f"segment must have 2 distinct nodes, got {list(p.segment)}")
        missing = [r for r in p.segment if r not in doc.nodes]
        if missing:
            add("node-ref-exists", p.id, f"segment references unknown nodes {missing}")
        if p.area_a == p.area_b:
            add("passage-distinct-areas", p.id, "passage connects an area to itself")
        ends = [doc.areas.get(p.area_a), doc.areas.get(p.area_b)]
        for aid, area in zip(p.areas, ends):
            if area is None:
                add("passage-areas-exist", p.id, f"area {aid} does not exist")
        if None in ends:
            continue
        if len(p.segment) == 2 and p.segment[0] != p.segment[1]:
            edge = frozenset(p.segment)
            for area in ends:
                if edge not in _ring_edges(area.polygon):
                    add("passage-on-shared-wall", p.id, f"segment is not a wall edge of area {area.id}")
        if p.level_a != ends[0].level or p.level_b != ends[1].level:
            add("passage-level", p.id, "passage levels disagree with its areas")
        vertical = p.door_type == "elevator_door" or any(e.area_type in VERTICAL_TYPES for e in ends)
        if p.level_a != p.level_b and not vertical:
            add("passage-level", p.id, f"non-vertical passage joins levels {p.level_a} and {p.level_b}")

    return out


def format_violations(violations: Iterable[Violation]) -> str:
    return "".join(f"{v}\n" for v in violations)


# --------------------------------------------------------------------------
# projection


@dataclass(frozen=True)
class LocalPoint:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite local point ({self.x}, {self.y})")

    def dist(self, other: "LocalPoint") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


def project_point(lat: float, lon: float, origin: tuple) -> LocalPoint:
    lat0, lon0 = origin
    x = EARTH_RADIUS * math.cos(math.radians(lat0)) * math.radians(lon - lon0)
    y = EARTH_RADIUS * math.radians(lat - lat0)
    return LocalPoint(x, y)


def unproject_point(p: LocalPoint, origin: tuple) -> tuple[float, float]:
    lat0, lon0 = origin
    lat = lat0 + math.degrees(p.y / EARTH_RADIUS)
    lon = lon0 + math.degrees(p.x / (EARTH_RADIUS * math.cos(math.radians(lat0))))
    return lat, lon


@dataclass(frozen=True)
class ProjectedMap:
    doc: MapDocument
    points: Mapping[int, LocalPoint]
    polygons: Mapping[int, tuple]  # area id -> closed ring of LocalPoint
    segments: Mapping[int, tuple]  # passage id -> (LocalPoint, LocalPoint)
    cache: dict = field(default_factory=dict, compare=False, repr=False, hash=False)

    def midpoint(self, passage_id: int) -> LocalPoint:
        a, b = self.segments[passage_id]
        return LocalPoint((a.x + b.x) / 2, (a.y + b.y) / 2)

    def ring_xy(self, area_id: int) -> list[tuple[float, float]]:
        return [(p.x, p.y) for p in self.polygons[area_id]]

    def geometry_hash(self, resolution: float | None = None) -> str:
        h = hashlib.sha256()
        for nid in sorted(self.points):
            p = self.points[nid]
            h.update(f"n{nid}:{p.x:.6f},{p.y:.6f};".encode())
        for aid in sorted(self.doc.areas):
            a = self.doc.areas[aid]
            h.update(f"a{aid}:{a.level}:{','.join(map(str, a.polygon))};".encode())
        for pid in sorted(self.doc.passages):
            p = self.doc.passages[pid]
            h.update(f"p{pid}:{p.area_a},{p.area_b}:{','.join(map(str, p.segment))};".encode())
        if resolution is not None:
            h.update(f"r{resolution:.6f}".encode())
        return h.hexdigest()[:16]


def project(doc: MapDocument) -> ProjectedMap:
    points = {nid: project_point(n.lat, n.lon, doc.origin) for nid, n in doc.nodes.items()}
    for nid, p in points.items():
        if math.hypot(p.x, p.y) > MAX_EXTENT_M:
            raise MapError(f"node lies {math.hypot(p.x, p.y):.0f} m from origin, beyond {MAX_EXTENT_M:.0f} m", nid)
    polygons = {aid: tuple(points[r] for r in a.polygon) for aid, a in doc.areas.items()}
    segments = {pid: (points[p.segment[0]], points[p.segment[1]]) for pid, p in doc.passages.items()}
    return ProjectedMap(doc, points, polygons, segments)


# --------------------------------------------------------------------------
# prompt-side summary


def map_summary(doc: MapDocument, level: int | None = None) -> str:
    levels = doc.levels()
    if level is not None and level not in levels:
        raise MapError(f"unknown level {level}; map has levels {levels}")
    lines = []
    areas = sorted(doc.areas.values(), key=lambda a: (a.level, a.name, a.id))
    for a in areas:
        if level is not None and a.level != level:
            continue
        links = []
        for p in doc.passages_of(a.id):
            other = doc.areas[p.other(a.id)]
            where = other.name if other.level == a.level else f"{other.name} (L{other.level})"
            links.append((where, DOOR_LABELS.get(p.door_type, p.door_type)))
        links.sort()
        head = f"{TYPE_LABELS.get(a.area_type, 'Area')} {a.name} ({a.area_type}, L{a.level})"
        if links:
            lines.append(head + ": connects to " + ", ".join(f"{w} via {d}" for w, d in links))
        else:
            lines.append(head + ": no passages")
    return "\n".join(lines) + ("\n" if lines else "")
