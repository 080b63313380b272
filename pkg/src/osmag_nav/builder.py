"""Author osmAG documents from metric floor-plan coordinates.

Shared walls are stitched automatically: every node that lies on an edge of
a same-level polygon is inserted into that polygon, so passage endpoints end
up as consecutive vertices of both adjacent areas.
"""

from __future__ import annotations

from .mapmodel import Area, GeoNode, LocalPoint, MapDocument, Passage, unproject_point

DEFAULT_ORIGIN = (31.17947, 121.59049)


def _on_segment(p, a, b, tol=1e-6) -> bool:
    cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
    if abs(cross) > tol * max(1.0, abs(b[0] - a[0]) + abs(b[1] - a[1])):
        return False
    dot = (p[0] - a[0]) * (b[0] - a[0]) + (p[1] - a[1]) * (b[1] - a[1])
    return tol < dot < (b[0] - a[0]) ** 2 + (b[1] - a[1]) ** 2 - tol


class MapBuilder:
    def __init__(self, origin: tuple = DEFAULT_ORIGIN, area_id_start: int = 101, passage_id_start: int = 201):
        self.origin = origin
        self._coords: dict[tuple, int] = {}
        self._areas: list[dict] = []
        self._passages: list[dict] = []
        self._next_area = area_id_start
        self._next_passage = passage_id_start
        self._node(0.0, 0.0)

    def _node(self, x: float, y: float) -> int:
        key = (round(x, 6), round(y, 6))
        if key not in self._coords:
            self._coords[key] = len(self._coords) + 1
        return self._coords[key]

    def area(self, name, area_type, coords, level=1, parent=None, tags=None) -> int:
        aid = self._next_area
        self._next_area += 1
        ring = [(round(x, 6), round(y, 6)) for x, y in coords]
        for x, y in ring:
            self._node(x, y)
        self._areas.append(
            dict(id=aid, name=name, area_type=area_type, level=level, ring=ring, parent=parent, tags=tags or {})
        )
        return aid

    def rect(self, name, area_type, x0, y0, x1, y1, level=1, parent=None, tags=None) -> int:
        return self.area(name, area_type, [(x0, y0), (x1, y0), (x1, y1), (x0, y1)], level, parent, tags)

    def passage(self, area_a: int, area_b: int, p, q, door_type: str = "open", tags=None) -> int:
        pid = self._next_passage
        self._next_passage += 1
        p = (round(p[0], 6), round(p[1], 6))
        q = (round(q[0], 6), round(q[1], 6))
        self._node(*p)
        self._node(*q)
        self._passages.append(dict(id=pid, a=area_a, b=area_b, p=p, q=q, door_type=door_type, tags=tags or {}))
        return pid

    def build(self) -> MapDocument:
        level_of = {a["id"]: a["level"] for a in self._areas}
        per_level: dict[int, set] = {}
        for a in self._areas:
            per_level.setdefault(a["level"], set()).update(a["ring"])
        for p in self._passages:
            for lv in (level_of[p["a"]], level_of[p["b"]]):
                per_level.setdefault(lv, set()).update((p["p"], p["q"]))

        nodes = {}
        for (x, y), nid in self._coords.items():
            lat, lon = unproject_point(LocalPoint(x, y), self.origin)
            tags = (("osmAG:origin", "yes"),) if nid == 1 else ()
            nodes[nid] = GeoNode(nid, lat, lon, tags)

        areas = {}
        for a in self._areas:
            ring = a["ring"]
            candidates = per_level[a["level"]]
            full = []
            for i, start in enumerate(ring):
                end = ring[(i + 1) % len(ring)]
                full.append(start)
                inner = [c for c in candidates if _on_segment(c, start, end)]
                inner.sort(key=lambda c: (c[0] - start[0]) ** 2 + (c[1] - start[1]) ** 2)
                full.extend(inner)
            area2 = sum(x0 * y1 - x1 * y0 for (x0, y0), (x1, y1) in zip(full, full[1:] + full[:1]))
            if area2 < 0:
                full.reverse()
            polygon = tuple(self._coords[c] for c in full) + (self._coords[full[0]],)
            areas[a["id"]] = Area(
                id=a["id"],
                name=a["name"],
                area_type=a["area_type"],
                level=a["level"],
                polygon=polygon,
                parent=a["parent"],
                tags=tuple(sorted(a["tags"].items())),
            )

        passages = {}
        for p in self._passages:
            passages[p["id"]] = Passage(
                id=p["id"],
                area_a=p["a"],
                area_b=p["b"],
                segment=(self._coords[p["p"]], self._coords[p["q"]]),
                door_type=p["door_type"],
                level_a=level_of[p["a"]],
                level_b=level_of[p["b"]],
                tags=tuple(sorted(p["tags"].items())),
            )
        attrs = (("generator", "osmag_nav"), ("version", "0.6"))
        return MapDocument(nodes, areas, passages, self.origin, {}, attrs)
