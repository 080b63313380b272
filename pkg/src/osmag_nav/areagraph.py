"""Passage graph of an osmAG map and its cached intra-area distance table."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from itertools import combinations

from .grid import PRECOMPUTE_RESOLUTION, ROBOT_RADIUS, GridError, area_grid, grid_astar
from .mapmodel import ProjectedMap

TABLE_MAGIC = "osmag-dist"
TABLE_VERSION = 1


class TableError(ValueError):
    pass


def _key(area_id: int, i: int, j: int) -> tuple[int, int, int]:
    return (area_id, i, j) if i <= j else (area_id, j, i)


@dataclass(frozen=True)
class IntraAreaDistanceTable:
    entries: dict  # (area, i, j) with i < j -> meters
    map_hash: str
    resolution: float

    def get(self, area_id: int, i: int, j: int) -> float | None:
        return self.entries.get(_key(area_id, i, j))

    def __len__(self) -> int:
        return len(self.entries)


def precompute_distances(
    pmap: ProjectedMap, resolution: float = PRECOMPUTE_RESOLUTION, radius: float = ROBOT_RADIUS
) -> IntraAreaDistanceTable:
    entries = {}
    for aid in sorted(pmap.doc.areas):
        pids = [p.id for p in pmap.doc.passages_of(aid)]
        if len(pids) < 2:
            continue
        grid = area_grid(pmap, aid, resolution, radius)
        for i, j in combinations(pids, 2):
            try:
                path = grid_astar(grid, pmap.midpoint(i), pmap.midpoint(j))
            except GridError:
                path = None
            if path is not None:
                # stored at file precision so a reloaded cache is bit-identical
                entries[_key(aid, i, j)] = round(path.length, 3)
    return IntraAreaDistanceTable(entries, pmap.geometry_hash(resolution), resolution)


def save_table(table: IntraAreaDistanceTable, path) -> None:
    lines = [f"{TABLE_MAGIC} v{TABLE_VERSION} {table.map_hash} {table.resolution!r}"]
    for (a, i, j) in sorted(table.entries):
        lines.append(f"{a},{i},{j},{table.entries[(a, i, j)]:.3f}")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def load_table(path) -> IntraAreaDistanceTable:
    with open(path, encoding="ascii") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise TableError("empty distance table file")
    head = lines[0].split()
    if len(head) != 4 or head[0] != TABLE_MAGIC:
        raise TableError(f"bad header: {lines[0]!r}")
    if head[1] != f"v{TABLE_VERSION}":
        raise TableError(f"table format {head[1]} is not supported (reader is v{TABLE_VERSION})")
    try:
        resolution = float(head[3])
    except ValueError:
        raise TableError(f"bad resolution in header: {head[3]!r}") from None
    entries = {}
    for n, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        try:
            a, i, j = (int(x) for x in parts[:3])
            d = float(parts[3])
            if len(parts) != 4 or d < 0:
                raise ValueError
        except (ValueError, IndexError):
            raise TableError(f"malformed row at line {n}: {line!r}") from None
        entries[_key(a, i, j)] = d
    return IntraAreaDistanceTable(entries, head[2], resolution)


@dataclass(frozen=True)
class Edge:
    i: int
    j: int
    area: int
    distance: float


@dataclass(frozen=True)
class AreaGraph:
    vertices: tuple
    edges: tuple
    adjacency: dict = field(compare=False, repr=False)  # passage -> ((neighbor, area, d), ...)

    def neighbors(self, v: int):
        return self.adjacency.get(v, ())


def build_area_graph(pmap: ProjectedMap, table: IntraAreaDistanceTable) -> AreaGraph:
    expected = pmap.geometry_hash(table.resolution)
    if table.map_hash != expected:
        raise TableError(f"stale distance table: hash {table.map_hash} != map hash {expected}")
    doc = pmap.doc
    edges = []
    for aid in sorted(doc.areas):
        pids = [p.id for p in doc.passages_of(aid)]
        for i, j in combinations(pids, 2):
            d = table.get(aid, i, j)
            if d is not None:
                edges.append(Edge(min(i, j), max(i, j), aid, d))
    edges.sort(key=lambda e: (e.i, e.j, e.area))
    adjacency: dict[int, list] = {}
    for e in edges:
        adjacency.setdefault(e.i, []).append((e.j, e.area, e.distance))
        adjacency.setdefault(e.j, []).append((e.i, e.area, e.distance))
    adjacency = {v: tuple(sorted(n)) for v, n in adjacency.items()}
    return AreaGraph(tuple(sorted(doc.passages)), tuple(edges), adjacency)


def load_or_compute(pmap: ProjectedMap, path=None, resolution: float = PRECOMPUTE_RESOLUTION):
    """Reuse a cached table file when its hash matches, otherwise recompute (and save)."""
    if path is not None and os.path.exists(path):
        try:
            table = load_table(path)
            if table.map_hash == pmap.geometry_hash(resolution) and table.resolution == resolution:
                return table
        except TableError:
            pass
    table = precompute_distances(pmap, resolution)
    if path is not None:
        save_table(table, path)
    return table
