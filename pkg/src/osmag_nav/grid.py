"""Occupancy grids rasterized from osmAG polygons, grid A*, and map export.

Cell centers sit on the global lattice ``(k * resolution)`` so grids built
for different areas at the same resolution agree cell-for-cell.  Walls are
one cell thick: every cell whose center lies within half a cell diagonal of a
polygon edge.  Moves are 8-connected without corner cutting.
"""

from __future__ import annotations

import heapq
import math
import os
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .mapmodel import LocalPoint, ProjectedMap

FREE = 0
OCCUPIED = 1

SQRT2 = math.sqrt(2.0)
SNAP_CELLS = 5
ROBOT_RADIUS = 0.2
PRECOMPUTE_RESOLUTION = 0.1
EXPORT_RESOLUTION = 0.05
PGM_FREE = 254
PGM_OCCUPIED = 0


class GridError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class OccupancyGrid:
    resolution: float
    origin: LocalPoint  # lower-left corner of cell (0, 0)
    cells: np.ndarray  # (height, width) uint8, row index grows with y

    def __post_init__(self):
        if self.resolution <= 0:
            raise GridError("resolution must be positive")
        if self.cells.ndim != 2 or min(self.cells.shape) < 1:
            raise GridError("grid must be at least 1x1")
        self.cells.setflags(write=False)

    @property
    def width(self) -> int:
        return self.cells.shape[1]

    @property
    def height(self) -> int:
        return self.cells.shape[0]

    def __eq__(self, other):
        if not isinstance(other, OccupancyGrid):
            return NotImplemented
        return (
            self.resolution == other.resolution
            and self.origin == other.origin
            and np.array_equal(self.cells, other.cells)
        )

    __hash__ = None

    def cell_of(self, p: LocalPoint) -> tuple[int, int]:
        return (
            int(math.floor((p.y - self.origin.y) / self.resolution)),
            int(math.floor((p.x - self.origin.x) / self.resolution)),
        )

    def center(self, cell: tuple[int, int]) -> LocalPoint:
        r, c = cell
        return LocalPoint(self.origin.x + (c + 0.5) * self.resolution, self.origin.y + (r + 0.5) * self.resolution)

    def in_bounds(self, cell) -> bool:
        return 0 <= cell[0] < self.height and 0 <= cell[1] < self.width

    def is_free(self, cell) -> bool:
        return self.in_bounds(cell) and self.cells[cell] == FREE

    def free_fraction(self) -> float:
        return float(np.mean(self.cells == FREE))


@dataclass(frozen=True)
class GridPath:
    cells: tuple  # ((row, col), ...)
    length: float
    n_orth: int
    n_diag: int


# --------------------------------------------------------------------------
# lattice frames and polygon masks


@dataclass(frozen=True)
class Frame:
    kx0: int
    ky0: int
    width: int
    height: int
    resolution: float

    @classmethod
    def around(cls, xy: list[tuple[float, float]], resolution: float, margin: int = 2) -> "Frame":
        xs = [p[0] for p in xy]
        ys = [p[1] for p in xy]
        kx0 = math.floor(min(xs) / resolution + 1e-6) - margin
        ky0 = math.floor(min(ys) / resolution + 1e-6) - margin
        kx1 = math.ceil(max(xs) / resolution - 1e-6) + margin
        ky1 = math.ceil(max(ys) / resolution - 1e-6) + margin
        return cls(kx0, ky0, kx1 - kx0 + 1, ky1 - ky0 + 1, resolution)

    @property
    def origin(self) -> LocalPoint:
        return LocalPoint((self.kx0 - 0.5) * self.resolution, (self.ky0 - 0.5) * self.resolution)

    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        xs = (self.kx0 + np.arange(self.width)) * self.resolution
        ys = (self.ky0 + np.arange(self.height)) * self.resolution
        return np.meshgrid(xs, ys)

    def grid(self, cells: np.ndarray) -> OccupancyGrid:
        return OccupancyGrid(self.resolution, self.origin, cells.astype(np.uint8))


def _wall_tol(resolution: float) -> float:
    return resolution * SQRT2 / 2 + 1e-9


def points_in_polygon(ring: list[tuple[float, float]], X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Even-odd ray casting for arrays of points against a closed ring."""
    inside = np.zeros(X.shape, dtype=bool)
    for (x0, y0), (x1, y1) in zip(ring, ring[1:]):
        if y0 == y1:
            continue
        crosses = (y0 > Y) != (y1 > Y)
        xcross = x0 + (Y - y0) * (x1 - x0) / (y1 - y0)
        inside ^= crosses & (X < xcross)
    return inside


def distance_to_segment(X: np.ndarray, Y: np.ndarray, a, b) -> np.ndarray:
    ax, ay = a
    bx, by = b
    dx, dy = bx - ax, by - ay
    L2 = dx * dx + dy * dy
    if L2 == 0:
        return np.hypot(X - ax, Y - ay)
    t = np.clip(((X - ax) * dx + (Y - ay) * dy) / L2, 0.0, 1.0)
    return np.hypot(X - (ax + t * dx), Y - (ay + t * dy))


def wall_mask(ring, X, Y, resolution: float) -> np.ndarray:
    tol = _wall_tol(resolution)
    mask = np.zeros(X.shape, dtype=bool)
    for a, b in zip(ring, ring[1:]):
        mask |= distance_to_segment(X, Y, a, b) <= tol
    return mask


def band_mask(segment, X, Y, resolution: float) -> np.ndarray:
    return distance_to_segment(X, Y, segment[0], segment[1]) <= _wall_tol(resolution)


def polygon_area(ring) -> float:
    return 0.5 * sum(x0 * y1 - x1 * y0 for (x0, y0), (x1, y1) in zip(ring, ring[1:]))


def _paint(frame: Frame, rings: list, open_segments: list):
    X, Y = frame.centers()
    inside = np.zeros(X.shape, dtype=bool)
    walls = np.zeros(X.shape, dtype=bool)
    for ring in rings:
        inside |= points_in_polygon(ring, X, Y)
        walls |= wall_mask(ring, X, Y, frame.resolution)
    free = inside & ~walls
    for seg in open_segments:
        free |= walls & band_mask(seg, X, Y, frame.resolution)
    return np.where(free, FREE, OCCUPIED).astype(np.uint8)


def rasterize_polygon(ring, open_segments, resolution: float) -> OccupancyGrid:
    if resolution <= 0:
        raise GridError("resolution must be positive")
    if abs(polygon_area(ring)) < resolution * resolution:
        raise GridError("degenerate polygon: area below one cell")
    frame = Frame.around(ring, resolution)
    return frame.grid(_paint(frame, [ring], open_segments))


def rasterize_area(pmap: ProjectedMap, area_id: int, open_passages, resolution: float) -> OccupancyGrid:
    ring = pmap.ring_xy(area_id)
    segs = [tuple((q.x, q.y) for q in pmap.segments[pid]) for pid in open_passages]
    return rasterize_polygon(ring, segs, resolution)


def inflate(grid: OccupancyGrid, radius: float = ROBOT_RADIUS) -> OccupancyGrid:
    if radius <= 0:
        return grid
    dist = ndimage.distance_transform_edt(grid.cells == FREE)
    cells = np.where(dist * grid.resolution <= radius + 1e-9, OCCUPIED, FREE).astype(np.uint8)
    return OccupancyGrid(grid.resolution, grid.origin, cells)


def area_grid(pmap: ProjectedMap, area_id: int, resolution: float, radius: float = ROBOT_RADIUS) -> OccupancyGrid:
    """Inflated grid of one area with all of its passages open (cached on the map)."""
    key = ("area", area_id, resolution, radius)
    if key not in pmap.cache:
        open_ids = [p.id for p in pmap.doc.passages_of(area_id)]
        pmap.cache[key] = inflate(rasterize_area(pmap, area_id, open_ids, resolution), radius)
    return pmap.cache[key]


# --------------------------------------------------------------------------
# search


def snap(grid: OccupancyGrid, p: LocalPoint, max_cells: int = SNAP_CELLS) -> tuple[int, int]:
    cell = grid.cell_of(p)
    if not grid.in_bounds(cell):
        raise GridError(f"point ({p.x:.3f}, {p.y:.3f}) lies outside the grid")
    if grid.cells[cell] == FREE:
        return cell
    r0, c0 = cell
    best = None
    for dr in range(-max_cells, max_cells + 1):
        for dc in range(-max_cells, max_cells + 1):
            d2 = dr * dr + dc * dc
            if d2 > max_cells * max_cells:
                continue
            rc = (r0 + dr, c0 + dc)
            if grid.is_free(rc):
                key = (d2, rc)
                if best is None or key < best:
                    best = key
    if best is None:
        raise GridError(f"no free cell within {max_cells} cells of ({p.x:.3f}, {p.y:.3f})")
    return best[1]


_STEPS = ((0, 1, False), (1, 0, False), (0, -1, False), (-1, 0, False), (1, 1, True), (1, -1, True), (-1, 1, True), (-1, -1, True))


def astar_cells(grid: OccupancyGrid, start: tuple[int, int], goal: tuple[int, int]) -> GridPath | None:
    """8-connected A* between two free cells with the octile heuristic."""
    H, W = grid.height, grid.width
    free = (grid.cells.ravel() == FREE).tolist()
    s = start[0] * W + start[1]
    t = goal[0] * W + goal[1]
    if not (free[s] and free[t]):
        raise GridError("start and goal cells must be free")
    gr, gc = goal

    def h(r, c):
        dx, dy = abs(c - gc), abs(r - gr)
        if dx < dy:
            dx, dy = dy, dx
        return (dx - dy) + dy * SQRT2

    N = H * W
    g_cost = [math.inf] * N
    n_o = [0] * N
    n_d = [0] * N
    came = [-1] * N
    closed = bytearray(N)
    g_cost[s] = 0.0
    seq = 0
    heap = [(h(*start), seq, s)]
    push, pop = heapq.heappush, heapq.heappop
    found = False
    while heap:
        _, _, u = pop(heap)
        if closed[u]:
            continue
        if u == t:
            found = True
            break
        closed[u] = 1
        r, c = divmod(u, W)
        uo, ud = n_o[u], n_d[u]
        for dr, dc, diag in _STEPS:
            nr, nc = r + dr, c + dc
            if nr < 0 or nr >= H or nc < 0 or nc >= W:
                continue
            v = nr * W + nc
            if closed[v] or not free[v]:
                continue
            if diag:
                if not (free[r * W + nc] and free[nr * W + c]):
                    continue
                vo, vd = uo, ud + 1
            else:
                vo, vd = uo + 1, ud
            g = vo + vd * SQRT2
            if g_cost[v] <= g:
                continue
            g_cost[v], n_o[v], n_d[v], came[v] = g, vo, vd, u
            seq += 1
            push(heap, (g + h(nr, nc), seq, v))
    if not found:
        return None
    path = []
    u = t
    while u != -1:
        path.append(divmod(u, W))
        u = came[u]
    path.reverse()
    return GridPath(tuple(path), (n_o[t] + n_d[t] * SQRT2) * grid.resolution, n_o[t], n_d[t])


def grid_astar(grid: OccupancyGrid, start: LocalPoint, goal: LocalPoint) -> GridPath | None:
    return astar_cells(grid, snap(grid, start), snap(grid, goal))


def octile_length(a: tuple[int, int], b: tuple[int, int], resolution: float) -> float:
    dx, dy = abs(a[1] - b[1]), abs(a[0] - b[0])
    hi, lo = max(dx, dy), min(dx, dy)
    return ((hi - lo) + lo * SQRT2) * resolution


def components(grid: OccupancyGrid) -> np.ndarray:
    """Connected FREE regions; 4-connectivity matches no-corner-cutting moves."""
    labels, _ = ndimage.label(grid.cells == FREE)
    return labels


# --------------------------------------------------------------------------
# restricted global map


def render_restricted(
    pmap: ProjectedMap,
    level: int,
    allowed_areas,
    open_passages,
    resolution: float = EXPORT_RESOLUTION,
) -> OccupancyGrid:
    allowed = list(dict.fromkeys(allowed_areas))
    if not allowed:
        raise GridError("allowed_areas must be nonempty")
    doc = pmap.doc
    for aid in allowed:
        if aid not in doc.areas:
            raise GridError(f"unknown area {aid}")
        if doc.areas[aid].level != level:
            raise GridError(f"area {aid} is not on level {level}")
    aset = set(allowed)
    for pid in open_passages:
        if pid not in doc.passages or not aset.intersection(doc.passages[pid].areas):
            raise GridError(f"passage {pid} is not adjacent to any allowed area")
    rings = [pmap.ring_xy(a) for a in allowed]
    frame = Frame.around([xy for ring in rings for xy in ring], resolution)
    segs = [tuple((q.x, q.y) for q in pmap.segments[pid]) for pid in open_passages]
    return frame.grid(_paint(frame, rings, segs))


def passage_cells(grid: OccupancyGrid, pmap: ProjectedMap, passage_id: int) -> list[tuple[int, int]]:
    """Cells of ``grid`` that a passage's door band covers."""
    a, b = pmap.segments[passage_id]
    res = grid.resolution
    r0, c0 = grid.cell_of(LocalPoint(min(a.x, b.x) - res, min(a.y, b.y) - res))
    r1, c1 = grid.cell_of(LocalPoint(max(a.x, b.x) + res, max(a.y, b.y) + res))
    r0, c0 = max(r0, 0), max(c0, 0)
    r1, c1 = min(r1, grid.height - 1), min(c1, grid.width - 1)
    if r1 < r0 or c1 < c0:
        return []
    rows, cols = np.mgrid[r0 : r1 + 1, c0 : c1 + 1]
    X = grid.origin.x + (cols + 0.5) * res
    Y = grid.origin.y + (rows + 0.5) * res
    m = band_mask(((a.x, a.y), (b.x, b.y)), X, Y, res)
    return [(int(r), int(c)) for r, c in zip(rows[m], cols[m])]


def label_areas(grid: OccupancyGrid, pmap: ProjectedMap, area_ids) -> np.ndarray:
    """Area id of each cell whose center is strictly inside a polygon (0 elsewhere)."""
    res = grid.resolution
    cols = np.arange(grid.width)
    rows = np.arange(grid.height)
    X, Y = np.meshgrid(grid.origin.x + (cols + 0.5) * res, grid.origin.y + (rows + 0.5) * res)
    labels = np.zeros(X.shape, dtype=np.int64)
    for aid in area_ids:
        ring = pmap.ring_xy(aid)
        m = points_in_polygon(ring, X, Y) & ~wall_mask(ring, X, Y, res)
        labels[m] = aid
    return labels


# --------------------------------------------------------------------------
# export


def pgm_bytes(grid: OccupancyGrid) -> bytes:
    body = np.where(grid.cells[::-1] == FREE, PGM_FREE, PGM_OCCUPIED).astype(np.uint8)
    return f"P5\n{grid.width} {grid.height}\n255\n".encode("ascii") + body.tobytes()


def export_pgm(grid: OccupancyGrid, path_prefix: str) -> tuple[str, str]:
    """Write ``<prefix>.pgm`` and a ``<prefix>.yaml`` sidecar; returns both paths."""
    pgm_path = f"{path_prefix}.pgm"
    meta_path = f"{path_prefix}.yaml"
    os.makedirs(os.path.dirname(os.path.abspath(pgm_path)), exist_ok=True)
    with open(pgm_path, "wb") as fh:
        fh.write(pgm_bytes(grid))
    meta = (
        f"image: {os.path.basename(pgm_path)}\n"
        f"resolution: {grid.resolution!r}\n"
        f"origin_x: {grid.origin.x!r}\n"
        f"origin_y: {grid.origin.y!r}\n"
        f"free_value: {PGM_FREE}\n"
        f"occupied_value: {PGM_OCCUPIED}\n"
        "occupied_thresh: 0.65\n"
    )
    with open(meta_path, "w", encoding="ascii") as fh:
        fh.write(meta)
    return pgm_path, meta_path
