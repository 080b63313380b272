"""Rasterization, grid A*, inflation, restricted renders and PGM export."""

from __future__ import annotations

import heapq
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from shapely.geometry import Point, Polygon

from osmag_nav.grid import (
    FREE,
    OCCUPIED,
    GridError,
    OccupancyGrid,
    astar_cells,
    components,
    export_pgm,
    grid_astar,
    inflate,
    octile_length,
    passage_cells,
    pgm_bytes,
    points_in_polygon,
    rasterize_polygon,
    render_restricted,
    snap,
)
from osmag_nav.mapmodel import LocalPoint

SQRT2 = math.sqrt(2.0)


def free_grid(h, w, res=0.1):
    return OccupancyGrid(res, LocalPoint(0.0, 0.0), np.zeros((h, w), dtype=np.uint8))


def reference_dijkstra(cells: np.ndarray, s, t):
    """Plain Dijkstra on 8-connected moves without corner cutting (cost in cells)."""
    H, W = cells.shape
    dist = {s: 0.0}
    heap = [(0.0, s)]
    while heap:
        d, (r, c) = heapq.heappop(heap)
        if (r, c) == t:
            return d
        if d > dist[(r, c)]:
            continue
        for dr in (-1, 0, 1):
            for dc in (-1, 0, 1):
                if dr == dc == 0:
                    continue
                nr, nc = r + dr, c + dc
                if not (0 <= nr < H and 0 <= nc < W) or cells[nr, nc]:
                    continue
                if dr and dc and (cells[r, nc] or cells[nr, c]):
                    continue
                nd = d + (SQRT2 if dr and dc else 1.0)
                if nd < dist.get((nr, nc), math.inf):
                    dist[(nr, nc)] = nd
                    heapq.heappush(heap, (nd, (nr, nc)))
    return None


def star_polygon(rng, n, cx=5.0, cy=5.0):
    angles = np.sort(rng.uniform(0, 2 * np.pi, n))
    radii = rng.uniform(1.5, 4.5, n)
    pts = [(cx + r * np.cos(a), cy + r * np.sin(a)) for a, r in zip(angles, radii)]
    return pts + [pts[0]]


# --------------------------------------------------------------------------
# A*


@settings(max_examples=300, deadline=None)
@given(st.integers(1, 40), st.integers(1, 40), st.data())
def test_free_grid_length_is_octile(h, w, data):
    g = free_grid(h, w)
    s = (data.draw(st.integers(0, h - 1)), data.draw(st.integers(0, w - 1)))
    t = (data.draw(st.integers(0, h - 1)), data.draw(st.integers(0, w - 1)))
    path = astar_cells(g, s, t)
    dx, dy = abs(s[1] - t[1]), abs(s[0] - t[0])
    assert path.length == ((max(dx, dy) - min(dx, dy)) + min(dx, dy) * SQRT2) * g.resolution
    assert path.length == octile_length(s, t, g.resolution)
    euclid = math.hypot(dx, dy) * g.resolution
    assert path.length >= euclid - 2 * g.resolution


@settings(max_examples=150, deadline=None)
@given(st.integers(2, 14), st.integers(2, 14), st.floats(0.0, 0.45), st.integers(0, 2**31 - 1))
def test_astar_matches_reference_dijkstra(h, w, density, seed):
    rng = np.random.default_rng(seed)
    cells = (rng.random((h, w)) < density).astype(np.uint8)
    cells[0, 0] = cells[h - 1, w - 1] = FREE
    g = OccupancyGrid(1.0, LocalPoint(0.0, 0.0), cells)
    ref = reference_dijkstra(cells, (0, 0), (h - 1, w - 1))
    path = astar_cells(g, (0, 0), (h - 1, w - 1))
    if ref is None:
        assert path is None
        return
    assert path.length == pytest.approx(ref, abs=1e-9)
    for (r0, c0), (r1, c1) in zip(path.cells, path.cells[1:]):
        assert max(abs(r1 - r0), abs(c1 - c0)) == 1
        assert cells[r1, c1] == FREE
        if r0 != r1 and c0 != c1:
            assert cells[r0, c1] == FREE and cells[r1, c0] == FREE


def test_no_corner_cutting_between_diagonal_blocks():
    cells = np.zeros((2, 2), dtype=np.uint8)
    cells[0, 1] = cells[1, 0] = OCCUPIED
    g = OccupancyGrid(1.0, LocalPoint(0, 0), cells)
    assert astar_cells(g, (0, 0), (1, 1)) is None


def test_blocked_endpoints_raise():
    cells = np.zeros((3, 3), dtype=np.uint8)
    cells[1, 1] = OCCUPIED
    g = OccupancyGrid(1.0, LocalPoint(0, 0), cells)
    with pytest.raises(GridError):
        astar_cells(g, (1, 1), (0, 0))


def test_snap_moves_to_nearest_free_cell():
    cells = np.ones((11, 11), dtype=np.uint8)
    cells[5, 8] = FREE
    g = OccupancyGrid(1.0, LocalPoint(0, 0), cells)
    assert snap(g, LocalPoint(5.5, 5.5)) == (5, 8)
    with pytest.raises(GridError):
        snap(g, LocalPoint(5.5, 5.5), max_cells=2)
    with pytest.raises(GridError, match="outside"):
        snap(g, LocalPoint(-3.0, 0.0))


def test_grid_astar_in_free_box():
    g = free_grid(50, 50)
    path = grid_astar(g, LocalPoint(0.05, 0.05), LocalPoint(4.95, 0.05))
    assert path.length == pytest.approx(4.9)


# --------------------------------------------------------------------------
# rasterization


@settings(max_examples=60, deadline=None)
@given(st.integers(3, 12), st.integers(0, 2**31 - 1))
def test_point_in_polygon_agrees_with_shapely(n, seed):
    rng = np.random.default_rng(seed)
    ring = star_polygon(rng, n)
    poly = Polygon(ring)
    X, Y = rng.uniform(0, 10, (2, 400))
    got = points_in_polygon(ring, X, Y)
    for x, y, inside in zip(X, Y, got):
        if poly.exterior.distance(Point(x, y)) < 1e-9:
            continue
        assert inside == poly.contains(Point(x, y))


@settings(max_examples=30, deadline=None)
@given(st.integers(3, 10), st.integers(0, 2**31 - 1), st.sampled_from([0.05, 0.1, 0.2]))
def test_free_cells_are_interior_and_clear_of_walls(n, seed, res):
    rng = np.random.default_rng(seed)
    ring = star_polygon(rng, n)
    poly = Polygon(ring)
    g = rasterize_polygon(ring, [], res)
    rows, cols = np.nonzero(g.cells == FREE)
    for r, c in zip(rows[::7], cols[::7]):
        p = g.center((int(r), int(c)))
        assert poly.contains(Point(p.x, p.y))
        assert poly.exterior.distance(Point(p.x, p.y)) > res * SQRT2 / 2
    # centers on the global lattice k * res
    p = g.center((0, 0))
    assert abs(p.x / res - round(p.x / res)) < 1e-6
    assert abs(p.y / res - round(p.y / res)) < 1e-6


def test_open_segment_frees_the_wall_band():
    ring = [(0, 0), (4, 0), (4, 4), (0, 4), (0, 0)]
    closed = rasterize_polygon(ring, [], 0.1)
    opened = rasterize_polygon(ring, [((4, 1.5), (4, 2.5))], 0.1)
    cell = opened.cell_of(LocalPoint(4.0, 2.0))
    assert closed.cells[cell] == OCCUPIED and opened.cells[cell] == FREE
    assert opened.cells[opened.cell_of(LocalPoint(4.0, 3.5))] == OCCUPIED


def test_degenerate_polygon_is_rejected():
    with pytest.raises(GridError):
        rasterize_polygon([(0, 0), (0.01, 0), (0.01, 0.01), (0, 0)], [], 0.1)


def test_inflation_clears_a_robot_radius():
    g = free_grid(40, 40)
    cells = np.array(g.cells)
    cells[20, 20] = OCCUPIED
    g = OccupancyGrid(0.1, g.origin, cells)
    inf = inflate(g, 0.2)
    assert inf.cells[20, 22] == OCCUPIED and inf.cells[22, 22] == FREE
    assert inf.cells[20, 23] == FREE
    assert inflate(g, 0.0) is g


# --------------------------------------------------------------------------
# restricted renders


def test_render_checks_arguments(campus):
    lobby = campus.area("Lobby")
    with pytest.raises(GridError):
        render_restricted(campus.pmap, 1, [], [])
    with pytest.raises(GridError, match="not on level"):
        render_restricted(campus.pmap, 2, [lobby], [])
    far = [p.id for p in campus.doc.passages.values() if lobby not in p.areas][0]
    with pytest.raises(GridError, match="not adjacent"):
        render_restricted(campus.pmap, 1, [lobby], [far])


def test_closed_passages_disconnect_areas(campus):
    pm = campus.pmap
    acor, lobby = campus.area("A Corridor"), campus.area("Lobby")
    shared = [p.id for p in campus.doc.passages_of(acor) if lobby in p.areas]
    walled = render_restricted(pm, 1, [acor, lobby], [], 0.1)
    opened = render_restricted(pm, 1, [acor, lobby], shared, 0.1)
    a = walled.cell_of(LocalPoint(12.0, 20.0))
    b = walled.cell_of(LocalPoint(24.0, 12.0))
    lab = components(walled)
    assert lab[a] != lab[b]
    lab = components(opened)
    assert lab[a] == lab[b] != 0


def test_passage_cells_cover_the_door(campus):
    pm = campus.pmap
    pid = min(campus.doc.passages)
    g = render_restricted(pm, 1, list(campus.doc.passages[pid].areas), [pid], 0.1)
    cells = passage_cells(g, pm, pid)
    assert cells and all(g.is_free(c) for c in cells)
    assert g.cell_of(pm.midpoint(pid)) in cells


def test_pgm_is_deterministic(tmp_path, campus):
    pm = campus.pmap
    areas = [campus.area("Lobby"), campus.area("A Corridor")]
    pids = [p.id for p in campus.doc.passages_of(areas[0]) if areas[1] in p.areas]
    g1 = render_restricted(pm, 1, areas, pids)
    g2 = render_restricted(pm, 1, list(reversed(areas)), pids)
    assert pgm_bytes(g1) == pgm_bytes(g2)
    pgm, meta = export_pgm(g1, str(tmp_path / "out" / "lobby"))
    with open(pgm, "rb") as fh:
        data = fh.read()
    assert data == pgm_bytes(g1)
    assert data.startswith(f"P5\n{g1.width} {g1.height}\n255\n".encode())
    text = open(meta).read()
    assert "resolution: 0.05" in text and "image: lobby.pgm" in text
