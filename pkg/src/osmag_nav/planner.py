"""Passage-level path planning over the area graph.

A task graph adds a virtual start vertex (the robot pose) and a virtual
destination vertex (an interior anchor of the goal area) to the precomputed
passage graph, after removing passages that border hard-avoided areas.
Edge ``(i, j)`` through area ``a`` costs ``d_ij + pc_i + pc_j`` plus a fixed
surcharge when ``a`` is soft-avoided.

Search states are ``(passage, area entered by crossing it)``: a path must
cross each passage it visits, so the next edge always runs through the area
on the far side.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .areagraph import AreaGraph, IntraAreaDistanceTable
from .grid import FREE, GridError, area_grid, grid_astar, points_in_polygon
from .mapmodel import LocalPoint, ProjectedMap

W_SOFT = 50.0
START = "v_s"
DEST = "v_d"


class PlanningError(RuntimeError):
    pass


class NoPathError(PlanningError):
    def __init__(self, message: str, avoid: frozenset = frozenset()):
        super().__init__(message)
        self.avoid = frozenset(avoid)


class RoundBudgetError(PlanningError):
    pass


@dataclass(frozen=True)
class RobotPose:
    position: LocalPoint
    area: int
    level: int


@dataclass(frozen=True)
class PlanRequest:
    pose: RobotPose
    destination: int
    costs: dict = field(default_factory=dict)  # passage id -> pc >= 0
    hard_avoid: frozenset = frozenset()
    soft_avoid: frozenset = frozenset()
    infeasible_passages: frozenset = frozenset()

    def __post_init__(self):
        if self.destination in self.hard_avoid:
            raise PlanningError(f"destination {self.destination} is hard-avoided")
        for pid, pc in self.costs.items():
            if not (pc >= 0 and math.isfinite(pc)):
                raise PlanningError(f"passage cost for {pid} must be finite and >= 0, got {pc}")


@dataclass(frozen=True)
class TaskGraph:
    base: AreaGraph
    start_area: int
    dest_area: int
    start_point: LocalPoint
    anchor: LocalPoint
    start_edges: dict  # passage -> meters from the pose
    dest_edges: dict  # passage -> meters to the anchor
    direct: float | None  # v_s -> v_d when start and destination share an area
    removed_vertices: frozenset
    hard_avoid: frozenset
    edges: tuple  # surviving base edges (E')
    adjacency: dict = field(compare=False, repr=False)
    sides: dict = field(compare=False, repr=False)  # passage -> (area_a, area_b)
    midpoints: dict = field(compare=False, repr=False)
    resolution: float = 0.1

    @property
    def vertices(self) -> tuple:
        kept = tuple(v for v in self.base.vertices if v not in self.removed_vertices)
        return kept + (START, DEST)


@dataclass(frozen=True)
class PathPlan:
    passages: tuple
    areas: tuple
    est_cost: float
    est_length: float

    def to_json(self) -> dict:
        return {
            "passages": list(self.passages),
            "areas": list(self.areas),
            "est_cost": round(self.est_cost, 6),
            "est_length": round(self.est_length, 6),
        }


def destination_anchor(pmap: ProjectedMap, area_id: int, resolution: float) -> LocalPoint:
    """Polygon centroid when it is a free interior cell, else the free cell farthest from walls."""
    key = ("anchor", area_id, resolution)
    if key in pmap.cache:
        return pmap.cache[key]
    ring = pmap.ring_xy(area_id)
    a = cx = cy = 0.0
    for (x0, y0), (x1, y1) in zip(ring, ring[1:]):
        w = x0 * y1 - x1 * y0
        a += w
        cx += (x0 + x1) * w
        cy += (y0 + y1) * w
    centroid = LocalPoint(cx / (3 * a), cy / (3 * a))
    grid = area_grid(pmap, area_id, resolution)
    cell = grid.cell_of(centroid)
    inside = points_in_polygon(ring, np.array([centroid.x]), np.array([centroid.y]))[0]
    if inside and grid.is_free(cell):
        anchor = centroid
    else:
        dist = ndimage.distance_transform_edt(grid.cells == FREE)
        best = np.argwhere(dist == dist.max())[0]
        anchor = grid.center((int(best[0]), int(best[1])))
    pmap.cache[key] = anchor
    return anchor


def _grid_distance(pmap, area_id, a: LocalPoint, b: LocalPoint, resolution) -> float | None:
    key = ("dist", area_id, a, b, resolution)
    if key not in pmap.cache:
        try:
            path = grid_astar(area_grid(pmap, area_id, resolution), a, b)
        except GridError:
            path = None
        pmap.cache[key] = None if path is None else path.length
    return pmap.cache[key]


def _describe(pmap: ProjectedMap, area_ids) -> str:
    areas = pmap.doc.areas
    return "[" + ", ".join(f"{areas[a].name} ({a})" if a in areas else str(a) for a in sorted(area_ids)) + "]"


def build_task_graph(
    graph: AreaGraph,
    pmap: ProjectedMap,
    table: IntraAreaDistanceTable,
    req: PlanRequest,
    remove_vertices: bool = True,
) -> TaskGraph:
    doc = pmap.doc
    if req.pose.area not in doc.areas:
        raise PlanningError(f"unknown start area {req.pose.area}")
    if req.destination not in doc.areas:
        raise PlanningError(f"unknown destination area {req.destination}")
    hard = frozenset(req.hard_avoid)
    if req.pose.area in hard:
        raise NoPathError(f"start area {req.pose.area} is hard-avoided; avoid set {_describe(pmap, hard)}", hard)
    res = table.resolution

    removed = set(req.infeasible_passages)
    if remove_vertices:
        removed.update(p.id for p in doc.passages.values() if hard.intersection(p.areas))
    removed = frozenset(removed)

    edges = tuple(e for e in graph.edges if e.area not in hard and e.i not in removed and e.j not in removed)
    adjacency: dict = {}
    for e in edges:
        adjacency.setdefault(e.i, []).append((e.j, e.area, e.distance))
        adjacency.setdefault(e.j, []).append((e.i, e.area, e.distance))

    start_edges = {}
    for p in doc.passages_of(req.pose.area):
        if p.id in removed:
            continue
        d = _grid_distance(pmap, req.pose.area, req.pose.position, pmap.midpoint(p.id), res)
        if d is not None:
            start_edges[p.id] = d

    anchor = destination_anchor(pmap, req.destination, res)
    dest_edges = {}
    for p in doc.passages_of(req.destination):
        if p.id in removed:
            continue
        d = _grid_distance(pmap, req.destination, pmap.midpoint(p.id), anchor, res)
        if d is not None:
            dest_edges[p.id] = d

    direct = None
    if req.pose.area == req.destination:
        direct = _grid_distance(pmap, req.destination, req.pose.position, anchor, res)
    elif not dest_edges:
        raise NoPathError(
            f"destination {req.destination} has no remaining passages after excluding areas {_describe(pmap, hard)}", hard
        )

    sides = {pid: p.areas for pid, p in doc.passages.items()}
    mids = {pid: pmap.midpoint(pid) for pid in doc.passages}
    return TaskGraph(
        base=graph,
        start_area=req.pose.area,
        dest_area=req.destination,
        start_point=req.pose.position,
        anchor=anchor,
        start_edges=start_edges,
        dest_edges=dest_edges,
        direct=direct,
        removed_vertices=removed,
        hard_avoid=hard,
        edges=edges,
        adjacency={v: tuple(sorted(n)) for v, n in adjacency.items()},
        sides=sides,
        midpoints=mids,
        resolution=res,
    )


def _cross(tg: TaskGraph, pid: int, from_area: int) -> int:
    a, b = tg.sides[pid]
    return b if from_area == a else a


def shortest_path(
    tg: TaskGraph,
    costs=None,
    soft_avoid=frozenset(),
    w_soft: float = W_SOFT,
    use_heuristic: bool = True,
) -> PathPlan | None:
    """Minimum-cost passage sequence from the pose to the destination anchor.

    Ties on cost are broken by the lexicographically smaller passage sequence.
    """
    pc = dict(getattr(costs, "costs", costs) or {})
    soft = frozenset(soft_avoid)
    slack = 2 * tg.resolution

    def h(point: LocalPoint) -> float:
        if not use_heuristic:
            return 0.0
        return max(0.0, point.dist(tg.anchor) - slack)

    # state: START | DEST | (passage, area entered)
    best: dict = {START: 0.0}
    heap = [(h(tg.start_point), (), 0.0, 0.0, START, ())]
    while heap:
        f, seq, g, length, state, areas = heapq.heappop(heap)
        if state == DEST:
            return PathPlan(seq, (tg.start_area,) + areas, g, length)
        if best.get(state, math.inf) < g:
            continue
        succ = []
        if state == START:
            for pid, d in sorted(tg.start_edges.items()):
                succ.append(((pid, _cross(tg, pid, tg.start_area)), pid, d + pc.get(pid, 0.0), d))
            if tg.direct is not None:
                succ.append((DEST, None, tg.direct, tg.direct))
        else:
            pid, here = state
            for nxt, via, d in tg.adjacency.get(pid, ()):
                if via != here or nxt in seq:
                    continue
                cost = d + pc.get(pid, 0.0) + pc.get(nxt, 0.0) + (w_soft if via in soft else 0.0)
                succ.append(((nxt, _cross(tg, nxt, via)), nxt, cost, d))
            if here == tg.dest_area and pid in tg.dest_edges:
                d = tg.dest_edges[pid]
                succ.append((DEST, None, d + pc.get(pid, 0.0), d))
        for nstate, pid, cost, d in succ:
            ng = g + cost
            if ng > best.get(nstate, math.inf):
                continue
            best[nstate] = ng
            if nstate == DEST:
                heapq.heappush(heap, (ng, seq, ng, length + d, DEST, areas))
            else:
                nseq = seq + (pid,)
                hv = h(tg.midpoints[pid])
                heapq.heappush(heap, (ng + hv, nseq, ng, length + d, nstate, areas + (nstate[1],)))
    return None


def plan(graph, pmap, table, req: PlanRequest, w_soft: float = W_SOFT, use_heuristic: bool = True):
    tg = build_task_graph(graph, pmap, table, req)
    return shortest_path(tg, req.costs, req.soft_avoid, w_soft, use_heuristic)


@dataclass
class ApprovalRound:
    round: int
    plan: PathPlan
    verdict: object

    def to_json(self) -> dict:
        v = self.verdict
        return {
            "round": self.round,
            "plan": self.plan.to_json(),
            "verdict": v.to_json() if hasattr(v, "to_json") else v,
        }


def plan_with_approval(
    graph,
    pmap,
    table,
    req: PlanRequest,
    monitor=None,
    store=None,
    now=None,
    max_rounds: int = 10,
    w_soft: float = W_SOFT,
):
    """Plan, submit the area sequence for approval, fold vetoes into the request, repeat.

    ``monitor`` needs ``approve_path(area_ids, store, now) -> verdict`` where the
    verdict has ``is_valid``, ``areas_to_avoid`` and ``areas_try_to_avoid``
    (area ids).  ``monitor=None`` approves every plan.
    """
    if max_rounds < 1:
        raise ValueError("max_rounds must be >= 1")
    budget = min(max_rounds, len(pmap.doc.areas))
    hard = set(req.hard_avoid)
    soft = set(req.soft_avoid)
    trace: list[ApprovalRound] = []
    for rnd in range(1, budget + 1):
        if req.destination in hard:
            raise NoPathError(f"destination {req.destination} is vetoed; avoid set {_describe(pmap, hard)}", frozenset(hard))
        cur = PlanRequest(req.pose, req.destination, req.costs, frozenset(hard), frozenset(soft), req.infeasible_passages)
        result = plan(graph, pmap, table, cur, w_soft)
        if result is None:
            raise NoPathError(f"no path after excluding areas {_describe(pmap, hard)}", frozenset(hard))
        if monitor is None:
            trace.append(ApprovalRound(rnd, result, None))
            return result, trace
        verdict = monitor.approve_path(list(result.areas), store, now)
        trace.append(ApprovalRound(rnd, result, verdict))
        if verdict.is_valid:
            return result, trace
        new_hard = set(verdict.areas_to_avoid) - hard
        hard |= set(verdict.areas_to_avoid)
        soft |= set(verdict.areas_try_to_avoid)
        if not new_hard:
            raise NoPathError(f"monitor rejected the plan without naming new areas; avoid set {_describe(pmap, hard)}", frozenset(hard))
    raise RoundBudgetError(f"no approved plan within {budget} rounds; avoid set {_describe(pmap, hard)}")
