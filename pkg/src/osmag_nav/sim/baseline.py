"""A move_base-like baseline: plan on the whole floor, learn closed doors by bumping into them."""

from __future__ import annotations

from ..grid import GridError, astar_cells, inflate, label_areas, passage_cells, render_restricted, snap
from ..mapmodel import ProjectedMap
from ..planner import RobotPose, destination_anchor
from .executor import SIM_RESOLUTION
from .world import TrialResult, WorldState

SQRT2 = 2 ** 0.5


def floor_grid(pmap: ProjectedMap, level: int, open_pids, resolution: float = SIM_RESOLUTION):
    key = ("floor", level, tuple(sorted(open_pids)), resolution)
    if key not in pmap.cache:
        areas = sorted(a.id for a in pmap.doc.areas.values() if a.level == level)
        pmap.cache[key] = inflate(render_restricted(pmap, level, areas, sorted(open_pids), resolution))
    return pmap.cache[key]


def floor_labels(pmap: ProjectedMap, level: int, grid, resolution: float = SIM_RESOLUTION):
    key = ("floor-labels", level, resolution)
    if key not in pmap.cache:
        areas = sorted(a.id for a in pmap.doc.areas.values() if a.level == level)
        pmap.cache[key] = label_areas(grid, pmap, areas)
    return pmap.cache[key]


def count_entries(labels, start_area: int, restricted) -> int:
    """Transitions into restricted areas along a label sequence (0 = wall or door band)."""
    last = start_area
    n = 0
    for lab in labels:
        if lab == 0 or lab == last:
            continue
        if lab in restricted:
            n += 1
        last = lab
    return n


def baseline_navigate(
    world: WorldState,
    pmap: ProjectedMap,
    pose: RobotPose,
    destination: int,
    memory: set,
    config: str = "baseline",
    trial: int = 0,
    budget: int | None = None,
    resolution: float = SIM_RESOLUTION,
) -> TrialResult:
    """Drive to the destination assuming every door not in ``memory`` is open.

    The robot stops in front of a closed door it is about to enter, adds it
    to ``memory`` (mutated in place) and replans.  It never reads
    notifications, so restricted areas behind open doors are entered freely.
    """
    doc = pmap.doc
    level = pose.level
    if doc.areas[destination].level != level:
        # like move_base, the baseline has no notion of other floors
        return TrialResult(config, trial, 0.0, 0, 0, False, pose.area, [{"error": "destination on another floor"}], [])
    on_level = sorted(p.id for p in doc.passages.values() if p.level_a == level and p.level_b == level)
    budget = len(doc.passages) if budget is None else budget
    goal = destination_anchor(pmap, destination, resolution)
    pos = pose.position
    traveled = 0.0
    replans = 0
    walked_labels: list = []
    polylines: list = []
    trace: list = []
    reached = False
    labels = None

    while True:
        grid = floor_grid(pmap, level, [p for p in on_level if p not in memory], resolution)
        if labels is None:
            labels = floor_labels(pmap, level, grid, resolution)
        try:
            s, g = snap(grid, pos), snap(grid, goal)
        except GridError as exc:
            trace.append({"error": str(exc)})
            break
        path = astar_cells(grid, s, g)
        if path is None:
            trace.append({"error": "no path on the floor grid", "memory": sorted(memory)})
            break
        hidden = {}
        for pid in sorted(world.closed):
            if pid in on_level and pid not in memory:
                for c in passage_cells(grid, pmap, pid):
                    hidden.setdefault(c, pid)
        walked = [path.cells[0]]
        bumped = None
        for c in path.cells[1:]:
            if c in hidden:
                bumped = hidden[c]
                break
            walked.append(c)
        first = grid.center(walked[0])
        seg = pos.dist(first)
        for (r0, c0), (r1, c1) in zip(walked, walked[1:]):
            seg += resolution * (SQRT2 if r0 != r1 and c0 != c1 else 1.0)
        traveled += seg
        pts = [(pos.x, pos.y)] if pos.dist(first) > 1e-9 else []
        polylines.append((level, pts + [(q.x, q.y) for q in map(grid.center, walked)]))
        walked_labels += [int(labels[c]) for c in walked]
        pos = grid.center(walked[-1])
        trace.append({"cells": len(walked), "bumped": bumped})
        if bumped is None:
            reached = True
            break
        memory.add(bumped)
        replans += 1
        if replans > budget:
            trace.append({"error": "replan budget exhausted"})
            break

    entries = count_entries(walked_labels, pose.area, world.restricted_truth)
    final = destination if reached else next((lab for lab in reversed(walked_labels) if lab), pose.area)
    return TrialResult(config, trial, traveled, entries, replans, reached, final, trace, polylines)
