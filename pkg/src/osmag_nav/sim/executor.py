"""Passage-by-passage task execution with failure-driven replanning.

Each leg drives from the current position to the next passage midpoint on a
grid restricted to the current area with only the incoming and outgoing
passages open, so the robot cannot stray off the approved plan.  Door state
is consulted only when the robot arrives at a passage.
"""

from __future__ import annotations

import logging

from ..grid import GridError, astar_cells, inflate, render_restricted, snap
from ..mapmodel import LocalPoint, ProjectedMap
from ..planner import PlanningError, RobotPose, destination_anchor
from .world import ExperienceLedger, TrialResult, WorldState

log = logging.getLogger(__name__)

SIM_RESOLUTION = 0.1


def leg_grid(pmap: ProjectedMap, area_id: int, open_pids, resolution: float = SIM_RESOLUTION):
    key = ("leg", area_id, tuple(sorted(set(open_pids))), resolution)
    if key not in pmap.cache:
        level = pmap.doc.areas[area_id].level
        pmap.cache[key] = inflate(render_restricted(pmap, level, [area_id], sorted(set(open_pids)), resolution))
    return pmap.cache[key]


def drive(grid, start: LocalPoint, goal: LocalPoint):
    """Grid drive between two points: (meters, polyline, end point) or None.

    A start off the lattice (or on a blocked cell) is joined to the first
    free cell by a straight connector so that consecutive segments meet.
    """
    try:
        s = snap(grid, start)
        g = snap(grid, goal)
    except GridError:
        return None
    path = astar_cells(grid, s, g)
    if path is None:
        return None
    first = grid.center(s)
    connector = start.dist(first)
    pts = [(start.x, start.y)] if connector > 1e-9 else []
    pts += [(p.x, p.y) for p in map(grid.center, path.cells)]
    return connector + path.length, pts, grid.center(path.cells[-1])


def _unpack(result):
    if isinstance(result, tuple):
        plan, rounds = result
        return plan, [r.to_json() if hasattr(r, "to_json") else r for r in rounds]
    return result, []


def execute_task(
    plan_source,
    world: WorldState,
    ledger: ExperienceLedger,
    pmap: ProjectedMap,
    pose: RobotPose,
    destination: int,
    task_id: str = "task",
    config: str = "full",
    trial: int = 0,
    budget: int | None = None,
    resolution: float = SIM_RESOLUTION,
) -> TrialResult:
    """Follow plans from ``plan_source(pose, infeasible)`` until arrival or exhaustion.

    ``plan_source`` returns a PathPlan, a ``(PathPlan, approval_rounds)``
    pair, or ``None``/raises PlanningError when no path remains.
    """
    doc = pmap.doc
    budget = len(doc.passages) if budget is None else budget
    pos, area = pose.position, pose.area
    infeasible: set = set()
    traveled = 0.0
    entries = replans = 0
    trace: list = []
    polylines: list = []
    reached = False

    while True:
        try:
            plan, rounds = _unpack(plan_source(RobotPose(pos, area, doc.areas[area].level), frozenset(infeasible)))
        except PlanningError as exc:
            trace.append({"error": str(exc)})
            break
        if plan is None:
            trace.append({"error": "no path"})
            break
        trace.append({"plan": plan.to_json(), "approval": rounds})

        failed = None
        for k, pid in enumerate(plan.passages):
            here, there = plan.areas[k], plan.areas[k + 1]
            opened = [pid] if k == 0 else [plan.passages[k - 1], pid]
            leg = drive(leg_grid(pmap, here, opened, resolution), pos, pmap.midpoint(pid))
            if leg is None:
                log.warning("cannot reach passage %s inside area %s", pid, here)
                failed = pid
                break
            length, pts, pos = leg
            traveled += length
            polylines.append((doc.areas[here].level, pts))
            if not world.is_open(pid):
                ledger.append(task_id, pid, False)
                failed = pid
                break
            ledger.append(task_id, pid, True)
            area = there
            if there in world.restricted_truth:
                entries += 1
        if failed is not None:
            infeasible.add(failed)
            replans += 1
            if replans > budget:
                trace.append({"error": "replan budget exhausted"})
                break
            continue

        opened = [plan.passages[-1]] if plan.passages else []
        anchor = destination_anchor(pmap, destination, resolution)
        leg = drive(leg_grid(pmap, area, opened, resolution), pos, anchor)
        if leg is None:
            trace.append({"error": "destination anchor unreachable"})
            break
        length, pts, pos = leg
        traveled += length
        polylines.append((doc.areas[area].level, pts))
        reached = area == destination
        break

    return TrialResult(config, trial, traveled, entries, replans, reached, area, trace, polylines)
