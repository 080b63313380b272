"""Task graph, passage-level search and the approval loop."""

from __future__ import annotations

import math
from dataclasses import replace
from datetime import datetime
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from osmag_nav.copilot import EventMonitor, EventStore, RobotCapabilities, RuleBackend
from osmag_nav.planner import (
    W_SOFT,
    NoPathError,
    PlanningError,
    PlanRequest,
    RobotPose,
    RoundBudgetError,
    build_task_graph,
    destination_anchor,
    plan,
    plan_with_approval,
    shortest_path,
)

from conftest import loaded
from oracles import brute_force_cost, random_request


def pose_in(m, name, level=None):
    aid = m.area(name, level)
    return RobotPose(destination_anchor(m.pmap, aid, 0.1), aid, m.doc.areas[aid].level)


def oracle_check(m, req):
    try:
        tg = build_task_graph(m.graph, m.pmap, m.table, req)
    except NoPathError:
        return None, math.inf
    got = shortest_path(tg, req.costs, req.soft_avoid, W_SOFT)
    want = brute_force_cost(m, tg, req.costs, req.hard_avoid, req.soft_avoid, W_SOFT)
    return got, want


@pytest.mark.parametrize("name, n", [("campus_floor1", 40), ("multifloor", 40)])
def test_larger_maps_match_exhaustive_search(name, n):
    m = loaded(name)
    rng = np.random.default_rng(7)
    for _ in range(n):
        req = random_request(m, rng)
        got, want = oracle_check(m, req)
        assert (got.est_cost if got else math.inf) == want


@pytest.mark.parametrize("name", ["campus_floor1", "lobby_detour", "two_route", "multifloor"])
def test_heuristic_does_not_change_the_optimum(name):
    m = loaded(name)
    rng = np.random.default_rng(11)
    for _ in range(30):
        req = random_request(m, rng)
        try:
            a = plan(m.graph, m.pmap, m.table, req)
            b = plan(m.graph, m.pmap, m.table, req, use_heuristic=False)
        except NoPathError:
            continue
        assert (a is None) == (b is None)
        if a is not None:
            assert a.est_cost == pytest.approx(b.est_cost, abs=1e-9)


def test_plan_shape(campus):
    req = PlanRequest(pose_in(campus, "A101 Office"), campus.area("Robotics Training Lab"))
    p = plan(campus.graph, campus.pmap, campus.table, req)
    assert p.passages == (201, 204, 211, 215, 216)
    assert round(p.est_length, 3) == 70.394
    assert p.areas[0] == req.pose.area and p.areas[-1] == req.destination
    assert len(p.areas) == len(p.passages) + 1
    for pid, (a, b) in zip(p.passages, zip(p.areas, p.areas[1:])):
        assert set(campus.doc.passages[pid].areas) == {a, b}
    assert p.est_cost == p.est_length
    assert p.to_json()["passages"] == list(p.passages)


def test_equal_routes_break_ties_lexicographically(two_route):
    req = PlanRequest(pose_in(two_route, "Start Hall"), two_route.area("Goal Hall"))
    p = plan(two_route.graph, two_route.pmap, two_route.table, req)
    assert p.passages == (201, 202)
    assert round(p.est_length, 3) == 33.091


def test_handle_door_price_picks_the_automatic_route(two_route):
    # mirror-symmetric routes: only the door price separates them
    req = PlanRequest(pose_in(two_route, "Start Hall"), two_route.area("Goal Hall"), {201: 3.0, 203: 5.0})
    assert plan(two_route.graph, two_route.pmap, two_route.table, req).passages == (201, 202)
    req = replace(req, costs={201: 6.0, 203: 5.0})
    assert plan(two_route.graph, two_route.pmap, two_route.table, req).passages == (203, 204)


@pytest.mark.parametrize("c, expect", [(24.0, (203, 204)), (26.0, (201, 202))])
def test_soft_avoid_threshold(two_route, c, expect):
    # each passage price is paid on both edges it touches: the south route costs 2c extra,
    # the soft-avoided north corridor costs W_SOFT extra
    north = two_route.area("North Corridor")
    req = PlanRequest(pose_in(two_route, "Start Hall"), two_route.area("Goal Hall"), {203: c}, soft_avoid=frozenset({north}))
    p = plan(two_route.graph, two_route.pmap, two_route.table, req)
    assert p.passages == expect
    assert p.est_cost == pytest.approx(p.est_length + min(2 * c, W_SOFT))


def test_hard_avoid_removes_areas(lobby):
    hall = lobby.area("Lobby")
    req = PlanRequest(pose_in(lobby, "West Wing"), lobby.area("East Wing"))
    p = plan(lobby.graph, lobby.pmap, lobby.table, req)
    assert hall in p.areas
    q = plan(lobby.graph, lobby.pmap, lobby.table, replace(req, hard_avoid=frozenset({hall})))
    assert hall not in q.areas and q.est_cost > p.est_cost
    tg = build_task_graph(lobby.graph, lobby.pmap, lobby.table, replace(req, hard_avoid=frozenset({hall})))
    assert all(hall not in lobby.doc.passages[v].areas for v in tg.vertices if isinstance(v, int))
    assert all(e.area != hall for e in tg.edges)


def test_infeasible_passages_are_skipped(lobby):
    req = PlanRequest(pose_in(lobby, "West Wing"), lobby.area("East Wing"), infeasible_passages=frozenset({201}))
    p = plan(lobby.graph, lobby.pmap, lobby.table, req)
    assert 201 not in p.passages


def test_start_in_destination_goes_direct(lobby):
    pose = RobotPose(lobby.pmap.midpoint(201), lobby.area("Lobby"), 1)
    p = plan(lobby.graph, lobby.pmap, lobby.table, PlanRequest(pose, lobby.area("Lobby")))
    assert p.passages == () and p.areas == (pose.area,)
    assert p.est_length > 0


def test_request_validation(lobby):
    pose = pose_in(lobby, "West Wing")
    with pytest.raises(PlanningError, match="finite"):
        PlanRequest(pose, lobby.area("East Wing"), {201: -1.0})
    with pytest.raises(PlanningError, match="finite"):
        PlanRequest(pose, lobby.area("East Wing"), {201: math.inf})
    with pytest.raises(PlanningError, match="hard-avoided"):
        PlanRequest(pose, lobby.area("East Wing"), hard_avoid=frozenset({lobby.area("East Wing")}))
    with pytest.raises(NoPathError):
        plan(lobby.graph, lobby.pmap, lobby.table, PlanRequest(pose, lobby.area("East Wing"), hard_avoid=frozenset({pose.area})))
    with pytest.raises(PlanningError, match="unknown"):
        plan(lobby.graph, lobby.pmap, lobby.table, PlanRequest(pose, 999))


def test_walled_in_destination_reports_no_path(lobby):
    east = lobby.area("East Wing")
    req = PlanRequest(pose_in(lobby, "West Wing"), east, hard_avoid=frozenset({lobby.area("Lobby"), lobby.area("North Corridor")}))
    with pytest.raises(NoPathError):
        plan(lobby.graph, lobby.pmap, lobby.table, req)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1), st.sampled_from(sorted(loaded("lobby_detour").doc.passages)), st.floats(0.1, 500))
def test_raising_a_price_never_lowers_the_cost(seed, pid, bump):
    m = loaded("lobby_detour")
    req = random_request(m, np.random.default_rng(seed))
    try:
        base = plan(m.graph, m.pmap, m.table, req)
    except NoPathError:
        return
    costs = dict(req.costs)
    costs[pid] = costs.get(pid, 0.0) + bump
    dearer = plan(m.graph, m.pmap, m.table, replace(req, costs=costs))
    if base is None:
        assert dearer is None
    elif dearer is not None:
        assert dearer.est_cost >= base.est_cost - 1e-9


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(0, 3))
def test_avoiding_more_never_lowers_the_cost(seed, k):
    m = loaded("campus_floor1")
    req = random_request(m, np.random.default_rng(seed))
    extra = sorted(a for a in m.doc.areas if a not in (req.pose.area, req.destination))[k::4][:2]

    def cost(r):
        try:
            p = plan(m.graph, m.pmap, m.table, r)
        except NoPathError:
            return math.inf
        return math.inf if p is None else p.est_cost

    assert cost(replace(req, hard_avoid=req.hard_avoid | set(extra))) >= cost(req) - 1e-9
    assert cost(replace(req, soft_avoid=req.soft_avoid | set(extra))) >= cost(req) - 1e-9


# --------------------------------------------------------------------------
# approval loop


def party_store(lobby, start, end):
    store = EventStore()
    mon = EventMonitor(RuleBackend(), lobby.doc)
    mon.ingest(f"Party in the Lobby on 2024-06-14 from {start} to {end}.", datetime(2024, 6, 14, 9), store)
    return mon, store


def test_approval_reroutes_around_an_active_event(lobby):
    mon, store = party_store(lobby, "17:00", "23:00")
    req = PlanRequest(pose_in(lobby, "West Wing"), lobby.area("East Wing"))
    p, trace = plan_with_approval(lobby.graph, lobby.pmap, lobby.table, req, mon, store, datetime(2024, 6, 14, 19))
    assert [r.round for r in trace] == [1, 2]
    assert not trace[0].verdict.is_valid and trace[1].verdict.is_valid
    assert lobby.area("Lobby") in trace[0].plan.areas
    assert lobby.area("Lobby") not in p.areas
    assert trace[1].to_json()["verdict"]["is_valid"] is True


def test_inactive_event_does_not_veto(lobby):
    mon, store = party_store(lobby, "17:00", "23:00")
    req = PlanRequest(pose_in(lobby, "West Wing"), lobby.area("East Wing"))
    p, trace = plan_with_approval(lobby.graph, lobby.pmap, lobby.table, req, mon, store, datetime(2024, 6, 14, 12))
    assert len(trace) == 1 and lobby.area("Lobby") in p.areas


def test_without_monitor_the_first_plan_stands(lobby):
    req = PlanRequest(pose_in(lobby, "West Wing"), lobby.area("East Wing"))
    p, trace = plan_with_approval(lobby.graph, lobby.pmap, lobby.table, req)
    assert len(trace) == 1 and trace[0].verdict is None


def test_rejection_without_new_areas_stops(lobby):
    class Stubborn:
        def approve_path(self, areas, store, now):
            return SimpleNamespace(is_valid=False, areas_to_avoid=(), areas_try_to_avoid=())

    req = PlanRequest(pose_in(lobby, "West Wing"), lobby.area("East Wing"))
    with pytest.raises(NoPathError, match="without naming"):
        plan_with_approval(lobby.graph, lobby.pmap, lobby.table, req, Stubborn())


def test_round_budget(lobby):
    class Drip:
        # vetoes one area off the path per round, so the plan never changes
        def __init__(self):
            self.left = [lobby.area("North Corridor")]

        def approve_path(self, areas, store, now):
            if self.left:
                return SimpleNamespace(is_valid=False, areas_to_avoid=(self.left.pop(),), areas_try_to_avoid=())
            return SimpleNamespace(is_valid=False, areas_to_avoid=(), areas_try_to_avoid=())

    req = PlanRequest(pose_in(lobby, "West Wing"), lobby.area("East Wing"))
    with pytest.raises(RoundBudgetError):
        plan_with_approval(lobby.graph, lobby.pmap, lobby.table, req, Drip(), max_rounds=1)
    with pytest.raises(ValueError):
        plan_with_approval(lobby.graph, lobby.pmap, lobby.table, req, Drip(), max_rounds=0)


def test_vetoed_destination(lobby):
    mon, store = party_store(lobby, "17:00", "23:00")
    req = PlanRequest(pose_in(lobby, "West Wing"), lobby.area("Lobby"))
    with pytest.raises(NoPathError, match="Lobby"):
        plan_with_approval(lobby.graph, lobby.pmap, lobby.table, req, mon, store, datetime(2024, 6, 14, 19))


def test_wheeled_robot_is_kept_off_stairs(multifloor):
    m = multifloor
    mon = EventMonitor(RuleBackend(), m.doc, RobotCapabilities())
    req = PlanRequest(pose_in(m, "Hall", 1), m.area("Robot Lab"))
    p, _ = plan_with_approval(m.graph, m.pmap, m.table, req, mon, EventStore(), datetime(2024, 6, 18, 11))
    types = {m.doc.areas[a].area_type for a in p.areas}
    assert "elevator" in types and "stairs" not in types
