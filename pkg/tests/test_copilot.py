"""Copilot: name resolution, rule backend, normalizer, backends, evaluator and monitor."""

from __future__ import annotations

import json
import os
from datetime import datetime

import httpx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from osmag_nav.copilot import (
    AreaResolver,
    BackendError,
    EventMonitor,
    EventRecord,
    EventStore,
    ExperienceStats,
    LiveBackend,
    NormalizationError,
    PassageStats,
    RecordingBackend,
    ResolutionError,
    RobotCapabilities,
    RuleBackend,
    ScriptedBackend,
    UnrepairableOutputError,
    approve_path,
    call_structured,
    evaluate_passages,
    expire_events,
    ingest_notification,
    make_backend,
    normalize_llm_json,
    prompt_key,
    rule_passage_cost,
)
from osmag_nav.copilot import backends as backends_mod
from osmag_nav.copilot.normalize import extract_json_object
from osmag_nav.copilot.prompts import TASKS, build_user_prompt, load_template, payload_of, task_of
from osmag_nav.copilot.resolve import edit_similarity
from osmag_nav.copilot.rules import CAPABILITY_COST, STUBBORN_COST, event_window
from osmag_nav.mapmodel import load_osmag

from conftest import FIXTURES, map_path

CORPUS = json.load(open(os.path.join(FIXTURES, "notifications", "corpus.json"), encoding="utf-8"))
DEVIATIONS = json.load(open(os.path.join(FIXTURES, "transcripts", "format_deviations.json"), encoding="utf-8"))


@pytest.fixture(scope="module")
def resolver(campus):
    return AreaResolver(campus.doc)


def approval_prompt(doc):
    user = build_user_prompt("Planned path", "x", "summary", {"path": [], "events": [], "capabilities": {}})
    return load_template("path_approval"), user


# --------------------------------------------------------------------------
# resolver


@settings(max_examples=200, deadline=None)
@given(st.text(max_size=12), st.text(max_size=12))
def test_edit_similarity_properties(a, b):
    s = edit_similarity(a, b)
    assert 0.0 <= s <= 1.0
    assert s == edit_similarity(b, a)
    assert edit_similarity(a, a) == 1.0


@pytest.mark.parametrize(
    "text, names, how",
    [
        ("Lobby", ["Lobby"], "exact"),
        ("lobby", ["Lobby"], "casefold"),
        ("the lobby", ["Lobby"], "casefold"),
        ("room D301", ["D301 Classroom"], "room"),
        ("C105", ["Robotics Training Lab"], "room"),
        ("B sector", ["B Corridor", "B201 Seminar Room"], "sector"),
        ("sector C", ["C Corridor", "Robotics Training Lab"], "sector"),
        ("Cafeteriaa", ["Cafeteria"], "fuzzy"),
    ],
)
def test_resolver_paths(resolver, text, names, how):
    r = resolver.resolve(text)
    assert r.how == how
    assert [resolver.doc.areas[i].name for i in r.ids] == names


def test_unresolvable_name_lists_candidates(resolver):
    with pytest.raises(ResolutionError) as exc:
        resolver.resolve("Gymnasium")
    assert len(exc.value.candidates) == 3
    assert resolver.ids_for_names(["Gymnasium", "Lobby"]) == {resolver.doc.area_by_name("Lobby").id}


def test_shared_names_resolve_to_every_floor(multifloor):
    r = AreaResolver(multifloor.doc)
    assert len(r.ids("Elevator A")) == 2
    assert r.names("R201") == ["Robot Lab"]


# --------------------------------------------------------------------------
# rule backend


def test_rule_prices():
    assert rule_passage_cost("automatic") == 0.0
    assert rule_passage_cost("handle") == 5.0
    assert rule_passage_cost("elevator_door") == 10.0
    stats = PassageStats().add(True).add(False)
    assert rule_passage_cost("handle", stats.to_json()) == pytest.approx(5.0 + 100.0 / 3)
    three = PassageStats().add(True).add(False).add(False).add(False)
    assert rule_passage_cost("open", three.to_json()) == STUBBORN_COST
    assert rule_passage_cost("open", three.add(True).to_json()) < STUBBORN_COST
    assert rule_passage_cost("open", allowed=False) == CAPABILITY_COST


def test_outcome_window_keeps_recent_results():
    s = PassageStats()
    for ok in (True, False, True, True, False, False, True):
        s = s.add(ok)
    assert s.successes == 4 and s.failures == 3
    assert s.last_outcomes == (True, True, False, False, True)
    with pytest.raises(ValueError):
        PassageStats(last_outcomes=(True,) * 6)


@pytest.mark.parametrize(
    "text, now, start, end",
    [
        ("closed tomorrow", "2024-06-14T10:00", "2024-06-15T00:00", "2024-06-15T23:59:59"),
        ("closed on Monday 9am-5pm", "2024-06-14T10:00", "2024-06-17T09:00", "2024-06-17T17:00"),
        ("closed tonight", "2024-06-14T10:00", "2024-06-14T18:00", "2024-06-14T23:59:59"),
        ("closed 22:00-02:00", "2024-06-14T10:00", "2024-06-14T22:00", "2024-06-15T02:00"),
        ("closed until further notice", "2024-06-14T10:00", "2024-06-14T00:00", "2025-06-14T00:00"),
        ("closed 2024-07-01", "2024-06-14T10:00", "2024-07-01T00:00", "2024-07-01T23:59:59"),
    ],
)
def test_event_windows(text, now, start, end):
    s, e = event_window(text, datetime.fromisoformat(now))
    assert (s, e) == (datetime.fromisoformat(start), datetime.fromisoformat(end))


@pytest.mark.parametrize("item", CORPUS, ids=[c["id"] for c in CORPUS])
def test_corpus_item(item):
    doc = load_osmag(map_path(item["map"]))
    rec = ingest_notification(RuleBackend(), item["text"], datetime.fromisoformat(item["now"]), doc)
    assert (rec is not None) == item["relevant"]
    if rec is not None:
        assert sorted(rec.areas_to_avoid) == sorted(item["avoid"])
        assert rec.start.isoformat() == item["start"] and rec.end.isoformat() == item["end"]


def test_corpus_is_balanced():
    assert len(CORPUS) == 20
    assert sum(c["relevant"] for c in CORPUS) == 10


def test_sector_event_suggests_neighbouring_corridors(campus):
    text = "Fire drill in the B sector 14:00-15:00."
    rec = ingest_notification(RuleBackend(), text, datetime(2024, 6, 20, 9), campus.doc)
    assert set(rec.areas_to_avoid) == {"B Corridor", "B201 Seminar Room"}
    assert set(rec.areas_try_to_avoid) == {"A Corridor", "D Corridor"}


# --------------------------------------------------------------------------
# normalizer


@pytest.mark.parametrize("item", DEVIATIONS["outputs"], ids=[d["id"] for d in DEVIATIONS["outputs"]])
def test_deviation_is_repaired(resolver, item):
    out = normalize_llm_json(item["raw"], item["schema"], resolver)
    for key, want in item["expect"].items():
        assert out[key] == want
    assert not out.get("unresolved")


@pytest.mark.parametrize("item", DEVIATIONS["outputs"], ids=[d["id"] for d in DEVIATIONS["outputs"]])
def test_normalizer_is_idempotent(resolver, item):
    once = normalize_llm_json(item["raw"], item["schema"], resolver)
    twice = normalize_llm_json(json.dumps(once), item["schema"], resolver)
    assert twice == once


names = st.sampled_from(["Lobby", "lobby", "B sector", "room D301", "C105", "A Corridor", "Cafeteria"])


@settings(max_examples=150, deadline=None)
@given(
    st.booleans(),
    st.lists(names, max_size=4),
    st.sampled_from(["{}", "```json\n{}\n```", "Sure! {}", "{} Hope this helps."]),
    st.booleans(),
)
def test_wrapped_outputs_normalize_like_clean_ones(campus, valid, avoid, wrapper, single_quotes):
    r = AreaResolver(campus.doc)
    clean = json.dumps({"is_valid": valid, "areas_to_avoid": avoid, "areas_try_to_avoid": []})
    noisy = clean.replace('"', "'") if single_quotes else clean
    want = normalize_llm_json(clean, "path_approval", r)
    assert normalize_llm_json(wrapper.replace("{}", noisy), "path_approval", r) == want
    assert normalize_llm_json(json.dumps(want), "path_approval", r) == want


def test_unresolved_names_are_kept_aside(resolver):
    out = normalize_llm_json('{"is_valid": false, "areas_to_avoid": ["Gymnasium", "Lobby"]}', "path_approval", resolver)
    assert out["areas_to_avoid"] == ["Lobby"] and out["unresolved"] == ["Gymnasium"]


@pytest.mark.parametrize(
    "raw",
    ["I cannot help with that.", '{"is_valid": "maybe", "areas_to_avoid": []}', '{"areas_to_avoid": []}', "[1, 2]"],
)
def test_unusable_outputs_raise(resolver, raw):
    with pytest.raises(NormalizationError):
        normalize_llm_json(raw, "path_approval", resolver)


def test_extract_prefers_fenced_block():
    assert extract_json_object('noise {"a": 1} ```json\n{"b": 2}\n```') == {"b": 2}
    assert extract_json_object('text {"a": {"b": 1}} tail') == {"a": {"b": 1}}


def test_exactly_one_retry_then_error(campus):
    system, user = approval_prompt(campus.doc)
    backend = ScriptedBackend(["no json here", "still nothing", '{"is_valid": true}'])
    with pytest.raises(UnrepairableOutputError) as exc:
        call_structured(backend, system, user, "path_approval")
    assert len(backend.calls) == 2 and len(exc.value.errors) == 2
    assert "could not be used" in backend.calls[1][1]


def test_retry_recovers(campus):
    system, user = approval_prompt(campus.doc)
    backend = ScriptedBackend(["garbage", '{"is_valid": true, "areas_to_avoid": [], "areas_try_to_avoid": []}'])
    out = call_structured(backend, system, user, "path_approval")
    assert out["is_valid"] is True and len(backend.calls) == 2


def test_clean_reply_needs_one_call(campus):
    system, user = approval_prompt(campus.doc)
    backend = ScriptedBackend(['{"is_valid": true, "areas_to_avoid": [], "areas_try_to_avoid": []}'])
    call_structured(backend, system, user, "path_approval")
    assert len(backend.calls) == 1


# --------------------------------------------------------------------------
# prompts and backends


def test_templates_are_versioned():
    for task in TASKS:
        text = load_template(task)
        assert text.splitlines()[:2] == [f"task: {task}", "version: 1"]
        assert task_of(text) == task
    with pytest.raises(KeyError):
        load_template("chitchat")


def test_payload_round_trip():
    payload = {"b": [1, 2], "a": "Lobby"}
    assert payload_of(build_user_prompt("H", "body", "summary", payload)) == payload
    with pytest.raises(ValueError):
        payload_of("no context")


def test_scripted_backend_prefers_keyed_replies():
    b = ScriptedBackend(["queued"], {prompt_key("s", "u"): "keyed"})
    assert b.complete("s", "u") == "keyed"
    assert b.complete("s", "other") == "queued"
    with pytest.raises(BackendError, match="exhausted"):
        b.complete("s", "more")


def test_recording_round_trip(tmp_path, campus):
    rec = RecordingBackend(RuleBackend())
    r1 = evaluate_passages(rec, "Take this to the Cafeteria.", campus.doc)
    path = tmp_path / "t.json"
    rec.save(path)
    replay = ScriptedBackend.from_transcript(path)
    r2 = evaluate_passages(replay, "Take this to the Cafeteria.", campus.doc)
    assert r1 == r2 and len(replay.calls) == 1


def _reply(content):
    return httpx.Response(200, json={"choices": [{"message": {"content": content}}]})


def test_live_backend_request_shape():
    seen = []

    def handler(request):
        seen.append(request)
        return _reply("hello")

    b = LiveBackend("http://llm.test/v1", "m-1", "secret", transport=httpx.MockTransport(handler))
    assert b.complete("sys", "usr") == "hello"
    req = seen[0]
    assert str(req.url) == "http://llm.test/v1/chat/completions"
    assert req.headers["authorization"] == "Bearer secret"
    body = json.loads(req.content)
    assert body["model"] == "m-1" and body["temperature"] == 0
    assert [m["role"] for m in body["messages"]] == ["system", "user"]


def test_live_backend_retries_transient_errors(monkeypatch):
    monkeypatch.setattr(backends_mod.time, "sleep", lambda s: None)
    replies = [httpx.Response(503), httpx.Response(429), _reply("ok")]
    b = LiveBackend("http://llm.test", transport=httpx.MockTransport(lambda r: replies.pop(0)))
    assert b.complete("s", "u") == "ok"

    def down(request):
        raise httpx.ConnectError("refused")

    b = LiveBackend("http://llm.test", retries=1, transport=httpx.MockTransport(down))
    with pytest.raises(BackendError, match="after 2 attempts"):
        b.complete("s", "u")


def test_live_backend_client_errors_are_not_retried():
    calls = []

    def handler(request):
        calls.append(request)
        return httpx.Response(400, json={"error": "bad"})

    b = LiveBackend("http://llm.test", transport=httpx.MockTransport(handler))
    with pytest.raises(BackendError):
        b.complete("s", "u")
    assert len(calls) == 1


def test_live_backend_needs_an_endpoint(monkeypatch):
    monkeypatch.delenv(backends_mod.URL_ENV, raising=False)
    with pytest.raises(BackendError):
        LiveBackend()
    with pytest.raises(BackendError):
        make_backend("scripted")
    assert isinstance(make_backend("rule"), RuleBackend)


# --------------------------------------------------------------------------
# evaluator


def test_evaluator_finds_destination_and_prices(campus):
    pcm = evaluate_passages(RuleBackend(), "Please deliver this parcel to the Robotics Training Lab.", campus.doc)
    assert pcm.destination_area == campus.area("Robotics Training Lab")
    assert set(pcm.costs) == set(campus.doc.passages)
    handle = [p.id for p in campus.doc.passages.values() if p.door_type == "handle"]
    assert all(pcm.costs[h] == 5.0 for h in handle)


def test_evaluator_reads_experience(campus):
    stats = ExperienceStats()
    for _ in range(3):
        stats.record(213, False)
    pcm = evaluate_passages(RuleBackend(), "Go to room D301.", campus.doc, stats)
    assert pcm.destination_area == campus.area("D301 Classroom")
    assert pcm.costs[213] == STUBBORN_COST


def test_evaluator_prices_capabilities(multifloor):
    doc = multifloor.doc
    pcm = evaluate_passages(RuleBackend(), "Bring the toolbox to the Robot Lab.", doc)
    for p in doc.passages.values():
        types = {doc.areas[a].area_type for a in p.areas}
        assert (pcm.costs[p.id] == CAPABILITY_COST) == ("stairs" in types)
    no_handles = RobotCapabilities(can_open_handle_doors=False)
    with pytest.raises(ValueError):
        RobotCapabilities(usable_vertical_connectors={"stairs"})
    assert RobotCapabilities("legged", True, {"stairs", "elevator"}).allows("stairs")
    assert not no_handles.allows("stairs")


def test_ambiguous_destination_needs_a_level(multifloor):
    with pytest.raises(ResolutionError, match="Hall"):
        evaluate_passages(RuleBackend(), "Go to the Hall.", multifloor.doc)
    pcm = evaluate_passages(RuleBackend(), "Go to the Hall on level 2.", multifloor.doc)
    assert pcm.destination_area == multifloor.area("Hall", 2)


# --------------------------------------------------------------------------
# monitor


def _record(areas, start, end, rid="e1"):
    return EventRecord(rid, "text", tuple(areas), (), datetime.fromisoformat(start), datetime.fromisoformat(end))


def test_event_store_round_trip_and_expiry(tmp_path):
    store = EventStore()
    store.add(_record(["Lobby"], "2024-06-14T17:00", "2024-06-14T23:00"))
    store.add(_record(["Lobby"], "2024-06-14T17:00", "2024-06-14T23:00"))
    store.add(_record(["Cafeteria"], "2024-06-10T00:00", "2024-06-11T00:00", "e2"))
    assert len(store) == 2
    path = tmp_path / "events.json"
    store.save(path)
    assert EventStore.load(path).to_json() == store.to_json()
    assert len(EventStore.load(tmp_path / "missing.json")) == 0
    kept = expire_events(store, datetime(2024, 6, 12))
    assert [r.id for r in kept.records] == ["e1"]
    assert [r.id for r in store.active(datetime(2024, 6, 14, 18))] == ["e1"]
    with pytest.raises(ValueError):
        _record(["Lobby"], "2024-06-15T00:00", "2024-06-14T00:00")
    with pytest.raises(ValueError):
        _record([], "2024-06-14T00:00", "2024-06-15T00:00")


def test_careless_approval_is_overridden(campus):
    store = EventStore([_record(["Lobby"], "2024-06-14T17:00", "2024-06-14T23:00")])
    lazy = ScriptedBackend(['{"is_valid": true, "areas_to_avoid": [], "areas_try_to_avoid": []}'])
    path = [campus.area("A Corridor"), campus.area("Lobby"), campus.area("Cafeteria")]
    v = approve_path(lazy, path, store, datetime(2024, 6, 14, 19), RobotCapabilities(), campus.doc)
    assert not v.is_valid and v.overridden
    assert v.areas_to_avoid == (campus.area("Lobby"),)


def test_off_path_rejection_does_not_block(campus):
    store = EventStore()
    picky = ScriptedBackend(['{"is_valid": false, "areas_to_avoid": ["D301"], "areas_try_to_avoid": []}'])
    path = [campus.area("A Corridor"), campus.area("Lobby")]
    v = approve_path(picky, path, store, datetime(2024, 6, 14, 19), RobotCapabilities(), campus.doc)
    assert v.is_valid and v.overridden


def test_unrepairable_approval_falls_back_to_rules(campus):
    store = EventStore([_record(["Lobby"], "2024-06-14T17:00", "2024-06-14T23:00")])
    broken = ScriptedBackend(["nope", "nope"])
    path = [campus.area("A Corridor"), campus.area("Lobby")]
    v = approve_path(broken, path, store, datetime(2024, 6, 14, 19), RobotCapabilities(), campus.doc)
    assert not v.is_valid and campus.area("Lobby") in v.areas_to_avoid
    assert len(broken.calls) == 2


def test_monitor_flags_unresolved_areas(campus):
    odd = ScriptedBackend(['{"relevant": true, "areas_to_avoid": ["Gymnasium"], "areas_try_to_avoid": []}'])
    mon = EventMonitor(odd, campus.doc)
    rec = mon.ingest("Gymnasium closed today.", datetime(2024, 6, 14, 9), EventStore())
    assert rec.areas_to_avoid == ("Gymnasium",) and rec.unresolved == ("Gymnasium",)
    with pytest.raises(ValueError):
        mon.ingest("   ", datetime(2024, 6, 14, 9), EventStore())
