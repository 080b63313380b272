"""Shared fixtures: shipped maps, projected maps, distance tables and area graphs."""

from __future__ import annotations

import os

import pytest

from osmag_nav.areagraph import build_area_graph, precompute_distances
from osmag_nav.mapmodel import load_osmag, project

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
FIXTURES = os.path.join(ROOT, "fixtures")
MAPS = os.path.join(FIXTURES, "maps")
MAP_NAMES = ("campus_floor1", "chain3", "lobby_detour", "multifloor", "two_route", "u_corridor")

# lines collected by the acceptance suite, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def map_path(name: str) -> str:
    return os.path.join(MAPS, f"{name}.osm")


class Loaded:
    """A map with its projection, 0.1 m distance table and area graph."""

    def __init__(self, name: str):
        self.name = name
        self.doc = load_osmag(map_path(name))
        self.pmap = project(self.doc)
        self.table = precompute_distances(self.pmap)
        self.graph = build_area_graph(self.pmap, self.table)

    def area(self, name: str, level: int | None = None) -> int:
        return self.doc.area_by_name(name, level).id


_LOADED: dict = {}


def loaded(name: str) -> Loaded:
    if name not in _LOADED:
        _LOADED[name] = Loaded(name)
    return _LOADED[name]


@pytest.fixture(scope="session")
def campus() -> Loaded:
    return loaded("campus_floor1")


@pytest.fixture(scope="session")
def two_route() -> Loaded:
    return loaded("two_route")


@pytest.fixture(scope="session")
def lobby() -> Loaded:
    return loaded("lobby_detour")


@pytest.fixture(scope="session")
def multifloor() -> Loaded:
    return loaded("multifloor")


@pytest.fixture(scope="session")
def chain3() -> Loaded:
    return loaded("chain3")


@pytest.fixture(scope="session")
def u_corridor() -> Loaded:
    return loaded("u_corridor")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
