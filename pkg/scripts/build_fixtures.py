"""Regenerate the shipped osmAG fixture maps under fixtures/maps/.

Coordinates are meters in the map's local frame; MapBuilder converts them to
lat/lon around a fixed origin.  Run from the repo root:

    python3 scripts/build_fixtures.py
"""

from __future__ import annotations

import argparse
import os

from osmag_nav.builder import MapBuilder
from osmag_nav.mapmodel import save_osmag, validate


def campus_floor1():
    """One floor of a teaching building: four lettered sectors around a lobby."""
    b = MapBuilder()
    walk = b.rect("South Walkway", "corridor", 0, 0, 60, 4)
    a102 = b.rect("A102 Storage", "room", 0, 4, 10, 22, tags={"ref": "A102"})
    a101 = b.rect("A101 Office", "room", 0, 22, 10, 40, tags={"ref": "A101"})
    acor = b.rect("A Corridor", "corridor", 10, 4, 14, 40)
    lobby = b.rect("Lobby", "lobby", 14, 4, 34, 20)
    b201 = b.rect("B201 Seminar Room", "room", 14, 20, 34, 34, tags={"ref": "B201"})
    bcor = b.rect("B Corridor", "corridor", 14, 34, 46, 40)
    caf = b.rect("Cafeteria", "room", 34, 4, 46, 34)
    ccor = b.rect("C Corridor", "corridor", 46, 4, 50, 24)
    dcor = b.rect("D Corridor", "corridor", 46, 24, 50, 40)
    lab = b.rect("Robotics Training Lab", "room", 50, 4, 60, 24, tags={"ref": "C105", "osmAG:sector": "C"})
    d301 = b.rect("D301 Classroom", "room", 50, 24, 60, 40, tags={"ref": "D301"})

    b.passage(a101, acor, (10, 30), (10, 31.5), "handle")
    b.passage(a102, acor, (10, 12), (10, 13.5), "handle")
    b.passage(acor, lobby, (14, 10), (14, 11.5), "automatic")
    b.passage(acor, bcor, (14, 36), (14, 38), "open")
    b.passage(acor, walk, (11, 4), (13, 4), "automatic")
    b.passage(lobby, walk, (23, 4), (25, 4), "automatic")
    b.passage(lobby, b201, (23, 20), (24.5, 20), "handle")
    b.passage(b201, bcor, (23, 34), (24.5, 34), "handle")
    b.passage(lobby, caf, (34, 10), (34, 12), "open")
    b.passage(caf, ccor, (46, 14), (46, 15.5), "handle")
    b.passage(bcor, dcor, (46, 36), (46, 38), "open")
    b.passage(walk, ccor, (47, 4), (49, 4), "automatic")
    b.passage(ccor, lab, (50, 10), (50, 11.5), "automatic")
    b.passage(dcor, ccor, (47, 24), (49, 24), "open")
    b.passage(dcor, d301, (50, 30), (50, 31.5), "handle")
    b.passage(d301, lab, (54, 24), (55.5, 24), "handle")
    return b.build()


def two_route():
    """Two mirror-image corridors between a start hall and a goal hall."""
    b = MapBuilder()
    s = b.rect("Start Hall", "corridor", 0, 0, 4, 24)
    g = b.rect("Goal Hall", "corridor", 24, 0, 28, 24)
    north = b.rect("North Corridor", "corridor", 4, 16, 24, 20)
    south = b.rect("South Corridor", "corridor", 4, 4, 24, 8)
    b.passage(s, north, (4, 17), (4, 19), "automatic")
    b.passage(north, g, (24, 17), (24, 19), "automatic")
    b.passage(s, south, (4, 5), (4, 7), "handle")
    b.passage(south, g, (24, 5), (24, 7), "automatic")
    return b.build()


def chain3():
    b = MapBuilder()
    w = b.rect("West Room", "room", 0, 0, 8, 8)
    m = b.rect("Middle Corridor", "corridor", 8, 2, 20, 6)
    e = b.rect("East Room", "room", 20, 0, 28, 8)
    b.passage(w, m, (8, 3), (8, 5), "automatic")
    b.passage(m, e, (20, 3), (20, 5), "automatic")
    return b.build()


def lobby_detour():
    """Straight route through a lobby, longer detour through a north corridor."""
    b = MapBuilder()
    w = b.rect("West Wing", "room", 0, 0, 10, 10)
    lobby = b.rect("Lobby", "lobby", 10, 0, 30, 10)
    e = b.rect("East Wing", "room", 30, 0, 40, 10)
    north = b.rect("North Corridor", "corridor", 0, 10, 40, 14)
    b.passage(w, lobby, (10, 4), (10, 6), "automatic")
    b.passage(lobby, e, (30, 4), (30, 6), "automatic")
    b.passage(w, north, (4, 10), (6, 10), "automatic")
    b.passage(lobby, north, (19, 10), (21, 10), "automatic")
    b.passage(e, north, (34, 10), (36, 10), "automatic")
    return b.build()


def multifloor():
    """Two floors joined by stairs and two elevators; the lab is upstairs."""
    b = MapBuilder()
    ids = {}
    for lv in (1, 2):
        ids["hall", lv] = b.rect("Hall", "corridor", 0, 0, 30, 10, level=lv)
        ids["stairs", lv] = b.rect("Stairs", "stairs", 0, 10, 6, 16, level=lv)
        ids["ea", lv] = b.rect("Elevator A", "elevator", 12, 10, 16, 14, level=lv)
        ids["eb", lv] = b.rect("Elevator B", "elevator", 22, 10, 26, 14, level=lv)
    lab = b.rect("Robot Lab", "room", 6, 10, 12, 20, level=2, tags={"ref": "R201"})
    for lv in (1, 2):
        b.passage(ids["hall", lv], ids["stairs", lv], (2, 10), (4, 10), "open")
        b.passage(ids["hall", lv], ids["ea", lv], (13, 10), (15, 10), "elevator_door")
        b.passage(ids["hall", lv], ids["eb", lv], (23, 10), (25, 10), "elevator_door")
    b.passage(ids["stairs", 1], ids["stairs", 2], (2, 16), (4, 16), "open")
    b.passage(ids["ea", 1], ids["ea", 2], (13, 14), (15, 14), "open")
    b.passage(ids["eb", 1], ids["eb", 2], (23, 14), (25, 14), "open")
    b.passage(ids["hall", 2], lab, (7, 10), (9, 10), "automatic")
    return b.build()


def u_corridor():
    """A concave area whose centroid falls in the notch."""
    b = MapBuilder()
    u = b.area("U Corridor", "corridor", [(0, 0), (30, 0), (30, 30), (20, 30), (20, 10), (10, 10), (10, 30), (0, 30)])
    left = b.rect("Left Room", "room", 0, 30, 10, 36)
    right = b.rect("Right Room", "room", 20, 30, 30, 36)
    b.passage(u, left, (4, 30), (6, 30), "automatic")
    b.passage(u, right, (24, 30), (26, 30), "automatic")
    return b.build()


FIXTURES = {
    "campus_floor1": campus_floor1,
    "two_route": two_route,
    "chain3": chain3,
    "lobby_detour": lobby_detour,
    "multifloor": multifloor,
    "u_corridor": u_corridor,
}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=os.path.join("fixtures", "maps"))
    args = ap.parse_args(argv)
    os.makedirs(args.out, exist_ok=True)
    for name, fn in FIXTURES.items():
        doc = fn()
        problems = validate(doc)
        if problems:
            raise SystemExit(f"{name}: {problems}")
        path = os.path.join(args.out, f"{name}.osm")
        save_osmag(doc, path)
        print(f"{path}: {len(doc.areas)} areas, {len(doc.passages)} passages")


if __name__ == "__main__":
    main()
