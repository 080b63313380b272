"""Command line entry point: ``python3 -m osmag_nav <command> ...``."""

from __future__ import annotations

import argparse
import glob
import json
import logging
import os
import random
import sys
from datetime import datetime

import numpy as np

from .areagraph import build_area_graph, load_or_compute
from .copilot import (
    AreaResolver,
    EventMonitor,
    EventStore,
    RobotCapabilities,
    evaluate_passages,
    ingest_notification,
    make_backend,
)
from .grid import EXPORT_RESOLUTION, PRECOMPUTE_RESOLUTION, export_pgm, inflate, points_in_polygon, render_restricted
from .mapmodel import LocalPoint, MapError, format_violations, load_osmag, project, validate
from .planner import PlanningError, PlanRequest, RobotPose, destination_anchor, plan_with_approval
from .sim import CONFIGS, BenchConfig, load_case, run_case, summarize, write_run
from .sim.bench import results_csv


def _now(value: str | None) -> datetime:
    return datetime.fromisoformat(value) if value else datetime.now().replace(microsecond=0)


def _table_path(args, map_path: str) -> str:
    stem = os.path.splitext(os.path.basename(map_path))[0]
    return os.path.join(args.out_dir, f"{stem}.dist")


def _area_list(resolver: AreaResolver, doc, text: str) -> list[int]:
    out = []
    for item in filter(None, (s.strip() for s in text.split(","))):
        ids = [int(item)] if item.isdigit() and int(item) in doc.areas else resolver.ids(item)
        out += [i for i in ids if i not in out]
    return out


def _pose(pmap, resolver, spec: str, level: int) -> RobotPose:
    doc = pmap.doc
    parts = spec.split(",")
    if len(parts) == 2:
        try:
            x, y = float(parts[0]), float(parts[1])
        except ValueError:
            x = None
        if x is not None:
            for a in sorted(doc.areas.values(), key=lambda a: a.id):
                ring = pmap.ring_xy(a.id)
                if a.level == level and points_in_polygon(ring, np.array([x]), np.array([y]))[0]:
                    return RobotPose(LocalPoint(x, y), a.id, level)
            raise SystemExit(f"point {spec} is not inside any level-{level} area")
    ids = resolver.ids(spec)
    if len(ids) > 1:
        ids = [i for i in ids if doc.areas[i].level == level] or ids
    aid = ids[0]
    return RobotPose(destination_anchor(pmap, aid, PRECOMPUTE_RESOLUTION), aid, doc.areas[aid].level)


def cmd_validate(args) -> int:
    doc = load_osmag(args.map)
    problems = validate(doc)
    if problems:
        sys.stdout.write(format_violations(problems))
        return 1
    print(f"OK {args.map}: {len(doc.areas)} areas, {len(doc.passages)} passages")
    return 0


def cmd_precompute(args) -> int:
    doc = load_osmag(args.map)
    pmap = project(doc)
    os.makedirs(args.out_dir, exist_ok=True)
    path = _table_path(args, args.map)
    table = load_or_compute(pmap, path, args.resolution)
    print(f"{path}: {len(table)} entries, hash {table.map_hash}, resolution {table.resolution}")
    return 0


def cmd_plan(args) -> int:
    doc = load_osmag(args.map)
    pmap = project(doc)
    resolver = AreaResolver(doc)
    os.makedirs(args.out_dir, exist_ok=True)
    table = load_or_compute(pmap, _table_path(args, args.map))
    graph = build_area_graph(pmap, table)
    backend = make_backend(args.backend, args.transcript)
    caps = RobotCapabilities()
    pose = _pose(pmap, resolver, args.from_, args.level)
    costs: dict = {}
    if args.instruction:
        pcm = evaluate_passages(backend, args.instruction, doc, caps=caps, resolver=resolver)
        costs, dest = pcm.costs, pcm.destination_area
    else:
        if not args.to:
            raise SystemExit("give --to or --instruction")
        dest = _pose(pmap, resolver, args.to, args.level).area
    store = EventStore.load(args.events) if args.events else EventStore()
    monitor = EventMonitor(backend, doc, caps, resolver)
    try:
        plan, trace = plan_with_approval(graph, pmap, table, PlanRequest(pose, dest, costs), monitor, store, _now(args.now))
    except PlanningError as exc:
        print(json.dumps({"error": str(exc)}))
        return 2
    out = plan.to_json()
    out["trace"] = [{"round": r.round, "verdict": r.verdict.to_json()} for r in trace]
    print(json.dumps(out, indent=1))
    return 0


def cmd_ingest(args) -> int:
    doc = load_osmag(args.map)
    backend = make_backend(args.backend, args.transcript)
    store = EventStore.load(args.events)
    if args.text == "-":
        texts = [line.strip() for line in sys.stdin if line.strip()]
    else:
        with open(args.text, encoding="utf-8") as fh:
            texts = [line.strip() for line in fh if line.strip()]
    now = _now(args.now)
    for text in texts:
        rec = ingest_notification(backend, text, now, doc, store)
        print(json.dumps({"text": text, "record": rec.to_json() if rec else None}))
    store.save(args.events)
    return 0


def cmd_render(args) -> int:
    doc = load_osmag(args.map)
    pmap = project(doc)
    resolver = AreaResolver(doc)
    areas = _area_list(resolver, doc, args.areas)
    pids = [int(p) for p in args.passages.split(",") if p.strip()] if args.passages else []
    level = doc.areas[areas[0]].level if args.level is None else args.level
    grid = render_restricted(pmap, level, areas, pids, args.resolution)
    if args.inflate:
        grid = inflate(grid)
    pgm, meta = export_pgm(grid, args.out)
    print(f"wrote {pgm} and {meta} ({grid.width}x{grid.height})")
    return 0


def cmd_simulate(args) -> int:
    case = load_case(args.case)
    backend = make_backend(args.backend, args.transcript)
    run = run_case(case, [args.config], backend, BenchConfig(table_dir=os.path.join(args.out_dir, "tables")))
    write_run(run, args.out_dir)
    sys.stdout.write(results_csv(run.results[args.config]))
    return 0


def cmd_bench(args) -> int:
    paths = sorted(glob.glob(os.path.join(args.case_dir, "*.yaml")))
    if not paths:
        raise SystemExit(f"no case files in {args.case_dir}")
    configs = list(CONFIGS) if args.all else args.configs.split(",")
    cfg = BenchConfig(table_dir=os.path.join(args.out_dir, "tables"))
    runs = []
    for p in paths:
        case = load_case(p)
        logging.info("running %s", case.name)
        runs.append(run_case(case, configs, make_backend(args.backend, args.transcript), cfg))
    print(summarize(runs, args.out_dir))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="osmag-nav", description="Area-graph navigation with a chat-model copilot.")
    ap.add_argument("--seed", type=int, default=0, help="seed for Python and NumPy RNGs")
    ap.add_argument("--out-dir", default="results", help="output directory (tables, results, exports)")
    ap.add_argument("--log-level", default="WARNING")
    sub = ap.add_subparsers(dest="command", required=True)

    def backend_opts(p):
        p.add_argument("--backend", choices=("rule", "scripted", "live"), default="rule")
        p.add_argument("--transcript", help="recorded transcript for the scripted backend")

    p = sub.add_parser("validate", help="check a map against the osmAG rules")
    p.add_argument("map")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("precompute", help="build or refresh the intra-area distance table")
    p.add_argument("map")
    p.add_argument("--resolution", type=float, default=PRECOMPUTE_RESOLUTION)
    p.set_defaults(func=cmd_precompute)

    p = sub.add_parser("plan", help="plan a passage sequence with event approval")
    p.add_argument("map")
    p.add_argument("--from", dest="from_", required=True, help="area name or x,y in meters")
    p.add_argument("--to", help="destination area name")
    p.add_argument("--instruction", help="natural-language task; prices passages and picks the destination")
    p.add_argument("--events", help="event store JSON file")
    p.add_argument("--level", type=int, default=1)
    p.add_argument("--now", help="ISO timestamp used to select active events")
    backend_opts(p)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("ingest", help="read notifications into an event store")
    p.add_argument("map")
    p.add_argument("--events", required=True, help="event store JSON file (created if missing)")
    p.add_argument("--text", required=True, help="file with one notification per line, or - for stdin")
    p.add_argument("--now", help="ISO timestamp the notifications are read at")
    backend_opts(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("render", help="export a restricted occupancy grid as PGM + YAML")
    p.add_argument("map")
    p.add_argument("--areas", required=True, help="comma-separated area names or ids")
    p.add_argument("--passages", default="", help="comma-separated passage ids to leave open")
    p.add_argument("--out", required=True, help="output path prefix")
    p.add_argument("--level", type=int)
    p.add_argument("--resolution", type=float, default=EXPORT_RESOLUTION)
    p.add_argument("--inflate", action="store_true", help="inflate obstacles by the robot radius")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("simulate", help="run one case under one configuration")
    p.add_argument("case")
    p.add_argument("--config", choices=CONFIGS, default="full")
    backend_opts(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bench", help="run every case in a directory")
    p.add_argument("case_dir")
    p.add_argument("--all", action="store_true", help="run all five configurations")
    p.add_argument("--configs", default="full", help="comma-separated configurations when --all is not given")
    backend_opts(p)
    p.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format="%(levelname)s %(name)s: %(message)s")
    random.seed(args.seed)
    np.random.seed(args.seed)
    try:
        return args.func(args)
    except (MapError, OSError, ValueError, LookupError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
