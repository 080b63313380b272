"""Run benchmark cases under each configuration and summarize the results."""

from __future__ import annotations

import csv
import io
import logging
import os
from dataclasses import dataclass, field

from ..areagraph import build_area_graph, load_or_compute
from ..copilot import EventMonitor, EventStore, RuleBackend, evaluate_passages
from ..mapmodel import ProjectedMap, project
from ..planner import W_SOFT, PlanRequest, plan_with_approval
from .baseline import baseline_navigate
from .cases import CaseError, CaseSpec
from .executor import SIM_RESOLUTION, execute_task
from .world import ExperienceLedger, TrialResult

log = logging.getLogger(__name__)

CONFIGS = ("full", "no_monitor", "no_evaluator", "baseline_clearing", "baseline_memory")
CSV_HEADER = ("trial", "traveled_m", "restricted_entries", "replans", "reached")
COLORS = {
    "full": "#1b7837",
    "no_monitor": "#d95f02",
    "no_evaluator": "#7570b3",
    "baseline_clearing": "#e7298a",
    "baseline_memory": "#666666",
}


@dataclass
class BenchConfig:
    resolution: float = SIM_RESOLUTION
    w_soft: float = W_SOFT
    max_rounds: int = 10
    table_dir: str | None = None  # where distance tables are cached


@dataclass
class CaseRun:
    case: CaseSpec
    results: dict = field(default_factory=dict)  # config -> [TrialResult]
    ledgers: dict = field(default_factory=dict)  # config -> ExperienceLedger
    stores: dict = field(default_factory=dict)  # config -> EventStore


def _prepare(case: CaseSpec, cfg: BenchConfig):
    pmap = project(case.doc)
    path = None
    if cfg.table_dir:
        os.makedirs(cfg.table_dir, exist_ok=True)
        path = os.path.join(cfg.table_dir, os.path.splitext(os.path.basename(case.map_path))[0] + ".dist")
    table = load_or_compute(pmap, path, cfg.resolution)
    return pmap, table, build_area_graph(pmap, table)


def run_case(
    case: CaseSpec,
    configurations=CONFIGS,
    backend=None,
    cfg: BenchConfig | None = None,
    prepared=None,
) -> CaseRun:
    cfg = cfg or BenchConfig()
    unknown = [c for c in configurations if c not in CONFIGS]
    if unknown:
        raise CaseError(f"unknown configurations {unknown}")
    backend = backend or RuleBackend()
    pmap, table, graph = prepared or _prepare(case, cfg)
    run = CaseRun(case)
    for config in configurations:
        ledger = ExperienceLedger(clock=case.now)
        store = EventStore()
        monitor = None
        if config in ("full", "no_evaluator"):
            monitor = EventMonitor(backend, case.doc, case.capabilities)
            for note in case.notifications:
                monitor.ingest(note.text, note.at, store)
        memory: set = set()
        out = []
        for i, pose in enumerate(case.trials, start=1):
            task = f"{case.name}-{config}-t{i}"
            if config.startswith("baseline"):
                if config == "baseline_clearing":
                    memory = set()
                res = baseline_navigate(case.world, pmap, pose, case.destination, memory, config, i, resolution=cfg.resolution)
            else:
                res = _run_trial(case, config, pmap, table, graph, pose, ledger, store, monitor, backend, cfg, task, i)
            out.append(res)
        run.results[config] = out
        run.ledgers[config] = ledger
        run.stores[config] = store
    return run


def _run_trial(case, config, pmap, table, graph, pose, ledger, store, monitor, backend, cfg, task, trial) -> TrialResult:
    if config == "no_evaluator":
        costs, dest = {}, case.destination
    else:
        pcm = evaluate_passages(backend, case.instruction, case.doc, ledger.stats(), case.capabilities)
        costs, dest = pcm.costs, pcm.destination_area
        if dest != case.destination:
            raise CaseError(
                f"{case.name}: instruction resolved to {case.doc.areas[dest].name!r}, "
                f"case expects {case.doc.areas[case.destination].name!r}"
            )

    def source(p, infeasible):
        req = PlanRequest(p, dest, costs, infeasible_passages=infeasible)
        return plan_with_approval(graph, pmap, table, req, monitor, store, case.now, cfg.max_rounds, cfg.w_soft)

    return execute_task(source, case.world, ledger, pmap, pose, dest, task, config, trial, resolution=cfg.resolution)


# --------------------------------------------------------------------------
# output


def results_csv(results: list) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_HEADER, lineterminator="\n")
    w.writeheader()
    for r in results:
        w.writerow(r.row())
    return buf.getvalue()


def write_run(run: CaseRun, out_dir: str) -> list[str]:
    case_dir = os.path.join(out_dir, run.case.name)
    os.makedirs(case_dir, exist_ok=True)
    written = []
    for config, results in run.results.items():
        path = os.path.join(case_dir, f"{config}.csv")
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(results_csv(results))
        written.append(path)
        if run.ledgers[config].records:
            run.ledgers[config].save(os.path.join(case_dir, f"{config}.ledger.jsonl"))
        if len(run.stores[config]):
            run.stores[config].save(os.path.join(case_dir, f"{config}.events.json"))
    svg = os.path.join(case_dir, "overlay.svg")
    with open(svg, "w", encoding="utf-8") as fh:
        fh.write(svg_overlay(project(run.case.doc), run))
    written.append(svg)
    return written


def summary_rows(runs: list) -> list[dict]:
    """Table-I-shaped rows: one per configuration, mean traveled meters per case."""
    configs = [c for c in CONFIGS if any(c in r.results for r in runs)]
    rows = []
    for config in configs:
        row = {"configuration": config}
        total = 0.0
        entries = 0
        for run in runs:
            res = run.results.get(config, [])
            if res:
                row[run.case.name] = sum(r.traveled_length for r in res) / len(res)
                total += sum(r.traveled_length for r in res)
                entries += sum(r.restricted_entries for r in res)
        row["total_m"] = total
        row["restricted_entries"] = entries
        rows.append(row)
    return rows


def summarize(runs: list, out_dir: str | None = None) -> str:
    if not runs:
        raise ValueError("nothing to summarize")
    rows = summary_rows(runs)
    cols = ["configuration"] + [r.case.name for r in runs] + ["total_m", "restricted_entries"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for row in rows:
        w.writerow([row["configuration"]] + [_fmt(row.get(c, "")) for c in cols[1:]])
    text = buf.getvalue()
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "summary.csv"), "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        for run in runs:
            write_run(run, out_dir)
    return format_table(cols, rows)


def _fmt(v):
    return f"{v:.3f}" if isinstance(v, float) else v


def format_table(cols: list, rows: list) -> str:
    cells = [cols] + [[str(_fmt(r.get(c, ""))) if not isinstance(r.get(c), float) else f"{r[c]:.1f}" for c in cols] for r in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(cols))]
    lines = ["  ".join(v.ljust(widths[i]) if i == 0 else v.rjust(widths[i]) for i, v in enumerate(row)) for row in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def svg_overlay(pmap: ProjectedMap, run: CaseRun, scale: float = 10.0) -> str:
    """Map outline (first trial's floor) with each configuration's last trial path."""
    doc = pmap.doc
    level = run.case.trials[0].level
    rings = [pmap.ring_xy(a.id) for a in sorted(doc.areas.values(), key=lambda a: a.id) if a.level == level]
    xs = [x for r in rings for x, _ in r]
    ys = [y for r in rings for _, y in r]
    x0, y0, x1, y1 = min(xs) - 2, min(ys) - 2, max(xs) + 2, max(ys) + 2
    W, H = (x1 - x0) * scale, (y1 - y0) * scale

    def pt(x, y):
        return f"{(x - x0) * scale:.1f},{(y1 - y) * scale:.1f}"

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W:.0f}" height="{H:.0f}" viewBox="0 0 {W:.0f} {H:.0f}">']
    out.append(f'<rect width="{W:.0f}" height="{H:.0f}" fill="white"/>')
    for a in sorted(doc.areas.values(), key=lambda a: a.id):
        if a.level != level:
            continue
        fill = "#fde0a0" if a.id in run.case.world.restricted_truth else "#f2f2f2"
        out.append(f'<polygon points="{" ".join(pt(x, y) for x, y in pmap.ring_xy(a.id))}" fill="{fill}" stroke="#333" stroke-width="1"/>')
        cx, cy = sum(x for x, _ in pmap.ring_xy(a.id)[:-1]), sum(y for _, y in pmap.ring_xy(a.id)[:-1])
        n = len(pmap.ring_xy(a.id)) - 1
        out.append(f'<text x="{(cx / n - x0) * scale:.1f}" y="{(y1 - cy / n) * scale:.1f}" font-size="10" text-anchor="middle">{a.name}</text>')
    for p in sorted(doc.passages.values(), key=lambda p: p.id):
        if p.level_a != level or p.level_b != level:
            continue
        a, b = pmap.segments[p.id]
        color = "#c00" if not run.case.world.is_open(p.id) else "#0a0"
        out.append(f'<line x1="{(a.x - x0) * scale:.1f}" y1="{(y1 - a.y) * scale:.1f}" x2="{(b.x - x0) * scale:.1f}" y2="{(y1 - b.y) * scale:.1f}" stroke="{color}" stroke-width="4"/>')
    for config, results in run.results.items():
        if not results:
            continue
        for lv, pts in results[-1].path:
            if lv != level or len(pts) < 2:
                continue
            out.append(f'<polyline points="{" ".join(pt(x, y) for x, y in pts)}" fill="none" stroke="{COLORS[config]}" stroke-width="2" opacity="0.8"/>')
    for k, config in enumerate(run.results):
        out.append(f'<text x="8" y="{14 + 14 * k}" font-size="12" fill="{COLORS[config]}">{config}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
