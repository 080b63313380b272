"""Record rule-backend exchanges as replayable transcripts.

    python3 scripts/record_transcripts.py [--out fixtures/transcripts]

Each case under fixtures/cases and fixtures/scenarios is run with the
configurations that call the copilot; every prompt/reply pair is saved keyed
by prompt hash, so a ScriptedBackend built from the file reproduces the run.
"""

from __future__ import annotations

import argparse
import glob
import os

from osmag_nav.copilot import RecordingBackend, RuleBackend
from osmag_nav.sim import load_case, run_case

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=os.path.join(ROOT, "fixtures", "transcripts"))
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)
    paths = sorted(glob.glob(os.path.join(ROOT, "fixtures", "cases", "*.yaml")))
    paths += sorted(glob.glob(os.path.join(ROOT, "fixtures", "scenarios", "*.yaml")))
    for path in paths:
        case = load_case(path)
        rec = RecordingBackend(RuleBackend())
        run_case(case, ["full", "no_evaluator"], rec)
        out = os.path.join(args.out, f"{case.name}.json")
        rec.save(out)
        print(f"{out}: {len(rec.records)} exchanges")


if __name__ == "__main__":
    main()
