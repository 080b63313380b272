"""Door-state simulator, task executor, baseline and benchmark harness."""

from .baseline import baseline_navigate
from .bench import CONFIGS, BenchConfig, CaseRun, run_case, summarize, write_run
from .cases import CaseError, CaseSpec, load_case, parse_case
from .executor import execute_task
from .world import ExperienceLedger, TrialResult, WorldState

__all__ = [
    "BenchConfig",
    "CONFIGS",
    "CaseError",
    "CaseRun",
    "CaseSpec",
    "ExperienceLedger",
    "TrialResult",
    "WorldState",
    "baseline_navigate",
    "execute_task",
    "load_case",
    "parse_case",
    "run_case",
    "summarize",
    "write_run",
]
