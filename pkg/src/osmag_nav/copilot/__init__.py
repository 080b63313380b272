"""Chat-model copilot: passage pricing, event tracking and path approval."""

from .backends import BackendError, LiveBackend, RecordingBackend, ScriptedBackend, make_backend, prompt_key
from .contracts import (
    ApprovalVerdict,
    EventRecord,
    ExperienceStats,
    NormalizationError,
    PassageCostMap,
    PassageStats,
    RobotCapabilities,
    UnrepairableOutputError,
)
from .evaluator import evaluate_passages
from .monitor import EventMonitor, EventStore, approve_path, expire_events, ingest_notification
from .normalize import call_structured, normalize_llm_json
from .resolve import AreaResolver, ResolutionError
from .rules import RuleBackend, rule_passage_cost

__all__ = [
    "ApprovalVerdict",
    "AreaResolver",
    "BackendError",
    "EventMonitor",
    "EventRecord",
    "EventStore",
    "ExperienceStats",
    "LiveBackend",
    "NormalizationError",
    "PassageCostMap",
    "PassageStats",
    "RecordingBackend",
    "ResolutionError",
    "RobotCapabilities",
    "RuleBackend",
    "ScriptedBackend",
    "UnrepairableOutputError",
    "approve_path",
    "call_structured",
    "evaluate_passages",
    "expire_events",
    "ingest_notification",
    "make_backend",
    "normalize_llm_json",
    "prompt_key",
    "rule_passage_cost",
]
