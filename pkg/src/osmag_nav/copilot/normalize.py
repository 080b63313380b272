"""Turn loosely formatted chat replies into schema-valid JSON values.

Repairs applied, in order: pull the JSON object out of code fences or
surrounding prose, fix common syntax slips (trailing commas, Python
literals, single quotes, bare keys), map near-miss keys onto schema keys,
coerce field values (booleans, numbers, single strings to lists), resolve
area references against the map and finally validate with jsonschema.
"""

from __future__ import annotations

import json
import logging
import math
import re
from datetime import datetime

import jsonschema

from .contracts import NAME_LIST_FIELDS, SCHEMAS, NormalizationError, UnrepairableOutputError
from .resolve import AreaResolver, ResolutionError

log = logging.getLogger(__name__)

_FENCE_RE = re.compile(r"```[ \t]*(?:json|JSON)?[ \t]*\n?(.*?)```", re.DOTALL)

KEY_ALIASES = {
    "areas_to_avoid": ("areas_to_avoid", "area_to_avoid", "avoid_areas", "avoid", "areas_avoid", "blocked_areas"),
    "areas_try_to_avoid": (
        "areas_try_to_avoid",
        "area_try_to_avoid",
        "areas_to_try_to_avoid",
        "try_to_avoid",
        "try_avoid",
        "soft_avoid",
        "areas_to_try_avoid",
    ),
    "is_valid": ("is_valid", "isvalid", "valid", "approved", "path_valid"),
    "relevant": ("relevant", "is_relevant", "navigation_relevant", "relevance"),
    "destination_area": ("destination_area", "destination", "goal", "goal_area", "target", "target_area"),
    "destination_level": ("destination_level", "level", "floor"),
    "costs": ("costs", "passage_costs", "pc", "cost"),
    "rationale": ("rationale", "reasoning", "explanation", "reason_text"),
    "reason": ("reason", "event", "description", "cause"),
    "start": ("start", "start_time", "begin", "from"),
    "end": ("end", "end_time", "until", "to"),
    "unresolved": ("unresolved",),
}

TRUE_WORDS = {"true", "yes", "y", "1", "valid", "approved", "ok"}
FALSE_WORDS = {"false", "no", "n", "0", "invalid", "rejected", "denied"}


def _key_form(key: str) -> str:
    return re.sub(r"[\s\-]+", "_", str(key).strip().lower())


def _balanced_objects(text: str):
    """Yield every top-level ``{...}`` substring, honoring string literals."""
    i = 0
    while True:
        start = text.find("{", i)
        if start < 0:
            return
        depth = 0
        quote = None
        esc = False
        for k in range(start, len(text)):
            ch = text[k]
            if quote:
                if esc:
                    esc = False
                elif ch == "\\":
                    esc = True
                elif ch == quote:
                    quote = None
            elif ch in "\"'":
                quote = ch
            elif ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    yield text[start : k + 1]
                    i = k + 1
                    break
        else:
            return


def _syntax_repairs(text: str) -> list[str]:
    out = [text]
    t = re.sub(r",\s*([}\]])", r"\1", text)
    t = re.sub(r"\bTrue\b", "true", t)
    t = re.sub(r"\bFalse\b", "false", t)
    t = re.sub(r"\bNone\b", "null", t)
    out.append(t)
    if '"' not in t:
        t = t.replace("'", '"')
        out.append(t)
    t = re.sub(r"([{,]\s*)([A-Za-z_][A-Za-z0-9_ \-]*?)\s*:", r'\1"\2":', t)
    out.append(t)
    return out


def extract_json_object(raw: str) -> dict:
    if not isinstance(raw, str) or not raw.strip():
        raise NormalizationError("empty reply")
    sources = [m.group(1) for m in _FENCE_RE.finditer(raw)] + [raw]
    for src in sources:
        for cand in list(_balanced_objects(src)):
            for attempt in _syntax_repairs(cand):
                try:
                    value = json.loads(attempt)
                except ValueError:
                    continue
                if isinstance(value, dict):
                    return value
    raise NormalizationError(f"no JSON object found in reply: {raw[:80]!r}")


def _canonical_keys(obj: dict, schema_id: str) -> dict:
    allowed = SCHEMAS[schema_id]["properties"]
    lookup = {}
    for canon, aliases in KEY_ALIASES.items():
        if canon in allowed:
            for a in aliases:
                lookup.setdefault(a, canon)
    out: dict = {}
    for key, value in obj.items():
        canon = lookup.get(_key_form(key))
        if canon is None:
            log.debug("dropping unknown key %r", key)
            continue
        if canon not in out or _key_form(key) == canon:
            out[canon] = value
    return out


def _to_bool(value, name):
    if isinstance(value, bool):
        return value
    if isinstance(value, (int, float)) and value in (0, 1):
        return bool(value)
    if isinstance(value, str):
        w = value.strip().lower().rstrip(".")
        if w in TRUE_WORDS:
            return True
        if w in FALSE_WORDS:
            return False
    raise NormalizationError(f"{name}: cannot read {value!r} as a boolean")


def _to_number(value, name):
    if isinstance(value, bool):
        raise NormalizationError(f"{name}: boolean is not a cost")
    if isinstance(value, (int, float)):
        x = float(value)
    elif isinstance(value, str):
        m = re.match(r"^\s*([-+]?\d+(?:\.\d+)?)", value)
        if not m:
            raise NormalizationError(f"{name}: cannot read {value!r} as a number")
        x = float(m.group(1))
    else:
        raise NormalizationError(f"{name}: cannot read {value!r} as a number")
    if not math.isfinite(x):
        raise NormalizationError(f"{name}: non-finite value")
    return x


def _to_list(value) -> list:
    if value is None:
        return []
    if isinstance(value, str):
        parts = [p.strip() for p in re.split(r"[,;]|\band\b", value)]
        return [p for p in parts if p]
    if isinstance(value, (list, tuple)):
        return list(value)
    return [value]


def _passage_key(key) -> str:
    m = re.search(r"(\d+)\s*$", str(key))
    if not m:
        raise NormalizationError(f"costs: {key!r} is not a passage id")
    return str(int(m.group(1)))


def _costs(value) -> dict:
    if isinstance(value, list):
        flat = {}
        for item in value:
            if not isinstance(item, dict):
                raise NormalizationError("costs: list entries must be objects")
            pid = item.get("passage", item.get("id", item.get("passage_id")))
            cost = item.get("cost", item.get("pc", item.get("value")))
            if pid is None or cost is None:
                raise NormalizationError(f"costs: cannot read entry {item!r}")
            flat[pid] = cost
        value = flat
    if not isinstance(value, dict):
        raise NormalizationError("costs must be an object")
    return {_passage_key(k): _to_number(v, f"costs[{k}]") for k, v in value.items()}


def _stamp(value, name):
    if value is None or value == "":
        return None
    try:
        return datetime.fromisoformat(str(value).strip().replace("Z", "+00:00")).isoformat()
    except ValueError:
        raise NormalizationError(f"{name}: {value!r} is not an ISO-8601 timestamp") from None


def _resolve_names(values: list, resolver: AreaResolver | None, unresolved: list) -> list[str]:
    out: list[str] = []
    for v in values:
        if not isinstance(v, (str, int)) or isinstance(v, bool):
            raise NormalizationError(f"area reference {v!r} is not a string")
        v = str(v).strip()
        if not v:
            continue
        names = [v]
        if resolver is not None:
            try:
                names = resolver.names(v)
            except ResolutionError:
                if v not in unresolved:
                    unresolved.append(v)
                continue
        for n in names:
            if n not in out:
                out.append(n)
    return out


def normalize_llm_json(raw: str, schema_id: str, resolver: AreaResolver | None = None) -> dict:
    """Parse, coerce and validate ``raw`` against the named schema.

    Area references that do not resolve on the map are moved to an
    ``unresolved`` list instead of failing the whole reply.
    """
    if schema_id not in SCHEMAS:
        raise KeyError(f"unknown schema {schema_id!r}")
    obj = _canonical_keys(extract_json_object(raw), schema_id)
    props = SCHEMAS[schema_id]["properties"]
    unresolved = [str(u) for u in _to_list(obj.get("unresolved"))]

    for key in ("is_valid", "relevant"):
        if key in props and key in obj:
            obj[key] = _to_bool(obj[key], key)
    for key in NAME_LIST_FIELDS[schema_id]:
        obj[key] = _resolve_names(_to_list(obj.get(key)), resolver, unresolved)
    for key in ("start", "end"):
        if key in props and key in obj:
            obj[key] = _stamp(obj[key], key)
    for key in ("rationale", "reason"):
        if key in props:
            v = obj.get(key)
            obj[key] = "" if v is None else str(v)
    if schema_id == "passage_cost":
        if "costs" in obj:
            obj["costs"] = _costs(obj["costs"])
        dest = obj.get("destination_area")
        if isinstance(dest, (list, tuple)) and len(dest) == 1:
            dest = dest[0]
        if isinstance(dest, str) and resolver is not None:
            try:
                names = resolver.names(dest)
                if len(names) == 1:
                    dest = names[0]
            except ResolutionError:
                pass
        if dest is not None:
            obj["destination_area"] = dest if isinstance(dest, str) else str(dest)
        lv = obj.get("destination_level")
        if lv is not None and not isinstance(lv, int):
            m = re.search(r"-?\d+", str(lv))
            obj["destination_level"] = int(m.group(0)) if m else None
    if "unresolved" in props:
        obj["unresolved"] = unresolved
    try:
        jsonschema.validate(obj, SCHEMAS[schema_id])
    except jsonschema.ValidationError as exc:
        raise NormalizationError(f"{schema_id}: {exc.message}") from None
    return obj


REPAIR_NOTE = (
    "\n\nYour previous reply could not be used ({error}). "
    "Reply again with only one JSON object that follows the output format exactly."
)


def call_structured(backend, system: str, user: str, schema_id: str, resolver: AreaResolver | None = None) -> dict:
    """One request plus at most one corrective reprompt."""
    errors = []
    prompt = user
    for _ in range(2):
        raw = backend.complete(system, prompt)
        try:
            return normalize_llm_json(raw, schema_id, resolver)
        except NormalizationError as exc:
            log.warning("%s reply rejected: %s", schema_id, exc)
            errors.append(str(exc))
            prompt = user + REPAIR_NOTE.format(error=exc)
    raise UnrepairableOutputError(schema_id, errors)
