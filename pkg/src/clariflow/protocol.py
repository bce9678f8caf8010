"""Parsers and renderers for the structured outputs agents emit.

Two families: the supervisor's <clarify>/<domain>/<route> tags, and the
expert's labeled block grammar (Thought / API Name / API Input / API Result /
Response). Parsing is total: every input yields Parsed or Malformed, never an
exception. Leniency is bounded: tag names match case-insensitively and
surrounding whitespace is ignored; tag and label content is kept byte-exact.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from typing import Any, Optional, Union

from .core import API_NAME_ALIASES, API_TABLE, RECORD_SCHEMA, Domain, Mode, ClarificationLevel, SlotValue, clarification_allowed

log = logging.getLogger(__name__)

# Malformed reason codes
NO_TAG = "no_tag"
BOTH_TAGS = "both_tags"
MULTIPLE_TAGS = "multiple_tags"
UNKNOWN_DOMAIN = "unknown_domain"
CLARIFY_FORBIDDEN = "clarify_forbidden"
EMPTY_CLARIFY = "empty_clarify"
EMPTY_RESPONSE = "empty_response"
UNKNOWN_API = "unknown_api"
FOREIGN_API = "foreign_api"
BAD_API_INPUT = "bad_api_input"
MISSING_API_INPUT = "missing_api_input"
NO_ACTION = "no_action"


@dataclass(frozen=True)
class Clarify:
    tag = "clarify"
    question: str
    thought: Optional[str] = None

    def __post_init__(self) -> None:
        if not self.question.strip():
            raise ValueError("clarify question must be nonempty")


@dataclass(frozen=True)
class RouteDomain:
    tag = "route"
    domain: Domain
    thought: Optional[str] = None


@dataclass(frozen=True)
class Respond:
    tag = "respond"
    utterance: str
    thought: Optional[str] = None

    def __post_init__(self) -> None:
        if not self.utterance.strip():
            raise ValueError("respond utterance must be nonempty")


@dataclass(frozen=True)
class ApiCall:
    tag = "api_call"
    name: str
    input: dict[str, SlotValue] = field(default_factory=dict)
    thought: Optional[str] = None

    def __post_init__(self) -> None:
        if self.name not in API_TABLE:
            raise ValueError(f"unknown API name: {self.name!r}")

    @property
    def domain(self) -> Domain:
        return API_TABLE[self.name][0]


AgentAction = Union[Clarify, RouteDomain, Respond, ApiCall]


@dataclass(frozen=True)
class Parsed:
    action: AgentAction


@dataclass(frozen=True)
class Malformed:
    reason: str
    raw: str


ParseOutcome = Union[Parsed, Malformed]


_CLARIFY_RE = re.compile(r"<\s*clarify\s*>(.*?)<\s*/\s*clarify\s*>", re.IGNORECASE | re.DOTALL)
_DOMAIN_RE = re.compile(r"<\s*(domain|route)\s*>(.*?)<\s*/\s*(?:domain|route)\s*>", re.IGNORECASE | re.DOTALL)
_LABELS = ("Thought", "API Name", "API Input", "API Result", "Response")
_LABEL_GUARD = r"(?=^[ \t]*-?[ \t]*(?:Thought|API Name|API Input|API Result|Response)[ \t]*:|\Z)"
# a thought also ends where a tag line (<domain>, <clarify>, ...) begins
_THOUGHT_GUARD = r"(?=^[ \t]*-?[ \t]*(?:Thought|API Name|API Input|API Result|Response)[ \t]*:|^[ \t]*<|\Z)"


def _label_section(raw: str, label: str, guard: str = _LABEL_GUARD) -> Optional[str]:
    """Text after `label:` up to the next labeled line or end of input."""
    pattern = re.compile(
        rf"^[ \t]*-?[ \t]*{label}[ \t]*:[ \t]?(.*?)[ \t]*{guard}",
        re.IGNORECASE | re.MULTILINE | re.DOTALL,
    )
    m = pattern.search(raw)
    if m is None:
        return None
    return m.group(1).rstrip("\r\n")


def _extract_thought(raw: str) -> Optional[str]:
    text = _label_section(raw, "Thought", guard=_THOUGHT_GUARD)
    if text is None:
        return None
    text = text.strip()
    return text or None


def parse_supervisor_output(raw: str, mode: Mode) -> ParseOutcome:
    """Parse a supervisor turn: either a routing tag or a clarification question."""
    thought = _extract_thought(raw)
    clarify_matches = _CLARIFY_RE.findall(raw)
    domain_matches = _DOMAIN_RE.findall(raw)

    if clarify_matches and domain_matches:
        return Malformed(BOTH_TAGS, raw)
    if clarify_matches:
        if len(clarify_matches) > 1:
            return Malformed(MULTIPLE_TAGS, raw)
        if not clarification_allowed(mode, ClarificationLevel.SUPERVISOR):
            return Malformed(CLARIFY_FORBIDDEN, raw)
        question = clarify_matches[0]
        if not question.strip():
            return Malformed(EMPTY_CLARIFY, raw)
        return Parsed(Clarify(question, thought=thought))
    if domain_matches:
        if len(domain_matches) > 1:
            return Malformed(MULTIPLE_TAGS, raw)
        name = domain_matches[0][1].strip().lower()
        try:
            domain = Domain(name)
        except ValueError:
            return Malformed(UNKNOWN_DOMAIN, raw)
        return Parsed(RouteDomain(domain, thought=thought))
    return Malformed(NO_TAG, raw)


def _repair_json_object(text: str) -> str:
    """One bounded repair pass: drop trailing commas, quote bare keys, fix single quotes."""
    repaired = re.sub(r",\s*([}\]])", r"\1", text)
    repaired = re.sub(r"([{,]\s*)([A-Za-z_][A-Za-z0-9_]*)(\s*:)", r'\1"\2"\3', repaired)
    if '"' not in repaired and "'" in repaired:
        repaired = repaired.replace("'", '"')
    return repaired


def _parse_api_input(text: str) -> Optional[dict[str, SlotValue]]:
    candidate = text.strip()
    # tolerate the bracketed form some models echo from the format example
    if candidate.startswith("[") and candidate.endswith("]") and candidate.count("{") == 1:
        candidate = candidate[1:-1].strip()
    for attempt in (candidate, _repair_json_object(candidate)):
        try:
            obj = json.loads(attempt)
        except (json.JSONDecodeError, ValueError):
            continue
        if not isinstance(obj, dict):
            return None
        out: dict[str, SlotValue] = {}
        try:
            for key, value in obj.items():
                if isinstance(value, (list, dict)):
                    return None  # one value per slot
                out[str(key)] = SlotValue.from_raw(str(value))
        except ValueError:
            return None
        return out
    return None


def _normalize_api_name(text: str) -> str:
    name = text.strip()
    name = name.strip("[]").strip()
    return API_NAME_ALIASES.get(name, name)


def parse_expert_output(raw: str, domain: Domain, mode: Mode) -> ParseOutcome:
    """Parse a domain expert turn: an API call block, a clarify question, or a response."""
    thought = _extract_thought(raw)
    api_name_text = _label_section(raw, "API Name")
    api_input_text = _label_section(raw, "API Input")

    if api_name_text is not None:
        if api_input_text is None:
            return Malformed(MISSING_API_INPUT, raw)
        name = _normalize_api_name(api_name_text)
        if name not in API_TABLE:
            return Malformed(UNKNOWN_API, raw)
        if API_TABLE[name][0] is not domain:
            return Malformed(FOREIGN_API, raw)
        tail = _label_section(raw, "API Result")
        if tail and tail.strip():
            log.debug("discarding model-written text after API Result: %r", tail[:80])
        parsed_input = _parse_api_input(api_input_text)
        if parsed_input is None:
            return Malformed(BAD_API_INPUT, raw)
        return Parsed(ApiCall(name, parsed_input, thought=thought))

    response_text = _label_section(raw, "Response")
    if response_text is None:
        return Malformed(NO_ACTION, raw)
    clarify_matches = _CLARIFY_RE.findall(response_text)
    if clarify_matches:
        if len(clarify_matches) > 1:
            return Malformed(MULTIPLE_TAGS, raw)
        if not clarification_allowed(mode, ClarificationLevel.EXPERT):
            return Malformed(CLARIFY_FORBIDDEN, raw)
        question = clarify_matches[0]
        if not question.strip():
            return Malformed(EMPTY_CLARIFY, raw)
        return Parsed(Clarify(question, thought=thought))
    utterance = response_text.strip()
    if not utterance:
        return Malformed(EMPTY_RESPONSE, raw)
    return Parsed(Respond(response_text.strip(), thought=thought))


def render_action(action: AgentAction) -> str:
    """Canonical text for an action; parsing the result yields an equal action."""
    lines: list[str] = []
    if action.thought:
        lines.append(f"Thought: {action.thought}")
    if isinstance(action, Clarify):
        lines.append(f"Response: <clarify>{action.question}</clarify>")
    elif isinstance(action, RouteDomain):
        lines.append(f"<domain>{action.domain.value}</domain>")
    elif isinstance(action, Respond):
        lines.append(f"Response: {action.utterance}")
    elif isinstance(action, ApiCall):
        lines.append(f"API Name: {action.name}")
        lines.append("API Input: " + json.dumps({k: v.raw() for k, v in action.input.items()}))
        lines.append("API Result:")
    else:
        raise TypeError(f"not an AgentAction: {action!r}")
    return "\n".join(lines)


def render_api_result(result: Any) -> str:
    """Stable textual rendering of a query result list or a booking confirmation."""
    if hasattr(result, "reference"):
        return f"API Result: booked, reference={result.reference}"
    records = list(result)
    if not records:
        return "API Result: no matching records"
    noun = "record" if len(records) == 1 else "records"
    lines = [f"API Result: {len(records)} matching {noun}"]
    for record in records:
        schema = RECORD_SCHEMA[record.domain]
        pairs = [f"{key}={record.attributes[key]}" for key in schema if key in record.attributes]
        extras = sorted(set(record.attributes) - set(schema))
        pairs.extend(f"{key}={record.attributes[key]}" for key in extras)
        lines.append("- " + ", ".join(pairs))
    return "\n".join(lines)


def action_to_dict(action: AgentAction) -> dict[str, Any]:
    out: dict[str, Any] = {"tag": action.tag, "thought": action.thought}
    if isinstance(action, Clarify):
        out["question"] = action.question
    elif isinstance(action, RouteDomain):
        out["domain"] = action.domain.value
    elif isinstance(action, Respond):
        out["utterance"] = action.utterance
    elif isinstance(action, ApiCall):
        out["name"] = action.name
        out["input"] = {k: v.raw() for k, v in action.input.items()}
    return out


def action_from_dict(data: dict[str, Any]) -> AgentAction:
    tag = data["tag"]
    thought = data.get("thought")
    if tag == "clarify":
        return Clarify(data["question"], thought=thought)
    if tag == "route":
        return RouteDomain(Domain(data["domain"]), thought=thought)
    if tag == "respond":
        return Respond(data["utterance"], thought=thought)
    if tag == "api_call":
        return ApiCall(data["name"], {k: SlotValue.from_raw(v) for k, v in data["input"].items()}, thought=thought)
    raise ValueError(f"unknown action tag: {tag!r}")
