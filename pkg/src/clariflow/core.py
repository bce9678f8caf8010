"""Shared domain types: domains, clarification taxonomy, goals, transcripts, run config."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import IO, Any, Iterable, Optional


class Domain(str, Enum):
    RESTAURANT = "restaurant"
    HOTEL = "hotel"
    ATTRACTION = "attraction"
    TRAIN = "train"
    TAXI = "taxi"


# API catalogue: name -> (domain, ordered argument slots, kind).
# book_restaurant keeps "stars" and "type" verbatim even though they look like
# hotel slots; they are flagged suspect in SUSPECT_API_ARGS rather than dropped.
API_TABLE: dict[str, tuple[Domain, tuple[str, ...], str]] = {
    "query_restaurant": (Domain.RESTAURANT, ("area", "pricerange", "food", "name"), "query"),
    "book_restaurant": (Domain.RESTAURANT, ("name", "people", "day", "time", "pricerange", "stars", "type"), "book"),
    "query_hotel": (Domain.HOTEL, ("area", "internet", "name", "parking"), "query"),
    "book_hotel": (Domain.HOTEL, ("name", "people", "day", "stay"), "book"),
    "query_attraction": (Domain.ATTRACTION, ("area", "name", "type"), "query"),
    "query_train": (Domain.TRAIN, ("arriveBy", "day", "departure", "destination", "leaveAt", "trainID"), "query"),
    "buy_train_ticket": (Domain.TRAIN, ("arriveBy", "day", "departure", "destination", "leaveAt", "trainID", "people"), "book"),
    "book_taxi": (Domain.TAXI, ("arriveBy", "departure", "destination", "leaveAt"), "book"),
}

SUSPECT_API_ARGS = {("book_restaurant", "stars"), ("book_restaurant", "type")}

# Accepted spelling variants of API names (normalized to the catalogue key).
API_NAME_ALIASES = {"query_hotels": "query_hotel"}


def apis_for_domain(domain: Domain) -> tuple[str, ...]:
    return tuple(name for name, (dom, _, _) in API_TABLE.items() if dom is domain)


def slot_vocabulary(domain: Domain) -> frozenset[str]:
    """All argument slot names accepted by any of the domain's APIs."""
    slots: set[str] = set()
    for dom, args, _ in API_TABLE.values():
        if dom is domain:
            slots.update(args)
    return frozenset(slots)


# Venue record attribute schema per domain, in rendering order. Fixture DB
# files and requestable-attribute validation both follow this.
RECORD_SCHEMA: dict[Domain, tuple[str, ...]] = {
    Domain.RESTAURANT: ("name", "area", "food", "pricerange", "address", "phone", "postcode"),
    Domain.HOTEL: ("name", "area", "internet", "parking", "pricerange", "stars", "type", "address", "phone", "postcode"),
    Domain.ATTRACTION: ("name", "area", "type", "entrancefee", "address", "phone", "postcode"),
    Domain.TRAIN: ("trainID", "departure", "destination", "day", "leaveAt", "arriveBy", "price", "duration"),
    Domain.TAXI: ("car", "phone"),
}


class ClarificationLevel(str, Enum):
    SUPERVISOR = "supervisor"
    EXPERT = "expert"


class ClarificationKind(str, Enum):
    # supervisor-level kinds
    DOMAIN_AMBIGUITY = "domain_ambiguity"
    INTENT_AMBIGUITY = "intent_ambiguity"
    VAGUE_GOAL = "vague_goal"
    CONTEXTUAL_DISAMBIGUATION = "contextual_disambiguation"
    GENERAL_CONFLICT = "general_conflict"
    GENERAL_NOISE_CORRECTION = "general_noise_correction"
    UNFAMILIAR_DOMAIN = "unfamiliar_domain"
    # expert-level kinds
    PARAMETER_UNDERSPECIFICATION = "parameter_underspecification"
    VALUE_AMBIGUITY = "value_ambiguity"
    CONSTRAINT_CONFLICT = "constraint_conflict"
    ENTITY_DISAMBIGUATION = "entity_disambiguation"
    INFERRED_CONFIRMATION = "inferred_confirmation"


SUPERVISOR_KINDS: tuple[ClarificationKind, ...] = (
    ClarificationKind.DOMAIN_AMBIGUITY,
    ClarificationKind.INTENT_AMBIGUITY,
    ClarificationKind.VAGUE_GOAL,
    ClarificationKind.CONTEXTUAL_DISAMBIGUATION,
    ClarificationKind.GENERAL_CONFLICT,
    ClarificationKind.GENERAL_NOISE_CORRECTION,
    ClarificationKind.UNFAMILIAR_DOMAIN,
)

EXPERT_KINDS: tuple[ClarificationKind, ...] = (
    ClarificationKind.PARAMETER_UNDERSPECIFICATION,
    ClarificationKind.VALUE_AMBIGUITY,
    ClarificationKind.CONSTRAINT_CONFLICT,
    ClarificationKind.ENTITY_DISAMBIGUATION,
    ClarificationKind.INFERRED_CONFIRMATION,
)

# Human-readable taxonomy entries: kind -> (title, guidance line). Used to
# build the clarify-capable prompt variants and by the category classifier.
TAXONOMY_TEXT: dict[ClarificationKind, tuple[str, str]] = {
    ClarificationKind.DOMAIN_AMBIGUITY: (
        "Domain Ambiguity",
        'The request could fit multiple domains (e.g., "Find me a good place." - a place to eat or to stay?).',
    ),
    ClarificationKind.INTENT_AMBIGUITY: (
        "Intent Ambiguity",
        'The domain is clear, but the goal is not (e.g., "Tell me about trains" - find a schedule or book a ticket?).',
    ),
    ClarificationKind.VAGUE_GOAL: (
        "Vague Goal Specification",
        'The request is too broad to be actionable (e.g., "Help me with my trip" - what kind of help; booking or search?).',
    ),
    ClarificationKind.CONTEXTUAL_DISAMBIGUATION: (
        "Contextual Disambiguation",
        'The request uses vague references like "it" or "that place" which are unclear from the context.',
    ),
    ClarificationKind.GENERAL_CONFLICT: (
        "General Conflict",
        'Broad contradictions in the user\'s input that are not domain-specific (e.g., "I changed my mind about the date").',
    ),
    ClarificationKind.GENERAL_NOISE_CORRECTION: (
        "General Noise/Correction",
        'Common errors or typos needing confirmation (e.g., "I meant tomorrow not today").',
    ),
    ClarificationKind.UNFAMILIAR_DOMAIN: (
        "Unfamiliar Domain Request",
        'The request does not clearly match any supported domain (e.g., "Can you help me fix my phone?").',
    ),
    ClarificationKind.PARAMETER_UNDERSPECIFICATION: (
        "Parameter Underspecification",
        "Key details for a search or booking are missing (e.g., location, cuisine, number of people, time).",
    ),
    ClarificationKind.VALUE_AMBIGUITY: (
        "Value Ambiguity/Vagueness",
        'A user\'s term is subjective and needs pinning down (e.g., "a nice place", "somewhere soon").',
    ),
    ClarificationKind.CONSTRAINT_CONFLICT: (
        "Constraint Conflict",
        'The user provides contradictory constraints (e.g., "a cheap but expensive restaurant").',
    ),
    ClarificationKind.ENTITY_DISAMBIGUATION: (
        "Entity Disambiguation/Not Found",
        "A specific entity name is ambiguous or cannot be found.",
    ),
    ClarificationKind.INFERRED_CONFIRMATION: (
        "Confirmation of Inferred Information",
        "A detail was inferred from context and needs user confirmation before proceeding.",
    ),
}


@dataclass(frozen=True)
class ClarificationCategory:
    level: ClarificationLevel
    kind: ClarificationKind

    def __post_init__(self) -> None:
        allowed = SUPERVISOR_KINDS if self.level is ClarificationLevel.SUPERVISOR else EXPERT_KINDS
        if self.kind not in allowed:
            raise ValueError(f"kind {self.kind.value} not valid at level {self.level.value}")

    def to_dict(self) -> dict[str, str]:
        return {"level": self.level.value, "kind": self.kind.value}

    @classmethod
    def from_dict(cls, data: dict[str, str]) -> "ClarificationCategory":
        return cls(ClarificationLevel(data["level"]), ClarificationKind(data["kind"]))


DONTCARE = "dontcare"
ANY = "any"


@dataclass(frozen=True)
class SlotValue:
    """A slot filler: a concrete value, expressed indifference, or a placeholder."""

    kind: str  # "value" | "dontcare" | "any"
    text: str = ""

    def __post_init__(self) -> None:
        if self.kind not in ("value", DONTCARE, ANY):
            raise ValueError(f"bad SlotValue kind: {self.kind!r}")
        if self.kind == "value":
            stripped = self.text.strip()
            if not stripped:
                raise ValueError("SlotValue value text must be nonempty")
            object.__setattr__(self, "text", stripped)
        elif self.text:
            raise ValueError(f"{self.kind} carries no text")

    @classmethod
    def value(cls, text: str) -> "SlotValue":
        return cls("value", text)

    @classmethod
    def dontcare(cls) -> "SlotValue":
        return cls(DONTCARE)

    @classmethod
    def any(cls) -> "SlotValue":
        return cls(ANY)

    @classmethod
    def from_raw(cls, raw: str) -> "SlotValue":
        """Parse the wire form: the literal strings "dontcare"/"any" are variants."""
        stripped = raw.strip()
        if stripped.lower() == DONTCARE:
            return cls.dontcare()
        if stripped.lower() == ANY:
            return cls.any()
        return cls.value(stripped)

    @property
    def is_value(self) -> bool:
        return self.kind == "value"

    def raw(self) -> str:
        """Serialized form; inverse of from_raw for valid values."""
        return self.text if self.kind == "value" else self.kind


@dataclass(frozen=True)
class GoalEntry:
    """Per-domain goal slice: search constraints, requested attributes, booking args."""

    informable: dict[str, SlotValue] = field(default_factory=dict)
    requestables: frozenset[str] = frozenset()
    booking: Optional[dict[str, SlotValue]] = None

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "informable": {k: v.raw() for k, v in sorted(self.informable.items())},
            "requestables": sorted(self.requestables),
        }
        if self.booking is not None:
            out["booking"] = {k: v.raw() for k, v in sorted(self.booking.items())}
        return out

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "GoalEntry":
        booking = data.get("booking")
        return cls(
            informable={k: SlotValue.from_raw(v) for k, v in data.get("informable", {}).items()},
            requestables=frozenset(data.get("requestables", [])),
            booking=None if booking is None else {k: SlotValue.from_raw(v) for k, v in booking.items()},
        )


@dataclass(frozen=True)
class UserGoal:
    goal_id: str
    entries: dict[Domain, GoalEntry]

    def to_dict(self) -> dict[str, Any]:
        return {
            "goal_id": self.goal_id,
            "domains": {d.value: e.to_dict() for d, e in sorted(self.entries.items())},
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "UserGoal":
        return cls(
            goal_id=data["goal_id"],
            entries={Domain(d): GoalEntry.from_dict(e) for d, e in data["domains"].items()},
        )


@dataclass(frozen=True)
class GoalViolation:
    code: str  # "empty_goal" | "unknown_slot" | "unknown_requestable" | "bad_value"
    domain: Optional[Domain] = None
    slot: Optional[str] = None

    def __str__(self) -> str:
        parts = [self.code]
        if self.domain is not None:
            parts.append(self.domain.value)
        if self.slot is not None:
            parts.append(self.slot)
        return "(".join(parts[:1]) + ("(" + ", ".join(parts[1:]) + ")" if len(parts) > 1 else "")


def validate_goal(goal: UserGoal) -> list[GoalViolation]:
    """Check slot names against each domain's API vocabulary; returns violations, never raises."""
    violations: list[GoalViolation] = []
    if not goal.entries:
        violations.append(GoalViolation("empty_goal"))
        return violations
    for domain, entry in goal.entries.items():
        vocab = slot_vocabulary(domain)
        for slot in entry.informable:
            if slot not in vocab:
                violations.append(GoalViolation("unknown_slot", domain, slot))
        if entry.booking:
            for slot in entry.booking:
                if slot not in vocab:
                    violations.append(GoalViolation("unknown_slot", domain, slot))
        attrs = set(RECORD_SCHEMA[domain])
        for attr in entry.requestables:
            if attr not in attrs:
                violations.append(GoalViolation("unknown_requestable", domain, attr))
    return violations


class Mode(str, Enum):
    """Which agent levels may interrupt the user with a clarification question."""

    NO_CLARIFY = "no_clarify"
    EXPERT_ONLY = "expert_only"
    SUPERVISOR_ONLY = "supervisor_only"
    BOTH = "both"


def clarification_allowed(mode: Mode, level: ClarificationLevel) -> bool:
    if level is ClarificationLevel.SUPERVISOR:
        return mode in (Mode.SUPERVISOR_ONLY, Mode.BOTH)
    return mode in (Mode.EXPERT_ONLY, Mode.BOTH)


class Speaker(str, Enum):
    USER = "user"
    SUPERVISOR = "supervisor"
    EXPERT = "expert"
    ENVIRONMENT = "environment"
    JUDGE = "judge"


class Termination(str, Enum):
    COMPLETED = "completed"
    TURN_BUDGET_EXCEEDED = "turn_budget_exceeded"
    LOOP_DETECTED = "loop_detected"
    BACKEND_ERROR = "backend_error"


@dataclass(frozen=True)
class Message:
    speaker: Speaker
    content: str
    turn_index: int
    action: Optional[Any] = None  # protocol.AgentAction when the speaker is an agent
    clarification: Optional[ClarificationCategory] = None
    domain: Optional[Domain] = None  # set for expert and environment messages

    def __post_init__(self) -> None:
        if self.turn_index < 0:
            raise ValueError("turn_index must be nonnegative")
        if self.clarification is not None and not _is_clarify_action(self.action):
            raise ValueError("clarification category requires a Clarify action")
        if self.speaker is Speaker.ENVIRONMENT and not self.content.startswith("API Result:"):
            raise ValueError("environment messages carry only API results")

    def to_dict(self) -> dict[str, Any]:
        from . import protocol  # local import: protocol depends on core types

        return {
            "speaker": self.speaker.value,
            "content": self.content,
            "turn": self.turn_index,
            "action": None if self.action is None else protocol.action_to_dict(self.action),
            "clarification": None if self.clarification is None else self.clarification.to_dict(),
            "domain": None if self.domain is None else self.domain.value,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Message":
        from . import protocol

        return cls(
            speaker=Speaker(data["speaker"]),
            content=data["content"],
            turn_index=data["turn"],
            action=None if data.get("action") is None else protocol.action_from_dict(data["action"]),
            clarification=(
                None
                if data.get("clarification") is None
                else ClarificationCategory.from_dict(data["clarification"])
            ),
            domain=None if data.get("domain") is None else Domain(data["domain"]),
        )


def _is_clarify_action(action: Any) -> bool:
    return action is not None and getattr(action, "tag", "") == "clarify"


@dataclass(frozen=True)
class Transcript:
    """Ordered dialogue record; append returns a new transcript (instances are shared freely)."""

    messages: tuple[Message, ...] = ()
    goal: Optional[UserGoal] = None
    terminated: Optional[Termination] = None

    def __post_init__(self) -> None:
        indices = [m.turn_index for m in self.messages]
        if any(b <= a for a, b in zip(indices, indices[1:])):
            raise ValueError("turn indices must strictly increase")

    def append(self, message: Message) -> "Transcript":
        return replace(self, messages=self.messages + (message,))

    def finish(self, status: Termination) -> "Transcript":
        return replace(self, terminated=status)

    @property
    def next_turn_index(self) -> int:
        return self.messages[-1].turn_index + 1 if self.messages else 0

    @property
    def exchanges(self) -> int:
        """User/system exchange count = number of user messages so far."""
        return sum(1 for m in self.messages if m.speaker is Speaker.USER)

    def last_message(self, *speakers: Speaker) -> Optional[Message]:
        for m in reversed(self.messages):
            if not speakers or m.speaker in speakers:
                return m
        return None

    def user_visible_system_messages(self) -> list[Message]:
        """Agent messages shown to the user: clarify questions and final responses."""
        out = []
        for m in self.messages:
            if m.speaker in (Speaker.SUPERVISOR, Speaker.EXPERT) and m.action is not None:
                if getattr(m.action, "tag", "") in ("clarify", "respond"):
                    out.append(m)
        return out


# --- transcript persistence (JSON Lines, header record first) ---

def transcript_to_jsonl(transcript: Transcript, *, mode: Optional[Mode] = None, seed: Optional[int] = None) -> str:
    header = {
        "record": "header",
        "goal_id": transcript.goal.goal_id if transcript.goal else None,
        "mode": mode.value if mode else None,
        "seed": seed,
        "goal": transcript.goal.to_dict() if transcript.goal else None,
    }
    lines = [json.dumps(header, sort_keys=True)]
    for m in transcript.messages:
        lines.append(json.dumps({"record": "message", **m.to_dict()}, sort_keys=True))
    lines.append(
        json.dumps(
            {"record": "end", "terminated": transcript.terminated.value if transcript.terminated else None},
            sort_keys=True,
        )
    )
    return "\n".join(lines) + "\n"


def transcript_from_jsonl(text: str) -> tuple[Transcript, dict[str, Any]]:
    """Returns the transcript plus the header metadata dict."""
    lines = [json.loads(line) for line in text.splitlines() if line.strip()]
    if not lines or lines[0].get("record") != "header":
        raise ValueError("transcript stream must start with a header record")
    header = lines[0]
    goal = UserGoal.from_dict(header["goal"]) if header.get("goal") else None
    messages = tuple(Message.from_dict(rec) for rec in lines[1:] if rec.get("record") == "message")
    terminated: Optional[Termination] = None
    for rec in lines[1:]:
        if rec.get("record") == "end" and rec.get("terminated"):
            terminated = Termination(rec["terminated"])
    return Transcript(messages=messages, goal=goal, terminated=terminated), header


def write_transcript(fh: IO[str], transcript: Transcript, *, mode: Optional[Mode] = None, seed: Optional[int] = None) -> None:
    fh.write(transcript_to_jsonl(transcript, mode=mode, seed=seed))


@dataclass(frozen=True)
class RunConfig:
    """Everything that determines an evaluation run."""

    mode: Mode
    backends: dict[str, str] = field(default_factory=dict)  # role -> registered binding name
    max_exchanges: int = 20
    max_api_calls_per_turn: int = 5
    repetitions: int = 5
    seed: int = 0
    loop_window: int = 3
    # taxonomy-cluster ablations: strip kinds from the clarify prompt text
    drop_supervisor_ambiguity_cluster: bool = False
    drop_expert_slot_cluster: bool = False

    def __post_init__(self) -> None:
        if self.max_exchanges <= 0 or self.max_api_calls_per_turn <= 0 or self.repetitions <= 0:
            raise ValueError("budgets and repetition count must be positive")
        if self.loop_window < 2:
            raise ValueError("loop window must be at least 2")

    def backend_for(self, role: str) -> str:
        """Resolve a role ("supervisor", "expert:hotel", "simulator", "judge") to a binding name."""
        if role in self.backends:
            return self.backends[role]
        if role.startswith("expert:") and "expert" in self.backends:
            return self.backends["expert"]
        raise KeyError(f"no backend binding for role {role!r}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "mode": self.mode.value,
            "backends": dict(sorted(self.backends.items())),
            "max_exchanges": self.max_exchanges,
            "max_api_calls_per_turn": self.max_api_calls_per_turn,
            "repetitions": self.repetitions,
            "seed": self.seed,
            "loop_window": self.loop_window,
            "drop_supervisor_ambiguity_cluster": self.drop_supervisor_ambiguity_cluster,
            "drop_expert_slot_cluster": self.drop_expert_slot_cluster,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "RunConfig":
        return cls(
            mode=Mode(data["mode"]),
            backends=dict(data.get("backends", {})),
            max_exchanges=data.get("max_exchanges", 20),
            max_api_calls_per_turn=data.get("max_api_calls_per_turn", 5),
            repetitions=data.get("repetitions", 5),
            seed=data.get("seed", 0),
            loop_window=data.get("loop_window", 3),
            drop_supervisor_ambiguity_cluster=data.get("drop_supervisor_ambiguity_cluster", False),
            drop_expert_slot_cluster=data.get("drop_expert_slot_cluster", False),
        )


def load_goal(path: str) -> UserGoal:
    with open(path, encoding="utf-8") as fh:
        return UserGoal.from_dict(json.load(fh))


def load_goals(paths: Iterable[str]) -> list[UserGoal]:
    return [load_goal(p) for p in paths]
