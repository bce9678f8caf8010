"""Goal-conditioned user simulation: an LLM-backed user, a scripted user for
deterministic tests, and the goal-document loader."""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from importlib import resources
from typing import Any

from .backend import ChatRequest
from .core import Domain, GoalEntry, SlotValue, Speaker, Transcript, UserGoal
from .worldenv import SchemaError

TERMINATION_PHRASE = "[ALL DONE]"

_REFERENCE_RE = re.compile(r"reference\s*(?:number|code)?\s*[:=]?\s*([A-Z0-9]{8})", re.IGNORECASE)


@dataclass(frozen=True)
class UserReply:
    utterance: str
    done: bool = False


@dataclass(frozen=True)
class SimulatorPersona:
    goal: UserGoal
    verbosity: str = "terse"  # "terse" | "chatty"
    underspecification_rate: float = 0.5
    termination_phrase: str = TERMINATION_PHRASE

    def __post_init__(self) -> None:
        if not 0.0 <= self.underspecification_rate <= 1.0:
            raise ValueError("underspecification rate must be in [0, 1]")


class ScriptedUser:
    """Plays back fixed utterances; exhaustion means the user is done."""

    def __init__(self, lines: list[str]):
        if not lines:
            raise ValueError("scripted user needs at least one line")
        self.lines = list(lines)
        self._cursor = 0

    def next_reply(self, transcript: Transcript) -> UserReply:
        if self._cursor >= len(self.lines):
            return UserReply("", done=True)
        line = self.lines[self._cursor]
        self._cursor += 1
        return UserReply(line)


def scripted_user(script: list[str]) -> ScriptedUser:
    return ScriptedUser(script)


def withheld_slots(goal: UserGoal, rate: float, seed: int) -> frozenset[tuple[Domain, str]]:
    """Deterministic selection of informable slots the user holds back until asked."""
    withheld: set[tuple[Domain, str]] = set()
    for domain in sorted(goal.entries, key=lambda d: d.value):
        for slot in sorted(goal.entries[domain].informable):
            digest = hashlib.sha256(f"{seed}:{goal.goal_id}:{domain.value}:{slot}".encode()).digest()
            fraction = int.from_bytes(digest[:8], "big") / 2**64
            if fraction < rate:
                withheld.add((domain, slot))
    return frozenset(withheld)


def goal_description(goal: UserGoal) -> str:
    lines = []
    for domain in sorted(goal.entries, key=lambda d: d.value):
        entry = goal.entries[domain]
        lines.append(f"{domain.value.capitalize()}:")
        for slot, value in sorted(entry.informable.items()):
            if value.is_value:
                lines.append(f"  - you want {slot} = {value.text}")
            else:
                lines.append(f"  - you do not care about {slot}")
        for attr in sorted(entry.requestables):
            lines.append(f"  - find out the {attr}")
        if entry.booking is not None:
            details = ", ".join(f"{s}={v.raw()}" for s, v in sorted(entry.booking.items()))
            lines.append(f"  - make a booking ({details}) and get the reference number")
    return "\n".join(lines)


class LlmUser:
    """Backend-driven user pursuing a goal; withholds some slots until asked."""

    def __init__(self, persona: SimulatorPersona, backend, seed: int = 0):
        self.persona = persona
        self.backend = backend
        self.withheld = withheld_slots(persona.goal, persona.underspecification_rate, seed)
        template = resources.files("clariflow").joinpath("prompts", "simulator.txt").read_text(encoding="utf-8")
        withheld_text = (
            "\n".join(f"  - {domain.value} {slot}" for domain, slot in sorted(self.withheld, key=str))
            or "  (nothing is withheld)"
        )
        self.system_prompt = (
            template.replace("{{goal_description}}", goal_description(persona.goal))
            .replace("{{withheld}}", withheld_text)
            .replace("{{termination_phrase}}", persona.termination_phrase)
        )

    def _turns(self, transcript: Transcript) -> tuple[tuple[str, str], ...]:
        # from the simulated user's seat: agent questions arrive as "user" turns,
        # the user's own past utterances are "assistant" turns
        turns: list[tuple[str, str]] = [("user", "Hello! How can I help you today?")]
        for m in transcript.messages:
            if m.speaker is Speaker.USER:
                turns.append(("assistant", m.content))
            elif m.speaker in (Speaker.SUPERVISOR, Speaker.EXPERT) and m.action is not None:
                if getattr(m.action, "tag", "") in ("clarify", "respond"):
                    turns.append(("user", m.content))
        return tuple(turns)

    def goal_satisfied_in(self, transcript: Transcript) -> bool:
        """The user's own view: every requestable surfaced and every booking confirmed."""
        visible = " \n ".join(
            m.content for m in transcript.messages if m.speaker in (Speaker.SUPERVISOR, Speaker.EXPERT)
        ).lower()
        references = _REFERENCE_RE.findall(
            "\n".join(m.content for m in transcript.messages if m.speaker is not Speaker.USER)
        )
        bookings_wanted = 0
        for domain, entry in self.persona.goal.entries.items():
            for attr in entry.requestables:
                if attr.lower() not in visible:
                    return False
            if entry.booking is not None:
                bookings_wanted += 1
        return len(references) >= bookings_wanted

    def next_reply(self, transcript: Transcript) -> UserReply:
        last = transcript.last_message()
        if last is not None and last.speaker is Speaker.USER:
            raise ValueError("it is not the user's turn")
        request = ChatRequest(system_prompt=self.system_prompt, turns=self._turns(transcript), tag="simulator")
        text = self.backend.complete(request).strip()
        wants_done = self.persona.termination_phrase in text
        if wants_done and self.goal_satisfied_in(transcript):
            return UserReply("", done=True)
        utterance = text.replace(self.persona.termination_phrase, "").strip() or text
        return UserReply(utterance)


def next_user_utterance(persona: SimulatorPersona, transcript: Transcript, backend, seed: int = 0) -> UserReply:
    """One-shot form of LlmUser.next_reply with the same deterministic withheld set."""
    return LlmUser(persona, backend, seed=seed).next_reply(transcript)


_GOAL_DOMAIN_KEYS = {d.value: d for d in Domain}
_IGNORED_GOAL_KEYS = {"message", "topic", "fail_info", "fail_book", "goal_id", "id"}


def goal_from_multiwoz(doc: Any) -> UserGoal:
    """Extract informables/requestables/booking from a goal document.

    Accepts the upstream goal layout: one object per domain with "info",
    "reqt", and "book" sections; auxiliary sections are ignored.
    """
    if not isinstance(doc, dict):
        raise SchemaError(0, "goal document must be a JSON object")
    goal_id = str(doc.get("goal_id") or doc.get("id") or "goal")
    entries: dict[Domain, GoalEntry] = {}
    for key, section in doc.items():
        if key in _IGNORED_GOAL_KEYS:
            continue
        if key not in _GOAL_DOMAIN_KEYS:
            raise SchemaError(0, f"unknown goal section {key!r}")
        if not isinstance(section, dict):
            raise SchemaError(0, f"domain section {key!r} must be an object")
        if not section:
            continue
        info = section.get("info", {})
        reqt = section.get("reqt", [])
        book = section.get("book")
        if not isinstance(info, dict) or not isinstance(reqt, list) or not (book is None or isinstance(book, dict)):
            raise SchemaError(0, f"bad section shapes in {key!r}")
        try:
            informable = {str(s): SlotValue.from_raw(str(v)) for s, v in info.items()}
            booking = None if not book else {str(s): SlotValue.from_raw(str(v)) for s, v in book.items()}
        except ValueError as exc:
            raise SchemaError(0, f"bad slot value in {key!r}: {exc}")
        entries[_GOAL_DOMAIN_KEYS[key]] = GoalEntry(
            informable=informable,
            requestables=frozenset(str(a) for a in reqt),
            booking=booking,
        )
    if not entries:
        raise SchemaError(0, "goal has no domain sections")
    return UserGoal(goal_id=goal_id, entries=entries)
