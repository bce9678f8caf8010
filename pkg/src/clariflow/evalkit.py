"""Success judging, run metrics, the ablation grid runner, and the
clarification-dialogue data generator/validator."""

from __future__ import annotations

import csv
import json
import logging
import os
import re
import statistics
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import resources
from typing import Callable, Iterable, Optional

from .backend import BackendError, ChatRequest
from .core import (
    Domain,
    Mode,
    RunConfig,
    Speaker,
    Termination,
    Transcript,
    UserGoal,
)
from .protocol import ApiCall, Respond
from .worldenv import api_schema

log = logging.getLogger(__name__)


class JudgeParseError(Exception):
    pass


class InvalidGeneration(Exception):
    pass


@dataclass(frozen=True)
class Constraint:
    """One yes/no obligation extracted from a goal."""

    kind: str  # "informable" | "requestable" | "booking_arg" | "booking_done"
    domain: Domain
    slot: Optional[str] = None
    value: Optional[str] = None

    def describe(self) -> str:
        if self.kind == "informable":
            if self.value == "dontcare":
                return f"the user's indifference about {self.domain.value} {self.slot} was respected"
            return f"the {self.domain.value} search honored {self.slot} = {self.value}"
        if self.kind == "requestable":
            return f"the user was told the {self.domain.value} {self.slot}"
        if self.kind == "booking_arg":
            return f"the {self.domain.value} booking used {self.slot} = {self.value}"
        return f"a {self.domain.value} booking was confirmed with a reference"


def goal_constraints(goal: UserGoal) -> list[Constraint]:
    constraints: list[Constraint] = []
    for domain in sorted(goal.entries, key=lambda d: d.value):
        entry = goal.entries[domain]
        for slot, value in sorted(entry.informable.items()):
            constraints.append(Constraint("informable", domain, slot, value.raw()))
        for attr in sorted(entry.requestables):
            constraints.append(Constraint("requestable", domain, attr))
        if entry.booking is not None:
            for slot, value in sorted(entry.booking.items()):
                constraints.append(Constraint("booking_arg", domain, slot, value.raw()))
            constraints.append(Constraint("booking_done", domain))
    return constraints


@dataclass(frozen=True)
class SuccessJudgment:
    success: bool
    verdicts: dict[str, bool]
    rationale: str
    judge_id: str

    def __post_init__(self) -> None:
        if self.success != all(self.verdicts.values()):
            raise ValueError("success must equal the conjunction of per-constraint verdicts")

    @classmethod
    def from_verdicts(cls, verdicts: dict[str, bool], rationale: str, judge_id: str) -> "SuccessJudgment":
        return cls(all(verdicts.values()), dict(verdicts), rationale, judge_id)


# --- deterministic rule-checker judge ---

_BOOKED_RE = re.compile(r"API Result: booked, reference=([A-Z0-9]{8})")

_ATTR_CUES = {
    "leaveAt": ("leaveat", "leaves at", "leave at", "departs at"),
    "arriveBy": ("arriveby", "arrives", "arrive by", "arrival"),
    "entrancefee": ("entrancefee", "entrance fee", "admission"),
    "pricerange": ("pricerange", "price range", "price"),
    "trainID": ("trainid", "train id"),
}


def _api_events(transcript: Transcript) -> list[tuple[ApiCall, Optional[str]]]:
    """(api call, following environment result text) pairs in dialogue order."""
    events: list[tuple[ApiCall, Optional[str]]] = []
    pending: Optional[ApiCall] = None
    for m in transcript.messages:
        if m.speaker is Speaker.EXPERT and isinstance(m.action, ApiCall):
            pending = m.action
        elif m.speaker is Speaker.ENVIRONMENT and pending is not None:
            events.append((pending, m.content))
            pending = None
    if pending is not None:
        events.append((pending, None))
    return events


def _check_constraint(constraint: Constraint, transcript: Transcript) -> bool:
    events = _api_events(transcript)
    domain_events = [(call, res) for call, res in events if api_schema(call.name).domain is constraint.domain]

    if constraint.kind == "informable":
        if constraint.value == "dontcare":
            return True
        for call, _ in domain_events:
            value = call.input.get(constraint.slot)
            if value is not None and value.is_value and value.text.lower() == constraint.value.lower():
                return True
        return False

    if constraint.kind == "requestable":
        cues = _ATTR_CUES.get(constraint.slot, (constraint.slot.lower(),))
        texts = []
        for m in transcript.messages:
            if m.speaker is Speaker.ENVIRONMENT and m.domain is constraint.domain:
                texts.append(m.content.lower())
            elif m.speaker is Speaker.EXPERT and isinstance(m.action, Respond):
                texts.append(m.action.utterance.lower())
        return any(cue in text for cue in cues for text in texts)

    if constraint.kind == "booking_arg":
        for call, result in domain_events:
            if api_schema(call.name).kind != "book" or result is None or not _BOOKED_RE.search(result):
                continue
            value = call.input.get(constraint.slot)
            if value is not None and value.is_value and value.text.lower() == constraint.value.lower():
                return True
        return False

    # booking_done
    for call, result in domain_events:
        if api_schema(call.name).kind == "book" and result is not None and _BOOKED_RE.search(result):
            return True
    return False


def rule_check_judge(goal: UserGoal, transcript: Transcript) -> SuccessJudgment:
    """String-matching judge over API calls, results, and responses. CI default."""
    constraints = goal_constraints(goal)
    verdicts = {c.describe(): _check_constraint(c, transcript) for c in constraints}
    return SuccessJudgment.from_verdicts(verdicts, "deterministic rule check", "rule-checker")


# --- LLM judge ---

_CONSTRAINT_LINE_RE = re.compile(r"^\s*CONSTRAINT\s+(\d+)\s*:\s*(YES|NO)\s*$", re.IGNORECASE | re.MULTILINE)


def render_transcript_for_judge(transcript: Transcript) -> str:
    lines = []
    for m in transcript.messages:
        if m.speaker is Speaker.USER:
            lines.append(f"User: {m.content}")
        elif m.speaker is Speaker.ENVIRONMENT:
            lines.append(m.content)
        elif m.action is not None and getattr(m.action, "tag", "") != "route":
            who = m.speaker.value.capitalize()
            if m.domain is not None:
                who = f"{m.domain.value.capitalize()} expert"
            lines.append(f"{who}: {m.content}")
    return "\n".join(lines)


def judge_success(goal: UserGoal, transcript: Transcript, backend, judge_id: str = "llm") -> SuccessJudgment:
    """Prompt a backend judge per constraint; the overall bit is computed locally."""
    if transcript.terminated is None:
        raise ValueError("judge requires a terminated transcript")
    constraints = goal_constraints(goal)
    numbered = "\n".join(f"{i + 1}. {c.describe()}" for i, c in enumerate(constraints))
    template = resources.files("clariflow").joinpath("prompts", "judge.txt").read_text(encoding="utf-8")
    prompt = template.replace("{{constraints}}", numbered).replace(
        "{{transcript}}", render_transcript_for_judge(transcript)
    )
    request = ChatRequest(system_prompt="", turns=(("user", prompt),), tag="judge")

    def parse(reply: str) -> Optional[dict[str, bool]]:
        found = {int(i): verdict.upper() == "YES" for i, verdict in _CONSTRAINT_LINE_RE.findall(reply)}
        if set(found) != set(range(1, len(constraints) + 1)):
            return None
        return {constraints[i - 1].describe(): found[i] for i in sorted(found)}

    reply = backend.complete(request)
    verdicts = parse(reply)
    if verdicts is None:
        retry = request.with_turns(
            ("assistant", reply),
            ("user", "Answer again with exactly one 'CONSTRAINT <i>: YES' or 'CONSTRAINT <i>: NO' line per constraint."),
        )
        reply = backend.complete(retry)
        verdicts = parse(reply)
        if verdicts is None:
            raise JudgeParseError("judge reply had no parseable constraint lines after retry")
    rationale = _CONSTRAINT_LINE_RE.sub("", reply).strip()
    return SuccessJudgment.from_verdicts(verdicts, rationale, judge_id)


# --- metrics ---

def success_max_at_k(rates: list[float]) -> float:
    if not rates:
        raise ValueError("need at least one rate")
    return max(rates)


def success_avg_at_k(rates: list[float]) -> tuple[float, float]:
    """(mean, sample standard deviation); std is 0.0 for a single run."""
    if not rates:
        raise ValueError("need at least one rate")
    mean = statistics.fmean(rates)
    std = statistics.stdev(rates) if len(rates) > 1 else 0.0
    return mean, std


def avg_turns(transcripts: Iterable[Transcript]) -> float:
    counts = [t.exchanges for t in transcripts]
    if not counts:
        raise ValueError("need at least one transcript")
    return statistics.fmean(counts)


# --- ablation runner ---

@dataclass(frozen=True)
class DialogueRow:
    goal_id: str
    repetition: int
    success: bool
    exchanges: int
    terminated: str

    def to_dict(self) -> dict:
        return {
            "goal_id": self.goal_id,
            "repetition": self.repetition,
            "success": self.success,
            "exchanges": self.exchanges,
            "terminated": self.terminated,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DialogueRow":
        return cls(data["goal_id"], data["repetition"], data["success"], data["exchanges"], data["terminated"])


@dataclass(frozen=True)
class RunReport:
    mode: Mode
    rows: tuple[DialogueRow, ...]
    repetitions: int

    @property
    def per_rep_rates(self) -> list[float]:
        rates = []
        for rep in range(self.repetitions):
            rep_rows = [r for r in self.rows if r.repetition == rep]
            rates.append(sum(r.success for r in rep_rows) / len(rep_rows) if rep_rows else 0.0)
        return rates

    @property
    def max_at_k(self) -> float:
        return success_max_at_k(self.per_rep_rates)

    @property
    def avg_at_k(self) -> tuple[float, float]:
        return success_avg_at_k(self.per_rep_rates)

    @property
    def average_exchanges(self) -> float:
        return statistics.fmean(r.exchanges for r in self.rows) if self.rows else 0.0

    def to_dict(self) -> dict:
        mean, std = self.avg_at_k
        return {
            "mode": self.mode.value,
            "repetitions": self.repetitions,
            "rows": [r.to_dict() for r in sorted(self.rows, key=lambda r: (r.repetition, r.goal_id))],
            "per_rep_rates": self.per_rep_rates,
            "max_at_k": self.max_at_k,
            "avg_at_k_mean": mean,
            "avg_at_k_std": std,
            "avg_turns": self.average_exchanges,
        }


DialogueRunner = Callable[[Mode, UserGoal, int], tuple[Transcript, bool]]


def run_ablation(
    modes: list[Mode],
    goals: list[UserGoal],
    repetitions: int,
    run_one: DialogueRunner,
    out_dir: Optional[str] = None,
    workers: int = 1,
) -> list[RunReport]:
    """Run every (mode, repetition, goal) cell; resumable via a checkpoint file.

    run_one(mode, goal, repetition) executes a single dialogue and returns the
    transcript plus the success bit. A dialogue that raises is recorded as a
    failure with its termination status. Dialogues within a cell run on up to
    `workers` threads; reports are aggregated single-threaded and sorted, so
    they do not depend on completion order.
    """
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
    checkpoint_path = os.path.join(out_dir, "checkpoint.jsonl") if out_dir else None
    checkpoint_lock = threading.Lock()
    done: dict[tuple[str, int, str], DialogueRow] = {}
    if checkpoint_path and os.path.exists(checkpoint_path):
        with open(checkpoint_path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                record = json.loads(line)
                row = DialogueRow.from_dict(record["row"])
                done[(record["mode"], row.repetition, row.goal_id)] = row

    def checkpoint(mode: Mode, row: DialogueRow) -> None:
        if checkpoint_path:
            with checkpoint_lock, open(checkpoint_path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps({"mode": mode.value, "row": row.to_dict()}, sort_keys=True) + "\n")

    def run_cell(mode: Mode, goal: UserGoal, rep: int) -> DialogueRow:
        try:
            transcript, success = run_one(mode, goal, rep)
            row = DialogueRow(
                goal.goal_id,
                rep,
                success,
                transcript.exchanges,
                transcript.terminated.value if transcript.terminated else "unknown",
            )
        except BackendError as exc:
            log.warning("dialogue %s/%s/%d failed: %s", mode.value, goal.goal_id, rep, exc)
            row = DialogueRow(goal.goal_id, rep, False, 0, Termination.BACKEND_ERROR.value)
        done[(mode.value, rep, goal.goal_id)] = row
        checkpoint(mode, row)  # persisted as soon as the dialogue finishes
        return row

    reports: list[RunReport] = []
    for mode in modes:
        rows = [
            done[(mode.value, rep, goal.goal_id)]
            for rep in range(repetitions)
            for goal in goals
            if (mode.value, rep, goal.goal_id) in done
        ]
        pending = [
            (rep, goal)
            for rep in range(repetitions)
            for goal in goals
            if (mode.value, rep, goal.goal_id) not in done
        ]
        if workers > 1 and pending:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                rows.extend(pool.map(lambda cell: run_cell(mode, cell[1], cell[0]), pending))
        else:
            rows.extend(run_cell(mode, goal, rep) for rep, goal in pending)
        report = RunReport(mode, tuple(rows), repetitions)
        reports.append(report)
        if out_dir:
            with open(os.path.join(out_dir, f"report_{mode.value}.json"), "w", encoding="utf-8") as fh:
                json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
    if out_dir:
        write_summary_csv(reports, os.path.join(out_dir, "summary.csv"))
    return reports


def write_summary_csv(reports: list[RunReport], path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["mode", "max_at_k", "avg_at_k", "std", "avg_turns"])
        for report in reports:
            mean, std = report.avg_at_k
            writer.writerow(
                [report.mode.value, f"{report.max_at_k:.4f}", f"{mean:.4f}", f"{std:.4f}", f"{report.average_exchanges:.4f}"]
            )


# --- clarified-dialogue data generation ---

_CLARIFY_TAG_RE = re.compile(r"<\s*clarify\s*>(.*?)<\s*/\s*clarify\s*>", re.IGNORECASE | re.DOTALL)
_STRAY_CLARIFY_RE = re.compile(r"<\s*/?\s*clarify\s*>", re.IGNORECASE)


def validate_clarified_turns(turns: object) -> list[dict[str, str]]:
    """Enforce the generated-conversation contract; raises InvalidGeneration."""
    if not isinstance(turns, list) or not turns:
        raise InvalidGeneration("output must be a nonempty JSON array")
    cleaned: list[dict[str, str]] = []
    clarifications = 0
    for i, turn in enumerate(turns):
        if not isinstance(turn, dict) or set(turn) != {"from", "value"}:
            raise InvalidGeneration(f"turn {i} must be an object with 'from' and 'value'")
        who, value = turn["from"], turn["value"]
        if who not in ("user", "agent") or not isinstance(value, str):
            raise InvalidGeneration(f"turn {i} has a bad speaker or value")
        expected = "user" if i % 2 == 0 else "agent"
        if who != expected:
            raise InvalidGeneration(f"turn {i} breaks user/agent alternation")
        tags = _CLARIFY_TAG_RE.findall(value)
        stray = len(_STRAY_CLARIFY_RE.findall(value)) - 2 * len(tags)
        if stray:
            raise InvalidGeneration(f"turn {i} has unbalanced clarify tags")
        if tags:
            if who != "agent":
                raise InvalidGeneration(f"turn {i}: only agent turns may clarify")
            if len(tags) > 1 or not tags[0].strip():
                raise InvalidGeneration(f"turn {i} has a malformed clarification")
            clarifications += 1
        cleaned.append({"from": who, "value": value})
    if clarifications < 1:
        raise InvalidGeneration("conversation must contain at least one clarification")
    if clarifications > 3:
        raise InvalidGeneration("conversation must contain at most three clarifications")
    return cleaned


def generate_clarified_dialogue(
    goal_text: str, conversation: list[dict[str, str]], backend
) -> list[dict[str, str]]:
    """Rewrite a ground-truth conversation to include 1-3 agent clarifications."""
    template = resources.files("clariflow").joinpath("prompts", "datagen.txt").read_text(encoding="utf-8")
    prompt = template.replace("{{user_goal}}", goal_text).replace(
        "{{conversation}}", json.dumps(conversation, ensure_ascii=False, indent=1)
    )
    request = ChatRequest(system_prompt="", turns=(("user", prompt),), tag="datagen")

    def attempt(reply: str) -> list[dict[str, str]]:
        try:
            data = json.loads(reply)
        except json.JSONDecodeError as exc:
            raise InvalidGeneration(f"output is not valid JSON: {exc}")
        return validate_clarified_turns(data)

    reply = backend.complete(request)
    try:
        return attempt(reply)
    except InvalidGeneration as first_error:
        retry = request.with_turns(
            ("assistant", reply),
            ("user", f"That output was rejected ({first_error}). Output only the corrected JSON array."),
        )
        return attempt(backend.complete(retry))
