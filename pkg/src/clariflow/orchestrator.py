"""The supervisor/expert control loop.

Each user exchange runs: supervisor first (clarify or route), then the routed
expert (clarify, or an API sub-loop ending in a response). At most one
clarification question reaches the user per exchange, and the level that may
ask is gated by the run mode.
"""

from __future__ import annotations

import logging
import os
import re
from dataclasses import dataclass, field
from importlib import resources
from typing import Callable, Optional

from .backend import BackendError, BackendRegistry, ChatRequest
from .core import (
    API_TABLE,
    EXPERT_KINDS,
    SUPERVISOR_KINDS,
    TAXONOMY_TEXT,
    ClarificationCategory,
    ClarificationKind,
    ClarificationLevel,
    Domain,
    Message,
    Mode,
    RunConfig,
    Speaker,
    Termination,
    Transcript,
    UserGoal,
    clarification_allowed,
    slot_vocabulary,
)
from .protocol import (
    AgentAction,
    ApiCall,
    Clarify,
    Malformed,
    Parsed,
    Respond,
    RouteDomain,
    parse_expert_output,
    parse_supervisor_output,
    render_action,
    render_api_result,
)
from .worldenv import BookingLedger, WorldDatabase, WorldError, api_schema, execute_booking, query_venues

log = logging.getLogger(__name__)

FORMAT_REMINDER = (
    "Your previous reply did not follow the required output format. "
    "Answer again, following the output format instructions exactly."
)

# prompt-facing display names (the availability line spells the hotel query in
# the plural; the parser accepts both spellings)
_API_DISPLAY = {"query_hotel": "query_hotels"}

_PLACEHOLDER_RE = re.compile(r"\{\{\s*([a-z_]+)\s*\}\}")

# taxonomy clusters that config may ablate out of the clarify prompts
SUPERVISOR_AMBIGUITY_CLUSTER = frozenset(
    {
        ClarificationKind.DOMAIN_AMBIGUITY,
        ClarificationKind.INTENT_AMBIGUITY,
        ClarificationKind.VAGUE_GOAL,
        ClarificationKind.CONTEXTUAL_DISAMBIGUATION,
    }
)
EXPERT_SLOT_CLUSTER = frozenset(
    {ClarificationKind.PARAMETER_UNDERSPECIFICATION, ClarificationKind.VALUE_AMBIGUITY}
)


class UnboundPlaceholder(Exception):
    pass


class BudgetExceeded(Exception):
    pass


class ProtocolViolation(BackendError):
    """The backend failed to produce a parseable action even after the retry."""

    def __init__(self, reason: str, raw: str):
        super().__init__(f"unparseable agent output ({reason})")
        self.reason = reason
        self.raw = raw


@dataclass(frozen=True)
class PromptRole:
    level: ClarificationLevel
    clarify: bool
    domain: Optional[Domain] = None

    def __post_init__(self) -> None:
        if self.level is ClarificationLevel.EXPERT and self.domain is None:
            raise ValueError("expert prompt role needs a domain")


def render_template(template: str, bindings: dict[str, str]) -> str:
    """Substitute {{name}} placeholders; any unbound placeholder is an error."""

    def sub(match: re.Match) -> str:
        name = match.group(1)
        if name not in bindings:
            raise UnboundPlaceholder(name)
        return bindings[name]

    return _PLACEHOLDER_RE.sub(sub, template)


def _load_asset(name: str, override_dir: Optional[str]) -> str:
    if override_dir:
        path = os.path.join(override_dir, name)
        if os.path.exists(path):
            with open(path, encoding="utf-8") as fh:
                return fh.read()
    return resources.files("clariflow").joinpath("prompts", name).read_text(encoding="utf-8")


def taxonomy_prompt_text(level: ClarificationLevel, config: RunConfig) -> str:
    """The bulleted taxonomy for the clarify-capable prompt variants."""
    kinds = SUPERVISOR_KINDS if level is ClarificationLevel.SUPERVISOR else EXPERT_KINDS
    dropped: frozenset[ClarificationKind] = frozenset()
    if level is ClarificationLevel.SUPERVISOR and config.drop_supervisor_ambiguity_cluster:
        dropped = SUPERVISOR_AMBIGUITY_CLUSTER
    if level is ClarificationLevel.EXPERT and config.drop_expert_slot_cluster:
        dropped = EXPERT_SLOT_CLUSTER
    lines = []
    for kind in kinds:
        if kind in dropped:
            continue
        title, description = TAXONOMY_TEXT[kind]
        lines.append(f"- {title}: {description}")
    return "\n".join(lines)


def api_display_name(name: str) -> str:
    return _API_DISPLAY.get(name, name)


def api_descriptions_text(domain: Domain) -> str:
    lines = []
    for name, (dom, args, kind) in API_TABLE.items():
        if dom is not domain:
            continue
        verb = "search the database" if kind == "query" else "make a booking"
        lines.append(f"- {api_display_name(name)}: {verb}; arguments: {', '.join(args)}")
    return "\n".join(lines)


def example_conversation_text(domain: Domain) -> str:
    query_api = next(
        (name for name, (dom, _, kind) in API_TABLE.items() if dom is domain and kind == "query"),
        None,
    )
    if query_api is None:  # taxi has no query API
        return (
            "User: I need a taxi from the station to the museum.\n"
            "Thought: I have both places, so I can book the ride.\n"
            "API Name: book_taxi\n"
            'API Input: {"departure": "the station", "destination": "the museum", "leaveAt": "any", "arriveBy": "any"}\n'
            "API Result: booked, reference=EXAMPLE1\n"
            "Thought: The ride is booked; tell the user.\n"
            "Response: Your taxi is booked, reference EXAMPLE1."
        )
    first_arg = API_TABLE[query_api][1][0]
    return (
        f"User: I'm looking for a {domain.value}.\n"
        f"Thought: I should search the {domain.value} database with the constraints given so far.\n"
        f"API Name: {api_display_name(query_api)}\n"
        f'API Input: {{"{first_arg}": "any"}}\n'
        "API Result: 2 matching records\n"
        "Thought: There are matches; summarize them for the user.\n"
        "Response: I found a couple of options for you. Would you like more details?"
    )


def render_history(transcript: Transcript) -> str:
    """User-visible dialogue lines (clarify questions, responses, user turns)."""
    lines = []
    for m in transcript.messages:
        if m.speaker is Speaker.USER:
            lines.append(f"User: {m.content}")
        elif m.speaker in (Speaker.SUPERVISOR, Speaker.EXPERT) and m.action is not None:
            if isinstance(m.action, Clarify):
                who = "Supervisor" if m.speaker is Speaker.SUPERVISOR else f"{m.domain.value.capitalize()} expert"
                lines.append(f"{who}: {m.action.question}")
            elif isinstance(m.action, Respond):
                lines.append(f"Assistant: {m.action.utterance}")
    return "\n".join(lines) if lines else "(no conversation yet)"


@dataclass
class OrchestratorState:
    """Per-dialogue mutable state; never shared between dialogues."""

    transcript: Transcript
    ledger: BookingLedger
    active_domain: Optional[Domain] = None
    exchanges_used: int = 0
    api_calls_this_exchange: int = 0
    # per-dialogue backend instances, so scripted cursors span the whole dialogue
    backends: dict = field(default_factory=dict)

    def append(self, message_kwargs: dict) -> Message:
        message = Message(turn_index=self.transcript.next_turn_index, **message_kwargs)
        self.transcript = self.transcript.append(message)
        return message


@dataclass(frozen=True)
class ExchangeEvent:
    """What the system hands back to the user after one exchange."""

    kind: str  # "clarify" | "respond"
    text: str
    level: Optional[ClarificationLevel] = None
    domain: Optional[Domain] = None


def detect_loop(transcript: Transcript, window: int) -> bool:
    """True iff the last `window` (system message, user answer) pairs are identical."""
    if window < 2:
        raise ValueError("loop window must be at least 2")
    pairs: list[tuple[str, str]] = []
    last_system: Optional[str] = None
    for m in transcript.messages:
        if m.speaker in (Speaker.SUPERVISOR, Speaker.EXPERT) and m.action is not None:
            if isinstance(m.action, Clarify):
                last_system = m.action.question
            elif isinstance(m.action, Respond):
                last_system = m.action.utterance
        elif m.speaker is Speaker.USER and last_system is not None:
            pairs.append((_normalize(last_system), _normalize(m.content)))
            last_system = None
    if len(pairs) < window:
        return False
    tail = pairs[-window:]
    return all(p == tail[0] for p in tail)


def _normalize(text: str) -> str:
    return " ".join(text.split()).lower()


def classify_clarification(
    level: ClarificationLevel, question: str, domain: Optional[Domain] = None
) -> ClarificationCategory:
    """Heuristic taxonomy label for a clarify question. Metadata only, never control flow."""
    q = question.lower()
    if level is ClarificationLevel.SUPERVISOR:
        if re.search(r"\b(can'?t help|cannot help|don'?t support|outside|unable to)\b", q):
            kind = ClarificationKind.UNFAMILIAR_DOMAIN
        elif re.search(r"\bdid you mean\b|\btypo\b|\bmeant\b", q):
            kind = ClarificationKind.GENERAL_NOISE_CORRECTION
        elif re.search(r"\bchanged your mind\b|\binstead\b|\bconflict\b|\bcontradict", q):
            kind = ClarificationKind.GENERAL_CONFLICT
        elif re.search(r'\b(it|that place|that one|which one)\b.*\?|referring to', q):
            kind = ClarificationKind.CONTEXTUAL_DISAMBIGUATION
        elif re.search(r"\b(eat|stay|restaurant or|hotel or|place to)\b", q):
            kind = ClarificationKind.DOMAIN_AMBIGUITY
        elif re.search(r"\b(book|find|look(ing)? for|schedule|information)\b.*\bor\b", q):
            kind = ClarificationKind.INTENT_AMBIGUITY
        else:
            kind = ClarificationKind.VAGUE_GOAL
        return ClarificationCategory(level, kind)

    if re.search(r"\bconfirm\b|\bis that (right|correct)\b|\bshould i assume\b", q):
        kind = ClarificationKind.INFERRED_CONFIRMATION
    elif re.search(r"\b(conflict|contradict|but you (also )?said|cheap but expensive)\b", q):
        kind = ClarificationKind.CONSTRAINT_CONFLICT
    elif re.search(r"\b(couldn'?t find|could not find|no .* (found|match)|which (of|one))\b", q):
        kind = ClarificationKind.ENTITY_DISAMBIGUATION
    elif re.search(r"\bwhat do you mean\b|\bmore specific\b|\bby ['\"]?(nice|good|soon|cheap)\b", q):
        kind = ClarificationKind.VALUE_AMBIGUITY
    elif domain is not None and _mentions_slot(q, domain):
        kind = ClarificationKind.PARAMETER_UNDERSPECIFICATION
    else:
        kind = ClarificationKind.PARAMETER_UNDERSPECIFICATION
    return ClarificationCategory(level, kind)


_SLOT_SYNONYMS = {
    "people": ("how many", "people", "party", "guests", "of you"),
    "time": ("what time", "time"),
    "day": ("which day", "what day", "day"),
    "stay": ("how many nights", "nights", "stay"),
    "area": ("area", "part of town", "where"),
    "pricerange": ("price", "budget"),
    "food": ("cuisine", "food"),
    "leaveAt": ("leave", "depart"),
    "arriveBy": ("arrive",),
    "departure": ("from where", "departure", "leaving from"),
    "destination": ("destination", "going to", "where to"),
}


def _mentions_slot(question: str, domain: Domain) -> bool:
    vocab = slot_vocabulary(domain)
    for slot in vocab:
        for cue in _SLOT_SYNONYMS.get(slot, (slot.lower(),)):
            if cue in question:
                return True
    return False


class Orchestrator:
    """Runs dialogues for one RunConfig against a world database and backend registry."""

    def __init__(
        self,
        config: RunConfig,
        registry: BackendRegistry,
        db: WorldDatabase,
        prompt_dir: Optional[str] = None,
    ):
        self.config = config
        self.registry = registry
        self.db = db
        self._templates = {
            name: _load_asset(f"{name}.txt", prompt_dir)
            for name in ("supervisor_plain", "supervisor_clarify", "expert_plain", "expert_clarify")
        }
        for role, name in config.backends.items():
            if role in ("supervisor", "expert", "simulator", "judge") or role.startswith("expert:"):
                if not registry.has(name):
                    raise KeyError(f"role {role!r} bound to unregistered backend {name!r}")
        config.backend_for("supervisor")
        for domain in Domain:
            config.backend_for(f"expert:{domain.value}")

    # --- prompt assembly ---

    def assemble_prompt(self, role: PromptRole, state: OrchestratorState) -> ChatRequest:
        if role.clarify and not clarification_allowed(self.config.mode, role.level):
            raise ValueError(f"clarify prompt for {role.level.value} not allowed in mode {self.config.mode.value}")
        last_user = state.transcript.last_message(Speaker.USER)
        user_query = last_user.content if last_user else ""

        if role.level is ClarificationLevel.SUPERVISOR:
            name = "supervisor_clarify" if role.clarify else "supervisor_plain"
            bindings = {"user_query": user_query}
            if role.clarify:
                bindings["clarification_taxonomy"] = taxonomy_prompt_text(ClarificationLevel.SUPERVISOR, self.config)
                bindings["conversation_history"] = render_history(state.transcript)
            rendered = render_template(self._templates[name], bindings)
            return ChatRequest(system_prompt="", turns=(("user", rendered),), tag="supervisor")

        domain = role.domain
        assert domain is not None
        name = "expert_clarify" if role.clarify else "expert_plain"
        api_names = ", ".join(api_display_name(n) for n in API_TABLE if API_TABLE[n][0] is domain)
        bindings = {
            "domain": domain.value,
            "api_names": api_names,
            "api_descriptions": api_descriptions_text(domain),
            "example_conversation": example_conversation_text(domain),
        }
        if role.clarify:
            bindings["clarification_taxonomy"] = taxonomy_prompt_text(ClarificationLevel.EXPERT, self.config)
        system_prompt = render_template(self._templates[name], bindings)
        return ChatRequest(
            system_prompt=system_prompt,
            turns=self._expert_turns(state.transcript),
            tag=f"expert:{domain.value}",
        )

    def _expert_turns(self, transcript: Transcript) -> tuple[tuple[str, str], ...]:
        turns: list[tuple[str, str]] = []
        for m in transcript.messages:
            if m.speaker is Speaker.USER:
                turns.append(("user", m.content))
            elif m.speaker is Speaker.ENVIRONMENT:
                turns.append(("user", m.content))
            elif m.action is not None and not isinstance(m.action, RouteDomain):
                turns.append(("assistant", render_action(m.action)))
        merged: list[tuple[str, str]] = []
        for role, content in turns:
            if merged and merged[-1][0] == role:
                merged[-1] = (role, merged[-1][1] + "\n\n" + content)
            else:
                merged.append((role, content))
        return tuple(merged)

    # --- backend interaction with the single-retry repair policy ---

    def _complete_parsed(
        self,
        backend,
        request: ChatRequest,
        parse: Callable[[str], Parsed | Malformed],
    ) -> AgentAction:
        raw = backend.complete(request)
        outcome = parse(raw)
        if isinstance(outcome, Parsed):
            return outcome.action
        log.debug("malformed agent output (%s); re-prompting once", outcome.reason)
        retry_request = request.with_turns(("assistant", raw), ("user", FORMAT_REMINDER))
        raw2 = backend.complete(retry_request)
        outcome2 = parse(raw2)
        if isinstance(outcome2, Parsed):
            return outcome2.action
        raise ProtocolViolation(outcome2.reason, raw2)

    # --- the per-exchange control flow ---

    def new_state(self, goal: Optional[UserGoal] = None, seed: Optional[int] = None) -> OrchestratorState:
        ledger_seed = self.config.seed if seed is None else seed
        return OrchestratorState(transcript=Transcript(goal=goal), ledger=BookingLedger(ledger_seed))

    def run_exchange(self, state: OrchestratorState, user_utterance: str) -> ExchangeEvent:
        """One user message in, one user-visible system event out."""
        if state.exchanges_used >= self.config.max_exchanges:
            raise BudgetExceeded(f"exchange budget of {self.config.max_exchanges} already used")
        state.append({"speaker": Speaker.USER, "content": user_utterance})
        state.exchanges_used += 1
        state.api_calls_this_exchange = 0

        supervisor = self._backend(state, "supervisor")
        supervisor_clarify = clarification_allowed(self.config.mode, ClarificationLevel.SUPERVISOR)
        request = self.assemble_prompt(
            PromptRole(ClarificationLevel.SUPERVISOR, supervisor_clarify), state
        )
        action = self._complete_parsed(
            supervisor, request, lambda raw: parse_supervisor_output(raw, self.config.mode)
        )

        if isinstance(action, Clarify):
            category = classify_clarification(ClarificationLevel.SUPERVISOR, action.question)
            state.append(
                {
                    "speaker": Speaker.SUPERVISOR,
                    "content": action.question,
                    "action": action,
                    "clarification": category,
                }
            )
            return ExchangeEvent("clarify", action.question, level=ClarificationLevel.SUPERVISOR)

        assert isinstance(action, RouteDomain)
        state.append({"speaker": Speaker.SUPERVISOR, "content": "", "action": action})
        state.active_domain = action.domain
        return self._run_expert(state, action.domain)

    def _backend(self, state: OrchestratorState, role: str):
        if role not in state.backends:
            state.backends[role] = self.registry.make(self.config.backend_for(role))
        return state.backends[role]

    def _run_expert(self, state: OrchestratorState, domain: Domain) -> ExchangeEvent:
        backend = self._backend(state, f"expert:{domain.value}")
        expert_clarify = clarification_allowed(self.config.mode, ClarificationLevel.EXPERT)
        role = PromptRole(ClarificationLevel.EXPERT, expert_clarify, domain)

        while True:
            request = self.assemble_prompt(role, state)
            action = self._complete_parsed(
                backend, request, lambda raw: parse_expert_output(raw, domain, self.config.mode)
            )

            if isinstance(action, Clarify):
                category = classify_clarification(ClarificationLevel.EXPERT, action.question, domain)
                state.append(
                    {
                        "speaker": Speaker.EXPERT,
                        "content": action.question,
                        "action": action,
                        "clarification": category,
                        "domain": domain,
                    }
                )
                return ExchangeEvent("clarify", action.question, level=ClarificationLevel.EXPERT, domain=domain)

            if isinstance(action, Respond):
                state.append(
                    {"speaker": Speaker.EXPERT, "content": action.utterance, "action": action, "domain": domain}
                )
                return ExchangeEvent("respond", action.utterance, domain=domain)

            assert isinstance(action, ApiCall)
            if state.api_calls_this_exchange >= self.config.max_api_calls_per_turn:
                raise BudgetExceeded(
                    f"API call budget of {self.config.max_api_calls_per_turn} per exchange exceeded"
                )
            state.api_calls_this_exchange += 1
            state.append(
                {"speaker": Speaker.EXPERT, "content": render_action(action), "action": action, "domain": domain}
            )
            result_text = self._execute_api(state, action)
            state.append({"speaker": Speaker.ENVIRONMENT, "content": result_text, "domain": domain})

    def _execute_api(self, state: OrchestratorState, call: ApiCall) -> str:
        schema = api_schema(call.name)
        try:
            if schema.kind == "query":
                return render_api_result(query_venues(self.db, schema, call.input))
            booking = execute_booking(self.db, schema, call.input, state.ledger)
            return render_api_result(booking)
        except WorldError as exc:
            # surfaced to the expert as a result line so it can recover or clarify
            return f"API Result: error: {exc}"

    # --- whole dialogues ---

    def run_dialogue(self, user_source, goal: Optional[UserGoal] = None, seed: Optional[int] = None) -> Transcript:
        """Loop exchanges against a user source until it finishes or a guard trips.

        The user source is any object with next_reply(transcript) returning an
        utterance/done pair.
        """
        state = self.new_state(goal=goal, seed=seed)
        status: Termination
        try:
            while True:
                reply = user_source.next_reply(state.transcript)
                if reply.done:
                    status = Termination.COMPLETED
                    break
                if state.exchanges_used >= self.config.max_exchanges:
                    status = Termination.TURN_BUDGET_EXCEEDED
                    break
                self.run_exchange(state, reply.utterance)
                if detect_loop(state.transcript, self.config.loop_window):
                    status = Termination.LOOP_DETECTED
                    break
        except (BackendError, BudgetExceeded) as exc:
            log.warning("dialogue aborted: %s", exc)
            status = Termination.BACKEND_ERROR
        state.transcript = state.transcript.finish(status)
        return state.transcript
