"""Shared fixtures and deterministic generators for the test suite."""

from __future__ import annotations

import json
import os
import random
import string

import pytest

from clariflow.core import API_TABLE, Domain, Mode, SlotValue
from clariflow.protocol import AgentAction, ApiCall, Clarify, Respond, RouteDomain
from clariflow.worldenv import WorldDatabase, load_database

FIXTURES = os.path.join(os.path.dirname(__file__), "..", "fixtures")
DB_DIR = os.path.join(FIXTURES, "db")
GOALS_DIR = os.path.join(FIXTURES, "goals")
CORPUS_DIR = os.path.join(FIXTURES, "corpus")


@pytest.fixture(scope="session")
def world_db() -> WorldDatabase:
    return load_database(DB_DIR)


@pytest.fixture(scope="session")
def db_manifest() -> dict:
    with open(os.path.join(DB_DIR, "manifest.json"), encoding="utf-8") as fh:
        return json.load(fh)


# --- deterministic random-action generation (shared by unit and acceptance tests) ---

_SAFE_CHARS = string.ascii_letters + string.digits + " ,.?!'-:()"
_RESERVED_RAW = {"dontcare", "any"}


def _safe_text(rng: random.Random, min_len: int = 1, max_len: int = 40) -> str:
    while True:
        n = rng.randint(min_len, max_len)
        text = "".join(rng.choice(_SAFE_CHARS) for _ in range(n)).strip()
        if text and text.lower() not in _RESERVED_RAW:
            return text


def _maybe_thought(rng: random.Random) -> str | None:
    return _safe_text(rng) if rng.random() < 0.5 else None


def random_slot_value(rng: random.Random) -> SlotValue:
    roll = rng.random()
    if roll < 0.15:
        return SlotValue.dontcare()
    if roll < 0.3:
        return SlotValue.any()
    return SlotValue.value(_safe_text(rng, 1, 20))


def random_action(rng: random.Random) -> AgentAction:
    """A valid action whose rendered form must parse back equal."""
    kind = rng.choice(["clarify", "route", "respond", "api_call"])
    if kind == "clarify":
        return Clarify(_safe_text(rng), thought=_maybe_thought(rng))
    if kind == "route":
        return RouteDomain(rng.choice(list(Domain)), thought=_maybe_thought(rng))
    if kind == "respond":
        return Respond(_safe_text(rng), thought=_maybe_thought(rng))
    name = rng.choice(list(API_TABLE))
    args = API_TABLE[name][1]
    chosen = rng.sample(args, rng.randint(0, len(args)))
    return ApiCall(name, {slot: random_slot_value(rng) for slot in chosen}, thought=_maybe_thought(rng))


def roundtrip_parse(action: AgentAction, mode: Mode = Mode.BOTH):
    """Parse a rendered action with the parser that accepts that action kind."""
    from clariflow.protocol import parse_expert_output, parse_supervisor_output, render_action

    rendered = render_action(action)
    if isinstance(action, RouteDomain):
        return parse_supervisor_output(rendered, mode)
    if isinstance(action, Clarify):
        # legal in both grammars; exercise each deterministically by question length
        if len(action.question) % 2 == 0:
            return parse_supervisor_output(rendered, mode)
        return parse_expert_output(rendered, Domain.HOTEL, mode)
    domain = action.domain if isinstance(action, ApiCall) else Domain.HOTEL
    return parse_expert_output(rendered, domain, mode)
