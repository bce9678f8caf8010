"""Core type tests: taxonomy gating, mode truth table, goals, transcript serde."""

from __future__ import annotations

import random

import pytest

from clariflow.core import (
    EXPERT_KINDS,
    SUPERVISOR_KINDS,
    ClarificationCategory,
    ClarificationKind,
    ClarificationLevel,
    Domain,
    GoalEntry,
    Message,
    Mode,
    RunConfig,
    SlotValue,
    Speaker,
    Termination,
    Transcript,
    UserGoal,
    apis_for_domain,
    clarification_allowed,
    slot_vocabulary,
    transcript_from_jsonl,
    transcript_to_jsonl,
    validate_goal,
)
from clariflow.protocol import ApiCall, Clarify, Respond, RouteDomain

from conftest import random_action


def test_exactly_five_domains():
    assert {d.value for d in Domain} == {"restaurant", "hotel", "attraction", "train", "taxi"}
    with pytest.raises(ValueError):
        Domain("spa")


def test_every_domain_has_apis():
    for domain in Domain:
        assert apis_for_domain(domain), f"{domain} has no APIs"


def test_taxonomy_split():
    assert len(SUPERVISOR_KINDS) == 7
    assert len(EXPERT_KINDS) == 5
    assert not set(SUPERVISOR_KINDS) & set(EXPERT_KINDS)


def test_category_level_gating():
    ClarificationCategory(ClarificationLevel.SUPERVISOR, ClarificationKind.DOMAIN_AMBIGUITY)
    ClarificationCategory(ClarificationLevel.EXPERT, ClarificationKind.VALUE_AMBIGUITY)
    with pytest.raises(ValueError):
        ClarificationCategory(ClarificationLevel.SUPERVISOR, ClarificationKind.VALUE_AMBIGUITY)
    with pytest.raises(ValueError):
        ClarificationCategory(ClarificationLevel.EXPERT, ClarificationKind.DOMAIN_AMBIGUITY)


# the full 8-case truth table for who may interrupt the user
@pytest.mark.parametrize(
    "mode,supervisor_may,expert_may",
    [
        (Mode.NO_CLARIFY, False, False),
        (Mode.EXPERT_ONLY, False, True),
        (Mode.SUPERVISOR_ONLY, True, False),
        (Mode.BOTH, True, True),
    ],
)
def test_clarification_mode_truth_table(mode, supervisor_may, expert_may):
    assert clarification_allowed(mode, ClarificationLevel.SUPERVISOR) is supervisor_may
    assert clarification_allowed(mode, ClarificationLevel.EXPERT) is expert_may


def test_slot_value_forms():
    assert SlotValue.from_raw(" north ").text == "north"
    assert SlotValue.from_raw("dontcare").kind == "dontcare"
    assert SlotValue.from_raw("ANY").kind == "any"
    assert SlotValue.dontcare().raw() == "dontcare"
    assert SlotValue.any().raw() == "any"
    with pytest.raises(ValueError):
        SlotValue.value("   ")
    with pytest.raises(ValueError):
        SlotValue("dontcare", "text")


def _hotel_goal(slots: dict[str, str]) -> UserGoal:
    return UserGoal(
        "g",
        {Domain.HOTEL: GoalEntry(informable={s: SlotValue.value(v) for s, v in slots.items()})},
    )


def test_validate_goal_known_slots():
    assert validate_goal(_hotel_goal({"area": "north", "parking": "yes"})) == []


def test_validate_goal_unknown_slot():
    violations = validate_goal(_hotel_goal({"cuisine": "italian"}))
    assert [v.code for v in violations] == ["unknown_slot"]
    assert violations[0].domain is Domain.HOTEL and violations[0].slot == "cuisine"


def test_validate_goal_empty():
    violations = validate_goal(UserGoal("g", {}))
    assert [v.code for v in violations] == ["empty_goal"]


def test_restaurant_vocabulary_keeps_suspect_args():
    # stars/type are carried in the booking vocabulary even though they look leaked
    vocab = slot_vocabulary(Domain.RESTAURANT)
    assert {"stars", "type"} <= vocab


def test_message_invariants():
    with pytest.raises(ValueError):
        Message(Speaker.ENVIRONMENT, "not an api result", 0)
    Message(Speaker.ENVIRONMENT, "API Result: no matching records", 0)
    category = ClarificationCategory(ClarificationLevel.EXPERT, ClarificationKind.VALUE_AMBIGUITY)
    with pytest.raises(ValueError):
        Message(Speaker.EXPERT, "hi", 0, action=Respond("hi"), clarification=category)
    Message(Speaker.EXPERT, "q?", 0, action=Clarify("q?"), clarification=category)


def test_transcript_turn_indices_increase():
    m0 = Message(Speaker.USER, "a", 0)
    m1 = Message(Speaker.USER, "b", 1)
    Transcript(messages=(m0, m1))
    with pytest.raises(ValueError):
        Transcript(messages=(m1, m0))


def _sample_transcript() -> Transcript:
    goal = _hotel_goal({"area": "north"})
    t = Transcript(goal=goal)
    t = t.append(Message(Speaker.USER, "I need a hotel", 0))
    t = t.append(Message(Speaker.SUPERVISOR, "", 1, action=RouteDomain(Domain.HOTEL, thought="hotels")))
    t = t.append(
        Message(
            Speaker.EXPERT,
            "API block",
            2,
            action=ApiCall("query_hotel", {"area": SlotValue.value("north"), "parking": SlotValue.dontcare()}),
            domain=Domain.HOTEL,
        )
    )
    t = t.append(Message(Speaker.ENVIRONMENT, "API Result: no matching records", 3, domain=Domain.HOTEL))
    t = t.append(
        Message(
            Speaker.EXPERT,
            "Which area?",
            4,
            action=Clarify("Which area?"),
            clarification=ClarificationCategory(
                ClarificationLevel.EXPERT, ClarificationKind.PARAMETER_UNDERSPECIFICATION
            ),
            domain=Domain.HOTEL,
        )
    )
    return t.finish(Termination.COMPLETED)


def test_transcript_jsonl_roundtrip():
    transcript = _sample_transcript()
    text = transcript_to_jsonl(transcript, mode=Mode.BOTH, seed=7)
    restored, header = transcript_from_jsonl(text)
    assert restored == transcript
    assert header["mode"] == "both" and header["seed"] == 7 and header["goal_id"] == "g"
    # byte-stable serialization
    assert transcript_to_jsonl(restored, mode=Mode.BOTH, seed=7) == text


def test_transcript_roundtrip_random_actions():
    rng = random.Random(31)
    t = Transcript()
    turn = 0
    for _ in range(30):
        action = random_action(rng)
        if action.tag == "api_call":
            t = t.append(Message(Speaker.EXPERT, "block", turn, action=action, domain=action.domain))
        elif action.tag == "route":
            t = t.append(Message(Speaker.SUPERVISOR, "", turn, action=action))
        else:
            t = t.append(Message(Speaker.EXPERT, "text", turn, action=action, domain=Domain.TAXI))
        turn += 1
    restored, _ = transcript_from_jsonl(transcript_to_jsonl(t))
    assert restored == t


def test_goal_serde_roundtrip():
    goal = UserGoal(
        "g42",
        {
            Domain.TRAIN: GoalEntry(
                informable={"departure": SlotValue.value("cambridge"), "day": SlotValue.dontcare()},
                requestables=frozenset({"price", "duration"}),
                booking={"trainID": SlotValue.value("TR1006"), "people": SlotValue.value("2")},
            )
        },
    )
    assert UserGoal.from_dict(goal.to_dict()) == goal


def test_run_config_validation():
    config = RunConfig(mode=Mode.BOTH, backends={"supervisor": "s", "expert": "e"})
    assert config.max_exchanges == 20
    assert config.backend_for("expert:taxi") == "e"
    with pytest.raises(KeyError):
        config.backend_for("judge")
    with pytest.raises(ValueError):
        RunConfig(mode=Mode.BOTH, max_exchanges=0)
    with pytest.raises(ValueError):
        RunConfig(mode=Mode.BOTH, loop_window=1)
    assert RunConfig.from_dict(config.to_dict()) == config


def test_completed_transcript_ends_with_respond():
    # the completion invariant used across orchestrator tests
    transcript = _sample_transcript()
    last_system = transcript.user_visible_system_messages()[-1]
    assert last_system.action is not None  # sample ends in a clarify: the checker must notice
    assert isinstance(last_system.action, Clarify)
