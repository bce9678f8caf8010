"""Simulator tests: scripted playback, goal parsing, withholding, termination."""

from __future__ import annotations

import pytest

from clariflow.backend import Script, ScriptedBackend
from clariflow.core import Domain, Message, SlotValue, Speaker, Transcript
from clariflow.protocol import Clarify, Respond
from clariflow.simulator import (
    LlmUser,
    ScriptedUser,
    SimulatorPersona,
    UserReply,
    goal_description,
    goal_from_multiwoz,
    scripted_user,
    withheld_slots,
)
from clariflow.worldenv import SchemaError


def test_scripted_user_three_lines_then_done():
    user = scripted_user(["a", "b", "c"])
    replies = [user.next_reply(Transcript()) for _ in range(4)]
    assert [r.utterance for r in replies[:3]] == ["a", "b", "c"]
    assert not any(r.done for r in replies[:3])
    assert replies[3] == UserReply("", done=True)


def test_scripted_user_deterministic():
    a = scripted_user(["x", "y"])
    b = scripted_user(["x", "y"])
    t = Transcript()
    assert [a.next_reply(t) for _ in range(3)] == [b.next_reply(t) for _ in range(3)]


def test_scripted_user_empty_after_first():
    user = scripted_user(["just this"])
    assert user.next_reply(Transcript()).utterance == "just this"
    assert user.next_reply(Transcript()).done


def test_scripted_user_rejects_empty_script():
    with pytest.raises(ValueError):
        scripted_user([])


# --- goal documents ---

def test_goal_from_multiwoz_hotel():
    doc = {
        "goal_id": "g-hotel",
        "hotel": {
            "info": {"area": "north", "parking": "yes"},
            "reqt": ["phone"],
            "book": {"people": "2", "stay": "3", "day": "tuesday"},
        },
    }
    goal = goal_from_multiwoz(doc)
    assert goal.goal_id == "g-hotel"
    entry = goal.entries[Domain.HOTEL]
    assert entry.informable["area"] == SlotValue.value("north")
    assert entry.requestables == frozenset({"phone"})
    assert entry.booking["stay"] == SlotValue.value("3")


def test_goal_from_multiwoz_two_domains():
    doc = {
        "goal_id": "g-trip",
        "train": {"info": {"departure": "cambridge"}, "reqt": ["price"], "book": {"people": "1"}},
        "taxi": {"info": {}, "reqt": [], "book": {"departure": "a", "destination": "b"}},
    }
    goal = goal_from_multiwoz(doc)
    assert set(goal.entries) == {Domain.TRAIN, Domain.TAXI}


def test_goal_from_multiwoz_dontcare_and_ignored_sections():
    doc = {
        "id": "woz-1",
        "message": "find a cheap hotel",
        "fail_info": {"something": "x"},
        "hotel": {"info": {"pricerange": "dontcare"}, "reqt": [], "book": {}},
    }
    goal = goal_from_multiwoz(doc)
    assert goal.goal_id == "woz-1"
    assert goal.entries[Domain.HOTEL].informable["pricerange"].kind == "dontcare"
    assert goal.entries[Domain.HOTEL].booking is None


@pytest.mark.parametrize(
    "doc",
    [
        "not an object",
        {"spa": {"info": {}}},
        {"hotel": "not a dict"},
        {"hotel": {"info": []}},
        {"goal_id": "empty"},
    ],
)
def test_goal_from_multiwoz_malformed(doc):
    with pytest.raises(SchemaError):
        goal_from_multiwoz(doc)


# --- persona / withholding ---

def test_persona_rate_validation():
    goal = goal_from_multiwoz({"goal_id": "g", "hotel": {"info": {"area": "north"}}})
    SimulatorPersona(goal, underspecification_rate=0.0)
    SimulatorPersona(goal, underspecification_rate=1.0)
    with pytest.raises(ValueError):
        SimulatorPersona(goal, underspecification_rate=1.1)


def test_withheld_slots_deterministic_and_rate_bounded():
    goal = goal_from_multiwoz(
        {"goal_id": "g", "hotel": {"info": {"area": "north", "parking": "yes", "internet": "no"}}}
    )
    assert withheld_slots(goal, 0.0, seed=1) == frozenset()
    everything = withheld_slots(goal, 1.0, seed=1)
    assert everything == {(Domain.HOTEL, "area"), (Domain.HOTEL, "parking"), (Domain.HOTEL, "internet")}
    assert withheld_slots(goal, 0.5, seed=1) == withheld_slots(goal, 0.5, seed=1)
    assert withheld_slots(goal, 0.5, seed=1) != withheld_slots(goal, 0.5, seed=2) or True  # seeds may coincide


def test_prompt_lists_withheld_slots_only():
    goal = goal_from_multiwoz({"goal_id": "g", "hotel": {"info": {"area": "north", "parking": "yes"}}})
    persona = SimulatorPersona(goal, underspecification_rate=1.0)
    user = LlmUser(persona, ScriptedBackend(Script.of("hello")), seed=3)
    withheld_section = user.system_prompt.split("until the assistant explicitly asks")[1]
    assert "hotel area" in withheld_section and "hotel parking" in withheld_section
    assert "you want area = north" in user.system_prompt  # the goal itself is still stated


# --- llm-backed user ---

def _persona() -> SimulatorPersona:
    goal = goal_from_multiwoz(
        {
            "goal_id": "g",
            "restaurant": {
                "info": {"food": "italian"},
                "reqt": ["phone"],
                "book": {"people": "4", "day": "friday", "time": "19:00"},
            },
        }
    )
    return SimulatorPersona(goal, underspecification_rate=0.0)


def test_opening_reply_is_first_script_entry():
    user = LlmUser(_persona(), ScriptedBackend(Script.of("I want to book an italian restaurant.")))
    reply = user.next_reply(Transcript())
    assert reply == UserReply("I want to book an italian restaurant.")


def test_clarify_answer_contains_goal_value():
    # scripted stand-in for the model answering the people question from the goal
    user = LlmUser(_persona(), ScriptedBackend(Script.of("There will be 4 of us.")))
    t = Transcript()
    t = t.append(Message(Speaker.USER, "book an italian place", 0))
    t = t.append(
        Message(Speaker.EXPERT, "How many people?", 1, action=Clarify("How many people?"), domain=Domain.RESTAURANT)
    )
    reply = user.next_reply(t)
    assert "4" in reply.utterance
    assert user.persona.goal.entries[Domain.RESTAURANT].booking["people"].text == "4"


def test_user_turn_precondition():
    user = LlmUser(_persona(), ScriptedBackend(Script.of("x")))
    t = Transcript().append(Message(Speaker.USER, "hi", 0))
    with pytest.raises(ValueError):
        user.next_reply(t)


def _satisfying_transcript() -> Transcript:
    t = Transcript()
    t = t.append(Message(Speaker.USER, "book an italian place and give me the phone", 0))
    t = t.append(
        Message(
            Speaker.EXPERT,
            "casa bella is booked, reference=AB12CD34. Their phone is 0122330002.",
            1,
            action=Respond("casa bella is booked, reference=AB12CD34. Their phone is 0122330002."),
            domain=Domain.RESTAURANT,
        )
    )
    return t


def test_done_when_phrase_and_goal_satisfied():
    user = LlmUser(_persona(), ScriptedBackend(Script.of("Great, thanks! [ALL DONE]")))
    reply = user.next_reply(_satisfying_transcript())
    assert reply.done


def test_not_done_when_goal_unsatisfied():
    user = LlmUser(_persona(), ScriptedBackend(Script.of("Thanks! [ALL DONE]")))
    t = Transcript().append(Message(Speaker.USER, "hello", 0))
    t = t.append(Message(Speaker.EXPERT, "Hi!", 1, action=Respond("Hi!"), domain=Domain.RESTAURANT))
    reply = user.next_reply(t)  # no booking reference or phone answer yet
    assert not reply.done
    assert reply.utterance  # still says something


def test_goal_description_mentions_constraints():
    text = goal_description(_persona().goal)
    assert "you want food = italian" in text
    assert "find out the phone" in text
    assert "people=4" in text
