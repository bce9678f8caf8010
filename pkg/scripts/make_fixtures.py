#!/usr/bin/env python3
"""Regenerate the bundled fixtures: world database, goal files, protocol corpus.

Deterministic by construction; rerunning produces identical files.
"""

from __future__ import annotations

import json
import os

ROOT = os.path.join(os.path.dirname(__file__), "..", "fixtures")

AREAS = ["north", "south", "east", "west", "centre"]

RESTAURANTS = [
    ("the copper kettle", "centre", "british", "moderate"),
    ("golden dragon", "north", "chinese", "cheap"),
    ("casa bella", "south", "italian", "expensive"),
    ("spice garden", "east", "indian", "moderate"),
    ("le petit jardin", "west", "french", "expensive"),
    ("river thai", "centre", "thai", "moderate"),
    ("old mill grill", "north", "british", "expensive"),
    ("mama rosa", "east", "italian", "cheap"),
    ("the curry house", "centre", "indian", "cheap"),
    ("jade palace", "south", "chinese", "moderate"),
    ("ocean catch", "west", "seafood", "expensive"),
    ("green olive", "centre", "mediterranean", "moderate"),
    ("tandoori nights", "north", "indian", "expensive"),
    ("pasta corner", "west", "italian", "moderate"),
    ("noodle bar 21", "centre", "chinese", "cheap"),
    ("harvest table", "south", "british", "moderate"),
    ("el toro", "east", "spanish", "expensive"),
    ("sakura house", "centre", "japanese", "expensive"),
    ("the happy fork", "north", "european", "cheap"),
    ("bangkok express", "east", "thai", "cheap"),
]

HOTELS = [
    ("acorn guest house", "north", "yes", "yes", "moderate", "4", "guesthouse"),
    ("alpha lodge", "east", "no", "yes", "cheap", "2", "guesthouse"),
    ("the grand arbor", "centre", "yes", "no", "expensive", "5", "hotel"),
    ("city stop hotel", "centre", "yes", "yes", "moderate", "3", "hotel"),
    ("rosewood inn", "south", "no", "no", "cheap", "2", "guesthouse"),
    ("harbor view hotel", "west", "yes", "yes", "expensive", "4", "hotel"),
    ("the ivy house", "north", "yes", "no", "moderate", "3", "guesthouse"),
    ("kings crossing hotel", "centre", "yes", "yes", "expensive", "5", "hotel"),
    ("meadow lodge", "west", "no", "yes", "cheap", "1", "guesthouse"),
    ("station gate hotel", "east", "yes", "yes", "moderate", "3", "hotel"),
    ("bluebell bed and breakfast", "south", "yes", "no", "cheap", "3", "guesthouse"),
    ("the old rectory", "north", "no", "yes", "expensive", "4", "hotel"),
    ("parkside suites", "centre", "yes", "yes", "expensive", "4", "hotel"),
    ("willow cottage", "west", "no", "no", "cheap", "2", "guesthouse"),
    ("summit plaza", "centre", "yes", "yes", "expensive", "5", "hotel"),
    ("lakeside retreat", "south", "yes", "yes", "moderate", "3", "hotel"),
    ("garden gate guest house", "east", "yes", "no", "cheap", "2", "guesthouse"),
    ("the brass lantern", "north", "yes", "yes", "moderate", "4", "hotel"),
    ("crown and anchor inn", "south", "no", "yes", "moderate", "3", "guesthouse"),
    ("white swan hotel", "west", "yes", "no", "expensive", "4", "hotel"),
]

ATTRACTIONS = [
    ("castle mound", "north", "architecture", "free"),
    ("riverside museum", "centre", "museum", "5 pounds"),
    ("the butterfly house", "east", "park", "4 pounds"),
    ("old town theatre", "centre", "theatre", "12 pounds"),
    ("science discovery centre", "west", "museum", "8 pounds"),
    ("king street gallery", "centre", "museum", "free"),
    ("meadow park", "south", "park", "free"),
    ("clocktower college", "centre", "college", "2 pounds"),
    ("the glass arcade", "east", "shopping", "free"),
    ("harborside aquarium", "west", "entertainment", "10 pounds"),
    ("nightjar club", "centre", "nightclub", "6 pounds"),
    ("stone bridge", "north", "architecture", "free"),
    ("botanic conservatory", "south", "park", "7 pounds"),
    ("maritime hall", "west", "museum", "5 pounds"),
    ("corn market cinema", "centre", "cinema", "9 pounds"),
    ("abbey ruins", "north", "architecture", "3 pounds"),
    ("funfair pier", "east", "entertainment", "free"),
    ("velvet jazz lounge", "centre", "nightclub", "8 pounds"),
    ("summer swimming lido", "south", "swimmingpool", "4 pounds"),
    ("granite hill lookout", "west", "park", "free"),
]

TRAIN_STOPS = ["cambridge", "london kings cross", "ely", "peterborough", "norwich", "stansted airport"]
TRAIN_DAYS = ["monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday"]


def make_trains() -> list[dict]:
    trains = []
    routes = [
        ("cambridge", "london kings cross", 51, "23.60 pounds"),
        ("london kings cross", "cambridge", 51, "23.60 pounds"),
        ("cambridge", "ely", 17, "4.40 pounds"),
        ("ely", "cambridge", 17, "4.40 pounds"),
        ("cambridge", "peterborough", 50, "16.50 pounds"),
        ("peterborough", "cambridge", 50, "16.50 pounds"),
        ("cambridge", "norwich", 79, "17.60 pounds"),
        ("cambridge", "stansted airport", 28, "10.10 pounds"),
    ]
    tid = 1000
    for day in ["monday", "tuesday", "friday"]:
        for departure, destination, minutes, price in routes:
            for hour in (7, 9, 13):
                leave = f"{hour:02d}:00"
                arrive_minutes = hour * 60 + minutes
                arrive = f"{arrive_minutes // 60:02d}:{arrive_minutes % 60:02d}"
                trains.append(
                    {
                        "trainID": f"TR{tid:04d}",
                        "departure": departure,
                        "destination": destination,
                        "day": day,
                        "leaveAt": leave,
                        "arriveBy": arrive,
                        "price": price,
                        "duration": f"{minutes} minutes",
                    }
                )
                tid += 1
    return trains


TAXI_CARS = [
    "black tesla", "white audi", "red skoda", "blue ford", "grey bmw",
    "yellow volkswagen", "green toyota", "black honda",
]


def street(i: int) -> str:
    names = ["mill road", "king street", "station road", "bridge street", "market square",
             "church lane", "castle hill", "garden walk", "river lane", "abbey road"]
    return f"{3 + 2 * i} {names[i % len(names)]}"


def phone(prefix: int, i: int) -> str:
    return f"01223{prefix}{i:02d}"


def postcode(i: int) -> str:
    return f"cb{1 + i % 5}{chr(ord('a') + i % 4)}{chr(ord('q') + i % 3)}"


def build_db() -> dict[str, list[dict]]:
    restaurants = [
        {
            "name": name, "area": area, "food": food, "pricerange": price,
            "address": street(i), "phone": phone(30, i), "postcode": postcode(i),
        }
        for i, (name, area, food, price) in enumerate(RESTAURANTS)
    ]
    hotels = [
        {
            "name": name, "area": area, "internet": internet, "parking": parking,
            "pricerange": price, "stars": stars, "type": kind,
            "address": street(i), "phone": phone(40, i), "postcode": postcode(i + 3),
        }
        for i, (name, area, internet, parking, price, stars, kind) in enumerate(HOTELS)
    ]
    attractions = [
        {
            "name": name, "area": area, "type": kind, "entrancefee": fee,
            "address": street(i), "phone": phone(50, i), "postcode": postcode(i + 7),
        }
        for i, (name, area, kind, fee) in enumerate(ATTRACTIONS)
    ]
    taxis = [{"car": car, "phone": phone(60, i)} for i, car in enumerate(TAXI_CARS)]
    return {
        "restaurant": restaurants,
        "hotel": hotels,
        "attraction": attractions,
        "train": make_trains(),
        "taxi": taxis,
    }


def build_goals() -> list[dict]:
    return [
        {"goal_id": "g01-hotel-basic",
         "hotel": {"info": {"area": "north", "parking": "yes"}, "reqt": ["phone"],
                   "book": {"name": "acorn guest house", "people": "2", "day": "tuesday", "stay": "3"}}},
        {"goal_id": "g02-restaurant-cheap",
         "restaurant": {"info": {"area": "north", "food": "chinese", "pricerange": "cheap"}, "reqt": ["address"],
                        "book": {"name": "golden dragon", "people": "4", "day": "friday", "time": "18:30"}}},
        {"goal_id": "g03-train-monday",
         "train": {"info": {"departure": "cambridge", "destination": "ely", "day": "monday"}, "reqt": ["price"],
                   "book": {"trainID": "TR1006", "people": "1"}}},
        {"goal_id": "g04-attraction-museum",
         "attraction": {"info": {"area": "centre", "type": "museum"}, "reqt": ["entrancefee", "address"]}},
        {"goal_id": "g05-taxi-ride",
         "taxi": {"info": {}, "reqt": [],
                  "book": {"departure": "acorn guest house", "destination": "riverside museum", "leaveAt": "09:30"}}},
        {"goal_id": "g06-hotel-dontcare",
         "hotel": {"info": {"area": "centre", "internet": "dontcare"}, "reqt": ["address"],
                   "book": {"name": "city stop hotel", "people": "1", "day": "monday", "stay": "2"}}},
        {"goal_id": "g07-restaurant-italian",
         "restaurant": {"info": {"area": "south", "food": "italian"}, "reqt": ["phone", "postcode"],
                        "book": {"name": "casa bella", "people": "2", "day": "saturday", "time": "19:00"}}},
        {"goal_id": "g08-train-london",
         "train": {"info": {"departure": "cambridge", "destination": "london kings cross", "day": "friday"},
                   "reqt": ["duration"], "book": {"trainID": "TR1048", "people": "3"}}},
        {"goal_id": "g09-hotel-central",
         "hotel": {"info": {"area": "centre", "internet": "yes"}, "reqt": ["phone", "pricerange"],
                   "book": {"name": "the grand arbor", "people": "2", "day": "wednesday", "stay": "1"}}},
        {"goal_id": "g10-attraction-park",
         "attraction": {"info": {"area": "south", "type": "park"}, "reqt": ["address"]}},
        {"goal_id": "g11-restaurant-indian",
         "restaurant": {"info": {"food": "indian", "pricerange": "cheap"}, "reqt": ["address", "phone"],
                        "book": {"name": "the curry house", "people": "6", "day": "sunday", "time": "20:00"}}},
        {"goal_id": "g12-train-ely-return",
         "train": {"info": {"departure": "ely", "destination": "cambridge", "day": "tuesday"}, "reqt": ["price"],
                   "book": {"trainID": "TR1033", "people": "2"}}},
        {"goal_id": "g13-hotel-and-restaurant",
         "hotel": {"info": {"area": "east", "parking": "yes"}, "reqt": ["phone"],
                   "book": {"name": "station gate hotel", "people": "2", "day": "thursday", "stay": "2"}},
         "restaurant": {"info": {"area": "east", "food": "thai"}, "reqt": ["address"],
                        "book": {"name": "bangkok express", "people": "2", "day": "thursday", "time": "19:30"}}},
        {"goal_id": "g14-attraction-and-taxi",
         "attraction": {"info": {"area": "west", "type": "museum"}, "reqt": ["entrancefee"]},
         "taxi": {"info": {}, "reqt": [],
                  "book": {"departure": "maritime hall", "destination": "science discovery centre", "leaveAt": "14:00"}}},
        {"goal_id": "g15-restaurant-dontcare-price",
         "restaurant": {"info": {"area": "centre", "food": "thai", "pricerange": "dontcare"}, "reqt": ["phone"],
                        "book": {"name": "river thai", "people": "3", "day": "monday", "time": "18:00"}}},
        {"goal_id": "g16-hotel-east-parking",
         "hotel": {"info": {"area": "east", "parking": "yes"}, "reqt": ["address", "pricerange"],
                   "book": {"name": "alpha lodge", "people": "4", "day": "friday", "stay": "4"}}},
        {"goal_id": "g17-train-stansted",
         "train": {"info": {"departure": "cambridge", "destination": "stansted airport", "day": "friday"},
                   "reqt": ["arriveBy"], "book": {"trainID": "TR1069", "people": "1"}}},
        {"goal_id": "g18-attraction-nightclub",
         "attraction": {"info": {"area": "centre", "type": "nightclub"}, "reqt": ["entrancefee", "phone"]}},
        {"goal_id": "g19-restaurant-and-train",
         "restaurant": {"info": {"area": "centre", "food": "japanese"}, "reqt": ["phone"],
                        "book": {"name": "sakura house", "people": "2", "day": "monday", "time": "19:00"}},
         "train": {"info": {"departure": "cambridge", "destination": "norwich", "day": "monday"}, "reqt": ["price"],
                   "book": {"trainID": "TR1018", "people": "2"}}},
        {"goal_id": "g20-hotel-west-pool",
         "hotel": {"info": {"area": "west", "internet": "yes", "parking": "no"}, "reqt": ["postcode"],
                   "book": {"name": "white swan hotel", "people": "2", "day": "saturday", "stay": "2"}}},
    ]


def build_corpus() -> list[dict]:
    cases: list[dict] = []

    def sup(raw: str, mode: str, expect: dict, note: str = "") -> None:
        cases.append({"parser": "supervisor", "mode": mode, "raw": raw, "expect": expect, "note": note})

    def exp(raw: str, domain: str, mode: str, expect: dict, note: str = "") -> None:
        cases.append({"parser": "expert", "domain": domain, "mode": mode, "raw": raw, "expect": expect, "note": note})

    # --- supervisor: plain routing, every domain ---
    for d in ["restaurant", "hotel", "attraction", "train", "taxi"]:
        sup(f"<domain>{d}</domain>", "no_clarify", {"result": "route", "domain": d})
    # route alias
    sup("<route>taxi</route>", "no_clarify", {"result": "route", "domain": "taxi"}, "route alias accepted")
    sup("<route>hotel</route>", "both", {"result": "route", "domain": "hotel"})
    # whitespace / case tolerance on tags
    sup("  <DOMAIN> train </DOMAIN>  ", "no_clarify", {"result": "route", "domain": "train"}, "tag case-insensitive")
    sup("<Domain>hotel</Domain>", "supervisor_only", {"result": "route", "domain": "hotel"})
    sup("The best fit is:\n<domain>attraction</domain>\nThanks.", "no_clarify",
        {"result": "route", "domain": "attraction"}, "surrounding prose tolerated")
    # thought + route
    sup("Thought: clearly about places to stay.\n<domain>hotel</domain>", "both",
        {"result": "route", "domain": "hotel", "thought": "clearly about places to stay."})
    # clarify, allowed
    sup("Thought: group size unknown.\nResponse: <clarify>How many people will be dining?</clarify>", "both",
        {"result": "clarify", "question": "How many people will be dining?", "thought": "group size unknown."})
    sup("<clarify>Do you want a place to eat or to stay?</clarify>", "supervisor_only",
        {"result": "clarify", "question": "Do you want a place to eat or to stay?"}, "bare tag accepted")
    sup("Response: <CLARIFY>Which day did you mean?</CLARIFY>", "both",
        {"result": "clarify", "question": "Which day did you mean?"})
    # clarify forbidden by mode
    sup("Response: <clarify>How many of you?</clarify>", "no_clarify",
        {"result": "malformed", "reason": "clarify_forbidden"})
    sup("<clarify>Eat or stay?</clarify>", "expert_only", {"result": "malformed", "reason": "clarify_forbidden"})
    # malformed shapes
    sup("<domain>spa</domain>", "both", {"result": "malformed", "reason": "unknown_domain"})
    sup("<domain>hotels</domain>", "both", {"result": "malformed", "reason": "unknown_domain"})
    sup("I think the hotel expert should take this.", "both", {"result": "malformed", "reason": "no_tag"})
    sup("", "both", {"result": "malformed", "reason": "no_tag"})
    sup("<domain>hotel</domain><clarify>Which one?</clarify>", "both", {"result": "malformed", "reason": "both_tags"})
    sup("<domain>hotel</domain><domain>train</domain>", "both", {"result": "malformed", "reason": "multiple_tags"})
    sup("<clarify>a?</clarify><clarify>b?</clarify>", "both", {"result": "malformed", "reason": "multiple_tags"})
    sup("<clarify>   </clarify>", "both", {"result": "malformed", "reason": "empty_clarify"})
    sup("<domain>hotel</domain", "both", {"result": "malformed", "reason": "no_tag"}, "unclosed tag")
    sup("Thought: hmm.\nResponse: I will route this to hotel.", "both", {"result": "malformed", "reason": "no_tag"})

    # --- expert: API calls ---
    exp(
        'Thought: need matching hotels.\nAPI Name: query_hotel\nAPI Input: {"area": "north", "parking": "dontcare"}\nAPI Result:',
        "hotel", "both",
        {"result": "api_call", "name": "query_hotel",
         "input": {"area": "north", "parking": "dontcare"}, "thought": "need matching hotels."},
    )
    exp(
        'API Name: query_hotels\nAPI Input: {"area": "west"}\nAPI Result:',
        "hotel", "no_clarify",
        {"result": "api_call", "name": "query_hotel", "input": {"area": "west"}},
        "plural alias normalizes",
    )
    exp(
        'Thought: book it.\nAPI Name: book_hotel\nAPI Input: {"name": "acorn guest house", "people": "2", "day": "tuesday", "stay": "3"}\nAPI Result:',
        "hotel", "both",
        {"result": "api_call", "name": "book_hotel",
         "input": {"name": "acorn guest house", "people": "2", "day": "tuesday", "stay": "3"}},
    )
    exp(
        'API Name: query_restaurant\nAPI Input: {"food": "indian", "pricerange": "any"}\nAPI Result:',
        "restaurant", "no_clarify",
        {"result": "api_call", "name": "query_restaurant", "input": {"food": "indian", "pricerange": "any"}},
        "any placeholder",
    )
    exp(
        'API Name: book_restaurant\nAPI Input: {"name": "golden dragon", "people": "4", "day": "friday", "time": "18:30"}\nAPI Result:',
        "restaurant", "both",
        {"result": "api_call", "name": "book_restaurant",
         "input": {"name": "golden dragon", "people": "4", "day": "friday", "time": "18:30"}},
    )
    exp(
        'API Name: query_attraction\nAPI Input: {"area": "centre", "type": "museum"}\nAPI Result:',
        "attraction", "no_clarify",
        {"result": "api_call", "name": "query_attraction", "input": {"area": "centre", "type": "museum"}},
    )
    exp(
        'API Name: query_train\nAPI Input: {"departure": "cambridge", "destination": "ely", "day": "monday"}\nAPI Result:',
        "train", "no_clarify",
        {"result": "api_call", "name": "query_train",
         "input": {"departure": "cambridge", "destination": "ely", "day": "monday"}},
    )
    exp(
        'API Name: buy_train_ticket\nAPI Input: {"trainID": "TR1006", "people": "1"}\nAPI Result:',
        "train", "no_clarify",
        {"result": "api_call", "name": "buy_train_ticket", "input": {"trainID": "TR1006", "people": "1"}},
    )
    exp(
        'API Name: book_taxi\nAPI Input: {"departure": "a", "destination": "b", "leaveAt": "09:00"}\nAPI Result:',
        "taxi", "no_clarify",
        {"result": "api_call", "name": "book_taxi",
         "input": {"departure": "a", "destination": "b", "leaveAt": "09:00"}},
    )
    # numeric JSON values are coerced to strings
    exp(
        'API Name: book_hotel\nAPI Input: {"name": "alpha lodge", "people": 4, "day": "friday", "stay": 2}\nAPI Result:',
        "hotel", "both",
        {"result": "api_call", "name": "book_hotel",
         "input": {"name": "alpha lodge", "people": "4", "day": "friday", "stay": "2"}},
        "numbers coerced",
    )
    # bracketed input as echoed from the format example
    exp(
        'API Name: [query_hotel]\nAPI Input: [{"area": "north"}]\nAPI Result:',
        "hotel", "no_clarify",
        {"result": "api_call", "name": "query_hotel", "input": {"area": "north"}},
        "brackets stripped",
    )
    # repairable JSON: trailing comma, unquoted keys, single quotes
    exp(
        'API Name: query_hotel\nAPI Input: {"area": "north",}\nAPI Result:',
        "hotel", "no_clarify",
        {"result": "api_call", "name": "query_hotel", "input": {"area": "north"}},
        "trailing comma repaired",
    )
    exp(
        'API Name: query_hotel\nAPI Input: {area: "north", parking: "yes"}\nAPI Result:',
        "hotel", "no_clarify",
        {"result": "api_call", "name": "query_hotel", "input": {"area": "north", "parking": "yes"}},
        "bare keys repaired",
    )
    exp(
        "API Name: query_restaurant\nAPI Input: {'food': 'thai'}\nAPI Result:",
        "restaurant", "no_clarify",
        {"result": "api_call", "name": "query_restaurant", "input": {"food": "thai"}},
        "single quotes repaired",
    )
    # text after API Result: is discarded
    exp(
        'API Name: query_hotel\nAPI Input: {"area": "south"}\nAPI Result: (imagined) 3 hotels found',
        "hotel", "no_clarify",
        {"result": "api_call", "name": "query_hotel", "input": {"area": "south"}},
        "model-written result text discarded",
    )
    # API errors
    exp('API Name: query_restaurant\nAPI Input: {"food": "thai"}\nAPI Result:', "hotel", "both",
        {"result": "malformed", "reason": "foreign_api"})
    exp('API Name: book_flight\nAPI Input: {"to": "paris"}\nAPI Result:', "train", "both",
        {"result": "malformed", "reason": "unknown_api"})
    exp("API Name: query_hotel\nAPI Result:", "hotel", "both", {"result": "malformed", "reason": "missing_api_input"})
    exp('API Name: query_hotel\nAPI Input: not json at all\nAPI Result:', "hotel", "both",
        {"result": "malformed", "reason": "bad_api_input"})
    exp('API Name: query_hotel\nAPI Input: ["north"]\nAPI Result:', "hotel", "both",
        {"result": "malformed", "reason": "bad_api_input"}, "array input rejected")
    exp('API Name: query_hotel\nAPI Input: {"area": ["north", "south"]}\nAPI Result:', "hotel", "both",
        {"result": "malformed", "reason": "bad_api_input"}, "one value per slot")

    # --- expert: responses ---
    exp("Thought: done.\nResponse: Your booking is confirmed.", "hotel", "no_clarify",
        {"result": "respond", "utterance": "Your booking is confirmed.", "thought": "done."})
    exp("Response: The phone number is 01223400101.", "restaurant", "both",
        {"result": "respond", "utterance": "The phone number is 01223400101."})
    exp("Response: I can only assist with hotel queries and bookings.", "hotel", "no_clarify",
        {"result": "respond", "utterance": "I can only assist with hotel queries and bookings."},
        "out-of-scope refusal is a plain response")
    exp("Response: It leaves at 09:00.\nExtra trailing note.", "train", "no_clarify",
        {"result": "respond", "utterance": "It leaves at 09:00.\nExtra trailing note."},
        "response runs to end of output")
    exp("Thought: nothing to add.\nResponse:    ", "hotel", "both", {"result": "malformed", "reason": "empty_response"})
    exp("Thought: I should search first.", "hotel", "both", {"result": "malformed", "reason": "no_action"})
    exp("", "taxi", "both", {"result": "malformed", "reason": "no_action"})

    # --- expert: clarifications ---
    exp(
        "Thought: The user request is unclear due to missing cuisine.\nResponse: <clarify>What kind of food would you like?</clarify>",
        "restaurant", "both",
        {"result": "clarify", "question": "What kind of food would you like?",
         "thought": "The user request is unclear due to missing cuisine."},
    )
    exp("Response: <clarify>Which area should the hotel be in?</clarify>", "hotel", "expert_only",
        {"result": "clarify", "question": "Which area should the hotel be in?"})
    exp("Response: <Clarify>How many nights will you stay?</Clarify>", "hotel", "both",
        {"result": "clarify", "question": "How many nights will you stay?"}, "tag case-insensitive")
    exp("Response: <clarify>What time should the taxi arrive?</clarify>", "taxi", "no_clarify",
        {"result": "malformed", "reason": "clarify_forbidden"})
    exp("Response: <clarify>Which train did you mean?</clarify>", "train", "supervisor_only",
        {"result": "malformed", "reason": "clarify_forbidden"})
    exp("Response: <clarify></clarify>", "hotel", "both", {"result": "malformed", "reason": "empty_clarify"})
    exp("Response: <clarify>a?</clarify> <clarify>b?</clarify>", "hotel", "both",
        {"result": "malformed", "reason": "multiple_tags"})

    # supervisor-style multi-line thought then clarify
    sup(
        "Thought: The request mixes two\npossible services.\nResponse: <clarify>Are you looking for a restaurant or a hotel?</clarify>",
        "both",
        {"result": "clarify", "question": "Are you looking for a restaurant or a hotel?",
         "thought": "The request mixes two\npossible services."},
        "multi-line thought",
    )
    # content preserved byte-exact inside tags
    sup("<clarify>Did you mean  двойной  espresso?</clarify>", "both",
        {"result": "clarify", "question": "Did you mean  двойной  espresso?"}, "unicode + inner spacing kept")
    exp("Response: <clarify>Price range: cheap, moderate, or expensive?</clarify>", "restaurant", "both",
        {"result": "clarify", "question": "Price range: cheap, moderate, or expensive?"},
        "colon inside question is not a label")
    return cases


def main() -> None:
    db_dir = os.path.join(ROOT, "db")
    goal_dir = os.path.join(ROOT, "goals")
    corpus_dir = os.path.join(ROOT, "corpus")
    for d in (db_dir, goal_dir, corpus_dir):
        os.makedirs(d, exist_ok=True)

    db = build_db()
    manifest = {}
    for domain, rows in db.items():
        path = os.path.join(db_dir, f"{domain}_db.json")
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(rows, fh, indent=1, ensure_ascii=False)
            fh.write("\n")
        manifest[domain] = len(rows)
    with open(os.path.join(db_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")

    for goal in build_goals():
        path = os.path.join(goal_dir, f"{goal['goal_id']}.json")
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(goal, fh, indent=1, ensure_ascii=False)
            fh.write("\n")

    for i, case in enumerate(build_corpus()):
        path = os.path.join(corpus_dir, f"case_{i:03d}.json")
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(case, fh, indent=1, ensure_ascii=False)
            fh.write("\n")

    print(f"db: {manifest}")
    print(f"goals: {len(build_goals())}, corpus: {len(build_corpus())}")


if __name__ == "__main__":
    main()
