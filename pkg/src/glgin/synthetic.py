"""Template-generated multi-intent corpus in the MixATIS file layout.

Used for smoke runs, tests and latency measurements when the real corpora
are not available.  Utterances join one to three ATIS-style clauses with a
conjunction; the intent line lists each clause's intent once, in order.
"""

from __future__ import annotations

import random
from pathlib import Path

from .corpus import LabeledExample, dump_dataset

CITIES = [
    "boston", "denver", "atlanta", "dallas", "pittsburgh", "baltimore", "philadelphia", "oakland",
    "san francisco", "new york", "salt lake city", "los angeles", "washington", "milwaukee",
    "st. louis", "kansas city", "charlotte", "newark", "seattle", "houston", "las vegas", "miami",
]
AIRLINES = ["american airlines", "delta", "united", "us air", "continental", "northwest", "twa", "eastern"]
DAYS = ["monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday"]
MONTHS = ["january", "february", "march", "april", "may", "june", "july", "august", "september"]
DAY_NUMBERS = ["first", "second", "third", "fifth", "ninth", "twelfth", "twentieth", "twenty first"]
TIMES = ["6 am", "8 am", "noon", "3 pm", "5 pm", "7 pm", "10 pm", "1130"]
PERIODS = ["morning", "afternoon", "evening", "night"]
CLASSES = ["first class", "coach", "business class", "economy"]
AIRCRAFT = ["boeing 767", "dc10", "737", "m80", "boeing 747"]
FARE_CODES = ["qx", "y", "h", "f", "qo", "bh"]
MEALS = ["breakfast", "lunch", "dinner", "snack"]
AIRPORTS = ["logan airport", "love field", "general mitchell international", "jfk", "stapleton airport"]
FLIGHT_NUMBERS = ["100", "297", "417", "1039", "21", "813"]

FILLERS = {
    "fromloc.city_name": CITIES,
    "toloc.city_name": CITIES,
    "city_name": CITIES,
    "airline_name": AIRLINES,
    "depart_date.day_name": DAYS,
    "depart_date.month_name": MONTHS,
    "depart_date.day_number": DAY_NUMBERS,
    "depart_time.time": TIMES,
    "depart_time.period_of_day": PERIODS,
    "arrive_time.time": TIMES,
    "class_type": CLASSES,
    "aircraft_code": AIRCRAFT,
    "fare_basis_code": FARE_CODES,
    "meal_description": MEALS,
    "airport_name": AIRPORTS,
    "fromloc.airport_name": AIRPORTS,
    "flight_number": FLIGHT_NUMBERS,
}

# {slot} placeholders are expanded from FILLERS and tagged B-/I-slot
TEMPLATES = {
    "atis_flight": [
        "show me flights from {fromloc.city_name} to {toloc.city_name}",
        "i want to fly from {fromloc.city_name} to {toloc.city_name} on {depart_date.day_name}",
        "list {airline_name} flights from {fromloc.city_name} to {toloc.city_name} in the {depart_time.period_of_day}",
        "what flights leave {fromloc.city_name} after {depart_time.time} going to {toloc.city_name}",
        "find a flight to {toloc.city_name} from {fromloc.city_name} on {depart_date.month_name} {depart_date.day_number}",
        "are there any flights from {fromloc.airport_name} to {toloc.city_name} arriving before {arrive_time.time}",
    ],
    "atis_airfare": [
        "what is the fare from {fromloc.city_name} to {toloc.city_name}",
        "how much does a {class_type} ticket to {toloc.city_name} cost",
        "show me the cheapest fare from {fromloc.city_name} to {toloc.city_name} on {airline_name}",
        "give me {class_type} fares from {fromloc.city_name} to {toloc.city_name}",
    ],
    "atis_airline": [
        "which airlines fly from {fromloc.city_name} to {toloc.city_name}",
        "what airline is flight {flight_number}",
        "list the airlines that serve {city_name}",
    ],
    "atis_ground_service": [
        "what ground transportation is available in {city_name}",
        "show me ground transportation from {airport_name} to downtown",
        "is there a limousine service in {city_name}",
    ],
    "atis_abbreviation": [
        "what does fare code {fare_basis_code} mean",
        "what is {aircraft_code}",
        "explain the restriction {fare_basis_code}",
    ],
    "atis_aircraft": [
        "what type of aircraft is used on flight {flight_number}",
        "what kind of plane does {airline_name} use from {fromloc.city_name} to {toloc.city_name}",
    ],
    "atis_meal": [
        "is {meal_description} served on flight {flight_number}",
        "what meals are served on {airline_name} flights to {toloc.city_name}",
    ],
    "atis_quantity": [
        "how many flights does {airline_name} have to {toloc.city_name}",
        "how many {class_type} seats are on a {aircraft_code}",
    ],
    "atis_city": [
        "what city is {airport_name} in",
        "which cities does {airline_name} serve",
    ],
    "atis_distance": [
        "how far is {airport_name} from downtown {city_name}",
        "what is the distance from {fromloc.city_name} to {toloc.city_name}",
    ],
}

CONJUNCTIONS = ["and", "and also", "and then", "also"]


def _clause(intent: str, rng: random.Random) -> tuple[list[str], list[str]]:
    template = rng.choice(TEMPLATES[intent])
    tokens: list[str] = []
    slots: list[str] = []
    for piece in template.split(" "):
        if piece.startswith("{") and piece.endswith("}"):
            slot = piece[1:-1]
            words = rng.choice(FILLERS[slot]).split(" ")
            tokens.extend(words)
            slots.extend([f"B-{slot}"] + [f"I-{slot}"] * (len(words) - 1))
        else:
            tokens.append(piece)
            slots.append("O")
    return tokens, slots


def generate_example(rng: random.Random, max_intents: int = 3) -> LabeledExample:
    # MixATIS mixes mostly 1-3 intents per utterance
    k = rng.choices(range(1, max_intents + 1), weights=[3, 5, 2][:max_intents])[0]
    intents = rng.sample(sorted(TEMPLATES), k)
    tokens: list[str] = []
    slots: list[str] = []
    for i, intent in enumerate(intents):
        if i:
            conj = rng.choice(CONJUNCTIONS).split(" ")
            tokens.extend(conj)
            slots.extend(["O"] * len(conj))
        t, s = _clause(intent, rng)
        tokens.extend(t)
        slots.extend(s)
    return LabeledExample(tuple(tokens), tuple(slots), tuple(intents))


def generate_corpus(n: int, seed: int = 0, max_intents: int = 3) -> list[LabeledExample]:
    rng = random.Random(seed)
    return [generate_example(rng, max_intents) for _ in range(n)]


def write_splits(out_dir, train: int = 200, dev: int = 100, test: int = 828, seed: int = 0) -> dict[str, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {}
    for offset, (name, size) in enumerate((("train", train), ("dev", dev), ("test", test))):
        path = out_dir / f"{name}.txt"
        dump_dataset(generate_corpus(size, seed=seed * 1000 + offset), path)
        paths[name] = path
    return paths
