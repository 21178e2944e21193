"""Build the miniature raw corpus fixture plus golden files.

Run from the repo root after any intentional change to the dialogue scripts:

    python tests/fixtures/build_fixtures.py

The corpus mirrors the raw 2.1-style layout (data.json, valListFile.txt,
testListFile.txt, per-domain *_db.json). Every dialogue is scripted to be
self-consistent: cumulative belief states, act annotations whose values
appear verbatim in the system responses, and goals satisfied by the final
belief state, so gold sessions score Inform/Success = 100 by construction.
Counts and recommended venues are computed with the real query engine, never
hand-entered.
"""

from __future__ import annotations

import json
from pathlib import Path

from fctod.core import BeliefState
from fctod.db import DatabaseSet, query
from fctod.registry import default_registry

FIXTURES = Path(__file__).parent
RAW_DIR = FIXTURES / "raw_corpus"
GOLDEN_DIR = FIXTURES / "golden"

RESTAURANTS = [
    {"name": "golden wok", "area": "centre", "pricerange": "cheap", "food": "chinese",
     "phone": "01223812660", "address": "191 histon road", "postcode": "cb43hl"},
    {"name": "blue spice", "area": "centre", "pricerange": "expensive", "food": "indian",
     "phone": "01223327908", "address": "451 newmarket road", "postcode": "cb58jj"},
    {"name": "river terrace", "area": "centre", "pricerange": "moderate", "food": "british",
     "phone": "01223321586", "address": "12 mill lane", "postcode": "cb21rq"},
    {"name": "casa verde", "area": "north", "pricerange": "cheap", "food": "italian",
     "phone": "01223902114", "address": "33 milton road", "postcode": "cb41uy"},
    {"name": "red lantern", "area": "north", "pricerange": "expensive", "food": "chinese",
     "phone": "01223566188", "address": "529 king street", "postcode": "cb11ln"},
    {"name": "spice garden", "area": "south", "pricerange": "moderate", "food": "indian",
     "phone": "01223244149", "address": "86 hills road", "postcode": "cb21la"},
    {"name": "little seoul", "area": "south", "pricerange": "expensive", "food": "korean",
     "phone": "01223308681", "address": "108 regent street", "postcode": "cb21dp"},
    {"name": "olive press", "area": "east", "pricerange": "cheap", "food": "italian",
     "phone": "01223323737", "address": "64 cherry hinton road", "postcode": "cb17ag"},
    {"name": "royal bengal", "area": "east", "pricerange": "moderate", "food": "indian",
     "phone": "01223400170", "address": "7 barnwell road", "postcode": "cb58rg"},
    {"name": "maple bistro", "area": "west", "pricerange": "moderate", "food": "french",
     "phone": "01223259988", "address": "21 madingley road", "postcode": "cb30af"},
    {"name": "white pearl", "area": "west", "pricerange": "expensive", "food": "seafood",
     "phone": "01223353110", "address": "5 bridge street", "postcode": "cb21uw"},
    {"name": "thai orchid", "area": "centre", "pricerange": "cheap", "food": "thai",
     "phone": "01223356666", "address": "30 regent terrace", "postcode": "cb21ee"},
]

HOTELS = [
    {"name": "alpha lodge", "area": "north", "pricerange": "cheap", "type": "guesthouse",
     "parking": "yes", "internet": "yes", "stars": "3", "phone": "01223210353",
     "address": "517 chesterton road", "postcode": "cb41da"},
    {"name": "grand arms", "area": "centre", "pricerange": "expensive", "type": "hotel",
     "parking": "yes", "internet": "yes", "stars": "4", "phone": "01223351241",
     "address": "15 regent street", "postcode": "cb21ab"},
    {"name": "city stop rest", "area": "centre", "pricerange": "moderate", "type": "hotel",
     "parking": "no", "internet": "yes", "stars": "3", "phone": "01223453399",
     "address": "47 sleeperz lane", "postcode": "cb12tz"},
    {"name": "willow house", "area": "south", "pricerange": "cheap", "type": "guesthouse",
     "parking": "yes", "internet": "no", "stars": "2", "phone": "01223311212",
     "address": "101 cherry hinton road", "postcode": "cb17aa"},
    {"name": "harbour view", "area": "east", "pricerange": "moderate", "type": "guesthouse",
     "parking": "no", "internet": "yes", "stars": "4", "phone": "01223602030",
     "address": "78 newmarket road", "postcode": "cb58bx"},
    {"name": "kingfisher inn", "area": "west", "pricerange": "expensive", "type": "hotel",
     "parking": "yes", "internet": "yes", "stars": "5", "phone": "01223277977",
     "address": "2 grange road", "postcode": "cb39an"},
    {"name": "sunrise guest", "area": "north", "pricerange": "moderate", "type": "guesthouse",
     "parking": "yes", "internet": "yes", "stars": "4", "phone": "01223525725",
     "address": "152 histon road", "postcode": "cb43je"},
    {"name": "parkside manor", "area": "centre", "pricerange": "expensive", "type": "hotel",
     "parking": "no", "internet": "yes", "stars": "5", "phone": "01223366611",
     "address": "9 parkside place", "postcode": "cb11jh"},
]

ATTRACTIONS = [
    {"name": "byard art", "area": "centre", "type": "museum",
     "phone": "01223464646", "address": "14 kings parade", "postcode": "cb21sj"},
    {"name": "castle mound", "area": "west", "type": "park",
     "phone": "01223334900", "address": "castle street", "postcode": "cb30aq"},
    {"name": "corn exchange", "area": "centre", "type": "theatre",
     "phone": "01223357851", "address": "wheeler street", "postcode": "cb23qb"},
    {"name": "funky fun house", "area": "east", "type": "entertainment",
     "phone": "01223304705", "address": "8 mercers row", "postcode": "cb58hy"},
    {"name": "lynne strover gallery", "area": "west", "type": "museum",
     "phone": "01223295264", "address": "23 high street", "postcode": "cb30nb"},
    {"name": "milton country park", "area": "north", "type": "park",
     "phone": "01223420060", "address": "milton lane", "postcode": "cb46az"},
    {"name": "river cruisers", "area": "centre", "type": "boat",
     "phone": "01223902091", "address": "251a chesterton road", "postcode": "cb41as"},
    {"name": "whale of a time", "area": "south", "type": "entertainment",
     "phone": "01954781018", "address": "unit 8 viking way", "postcode": "cb238el"},
]

TRAINS = [
    {"id": "TR1234", "departure": "cambridge", "destination": "london kings cross",
     "day": "monday", "leave_at": "07:00", "arrive_by": "07:51", "price": "23.60 pounds", "duration": "51 minutes"},
    {"id": "TR2045", "departure": "cambridge", "destination": "london kings cross",
     "day": "monday", "leave_at": "09:00", "arrive_by": "09:51", "price": "23.60 pounds", "duration": "51 minutes"},
    {"id": "TR3330", "departure": "cambridge", "destination": "london kings cross",
     "day": "monday", "leave_at": "11:00", "arrive_by": "11:51", "price": "23.60 pounds", "duration": "51 minutes"},
    {"id": "TR4096", "departure": "cambridge", "destination": "stansted airport",
     "day": "friday", "leave_at": "08:40", "arrive_by": "09:08", "price": "10.10 pounds", "duration": "28 minutes"},
    {"id": "TR5511", "departure": "cambridge", "destination": "stansted airport",
     "day": "friday", "leave_at": "10:40", "arrive_by": "11:08", "price": "10.10 pounds", "duration": "28 minutes"},
    {"id": "TR6029", "departure": "norwich", "destination": "cambridge",
     "day": "sunday", "leave_at": "12:16", "arrive_by": "13:35", "price": "14.14 pounds", "duration": "79 minutes"},
    {"id": "TR7802", "departure": "norwich", "destination": "cambridge",
     "day": "sunday", "leave_at": "14:16", "arrive_by": "15:35", "price": "14.14 pounds", "duration": "79 minutes"},
    {"id": "TR8833", "departure": "birmingham new street", "destination": "cambridge",
     "day": "wednesday", "leave_at": "09:40", "arrive_by": "12:23", "price": "60.08 pounds", "duration": "163 minutes"},
    {"id": "TR9177", "departure": "birmingham new street", "destination": "cambridge",
     "day": "wednesday", "leave_at": "11:40", "arrive_by": "14:23", "price": "60.08 pounds", "duration": "163 minutes"},
    {"id": "TR0611", "departure": "ely", "destination": "cambridge",
     "day": "saturday", "leave_at": "09:35", "arrive_by": "09:52", "price": "4.40 pounds", "duration": "17 minutes"},
]

HOSPITALS = [
    {"department": "cardiology", "phone": "01223256459"},
    {"department": "neurology", "phone": "01223274680"},
    {"department": "paediatrics", "phone": "01223217558"},
]

POLICE = [
    {"name": "parkside police station", "address": "parkside avenue", "phone": "01223358966"},
]

REGISTRY = default_registry()
DB = DatabaseSet(
    tables={
        "restaurant": RESTAURANTS,
        "hotel": HOTELS,
        "attraction": ATTRACTIONS,
        "train": TRAINS,
        "hospital": HOSPITALS,
        "police": POLICE,
    },
    registry=REGISTRY,
)


def count(domain: str, **constraints) -> int:
    return query(DB, BeliefState(domain, constraints)).count


def first(domain: str, **constraints) -> dict:
    result = query(DB, BeliefState(domain, constraints))
    if not result.matches:
        raise SystemExit(f"fixture bug: no {domain} entity for {constraints}")
    return result.matches[0]


class DialogueBuilder:
    """Accumulates user/system turns with cumulative belief metadata."""

    def __init__(self, goal: dict):
        self.goal = goal
        self.log: list[dict] = []
        self.belief: dict[str, dict[str, str]] = {}

    def turn(self, user: str, response: str, acts: dict, updates: dict | None = None) -> None:
        for domain, slots in (updates or {}).items():
            self.belief.setdefault(domain, {}).update(slots)
        metadata = {}
        for domain, slots in self.belief.items():
            semi = {k: v for k, v in slots.items() if not k.startswith("book_")}
            book = {k[len("book_"):]: v for k, v in slots.items() if k.startswith("book_")}
            metadata[domain] = {"semi": semi, "book": book}
        self.log.append({"text": user})
        self.log.append({"text": response, "metadata": metadata, "dialog_act": acts})

    def build(self) -> dict:
        return {"goal": self.goal, "log": self.log}


def restaurant_find(area: str, food: str, pricerange: str) -> dict:
    c1 = count("restaurant", area=area)
    venue = first("restaurant", area=area, food=food, pricerange=pricerange)
    builder = DialogueBuilder(
        {"restaurant": {"info": {"area": area, "food": food, "pricerange": pricerange},
                        "reqt": ["phone", "address"]}}
    )
    builder.turn(
        f"hello , i am looking for a restaurant in the {area} .",
        f"there are {c1} restaurants in the {area} . what type of food would you like ?",
        {"Restaurant-Inform": [["Choice", str(c1)]], "Restaurant-Request": [["Food", "?"]]},
        {"restaurant": {"area": area}},
    )
    builder.turn(
        f"i would like {food} food in the {pricerange} price range please .",
        f"i recommend {venue['name']} , a {pricerange} {food} restaurant in the {area} .",
        {"Restaurant-Recommend": [["Name", venue["name"]]]},
        {"restaurant": {"food": food, "pricerange": pricerange}},
    )
    builder.turn(
        "sounds good . what is the phone number and address ?",
        f"{venue['name']} is located at {venue['address']} and the phone number is {venue['phone']} .",
        {"Restaurant-Inform": [["Name", venue["name"]], ["Phone", venue["phone"]],
                               ["Addr", venue["address"]]]},
    )
    builder.turn(
        "that is all , thank you . goodbye .",
        "you are welcome . goodbye .",
        {"general-bye": [["none", "none"]]},
    )
    return builder.build()


def hotel_book(area: str, type_: str, stars: str, pricerange: str,
               day: str, people: str, stay: str, ref: str) -> dict:
    c1 = count("hotel", area=area, type=type_)
    venue = first("hotel", area=area, type=type_, stars=stars, pricerange=pricerange)
    builder = DialogueBuilder(
        {"hotel": {"info": {"area": area, "type": type_, "stars": stars,
                            "pricerange": pricerange},
                   "book": {"day": day, "people": people, "stay": stay}}}
    )
    builder.turn(
        f"i need a place to stay in the {area} , preferably a {type_} .",
        f"i found {c1} places matching that . how many stars would you like ?",
        {"Hotel-Inform": [["Choice", str(c1)]], "Hotel-Request": [["Stars", "?"]]},
        {"hotel": {"area": area, "type": type_}},
    )
    builder.turn(
        f"{stars} stars please , in the {pricerange} price range .",
        f"how about {venue['name']} ? it is a {stars} star {type_} in the {area} .",
        {"Hotel-Recommend": [["Name", venue["name"]], ["Stars", stars]]},
        {"hotel": {"stars": stars, "pricerange": pricerange}},
    )
    builder.turn(
        f"perfect , book it for {people} people , {stay} nights starting {day} .",
        f"booking successful for {venue['name']} . your reference number is {ref} .",
        {"Booking-Book": [["Name", venue["name"]], ["Ref", ref]]},
        {"hotel": {"book_day": day, "book_people": people, "book_stay": stay}},
    )
    builder.turn(
        "wonderful , thanks . bye !",
        "you are welcome . enjoy your stay !",
        {"general-bye": [["none", "none"]]},
    )
    return builder.build()


def train_find(departure: str, destination: str, day: str, leave_at: str) -> dict:
    c1 = count("train", departure=departure, destination=destination, day=day)
    venue = first("train", departure=departure, destination=destination, day=day,
                  leave_at=leave_at)
    builder = DialogueBuilder(
        {"train": {"info": {"departure": departure, "destination": destination,
                            "day": day, "leaveAt": leave_at},
                   "reqt": ["trainID", "price"]}}
    )
    builder.turn(
        f"i need a train from {departure} to {destination} on {day} .",
        f"there are {c1} trains from {departure} to {destination} on {day} . "
        "when would you like to leave ?",
        {"Train-Inform": [["Choice", str(c1)]], "Train-Request": [["Leave", "?"]]},
        {"train": {"departure": departure, "destination": destination, "day": day}},
    )
    builder.turn(
        f"i would like to leave at {leave_at} or later .",
        f"{venue['id']} departs at {venue['leave_at']} . shall i book it ?",
        {"Train-Inform": [["Id", venue["id"]], ["Leave", venue["leave_at"]]]},
        {"train": {"leaveAt": leave_at}},
    )
    builder.turn(
        "maybe later . how much is the ticket ?",
        f"the fare is {venue['price']} per ticket .",
        {"Train-Inform": [["Ticket", venue["price"]]]},
    )
    builder.turn(
        "thanks , that is everything . goodbye .",
        "glad to help . goodbye .",
        {"general-bye": [["none", "none"]]},
    )
    return builder.build()


def attraction_find(area: str, type_: str) -> dict:
    c1 = count("attraction", area=area, type=type_)
    venue = first("attraction", area=area, type=type_)
    builder = DialogueBuilder(
        {"attraction": {"info": {"area": area, "type": type_},
                        "reqt": ["postcode", "phone"]}}
    )
    builder.turn(
        f"what {type_} options are there in the {area} ?",
        f"there are {c1} to choose from . i suggest {venue['name']} .",
        {"Attraction-Inform": [["Choice", str(c1)]],
         "Attraction-Recommend": [["Name", venue["name"]]]},
        {"attraction": {"area": area, "type": type_}},
    )
    builder.turn(
        "can i get the postcode and phone number ?",
        f"sure , {venue['name']} is at postcode {venue['postcode']} and the phone is {venue['phone']} .",
        {"Attraction-Inform": [["Name", venue["name"]], ["Post", venue["postcode"]],
                               ["Phone", venue["phone"]]]},
    )
    builder.turn(
        "great , thank you . bye !",
        "have a lovely visit . goodbye !",
        {"general-bye": [["none", "none"]]},
    )
    return builder.build()


def restaurant_nooffer(area: str, missing_food: str, food: str) -> dict:
    assert count("restaurant", area=area, food=missing_food) == 0
    venue = first("restaurant", area=area, food=food)
    builder = DialogueBuilder(
        {"restaurant": {"info": {"area": area, "food": food}, "reqt": ["address"]}}
    )
    builder.turn(
        f"are there any {missing_food} restaurants in the {area} ?",
        f"i am sorry , there are no {missing_food} restaurants in the {area} .",
        {"Restaurant-NoOffer": [["Food", missing_food], ["Area", area]]},
        {"restaurant": {"area": area, "food": missing_food}},
    )
    builder.turn(
        f"too bad . how about {food} food instead ?",
        f"{venue['name']} serves {food} food in the {area} .",
        {"Restaurant-Recommend": [["Name", venue["name"]]]},
        {"restaurant": {"food": food}},
    )
    builder.turn(
        "what is the address ?",
        f"{venue['name']} is at {venue['address']} .",
        {"Restaurant-Inform": [["Name", venue["name"]], ["Addr", venue["address"]]]},
    )
    builder.turn(
        "thanks a lot , goodbye .",
        "goodbye , have a nice day .",
        {"general-bye": [["none", "none"]]},
    )
    return builder.build()


def restaurant_taxi(area: str, food: str, destination: str, leave: str) -> dict:
    venue = first("restaurant", area=area, food=food)
    taxi = first("taxi", departure=venue["name"], destination=destination, leave_at=leave)
    builder = DialogueBuilder(
        {"restaurant": {"info": {"area": area, "food": food}, "reqt": ["phone"]},
         "taxi": {"info": {"departure": venue["name"], "destination": destination,
                           "leaveAt": leave}, "reqt": []}}
    )
    builder.turn(
        f"can you find me a {food} restaurant in the {area} ?",
        f"{venue['name']} is a nice {food} place in the {area} .",
        {"Restaurant-Recommend": [["Name", venue["name"]]]},
        {"restaurant": {"area": area, "food": food}},
    )
    builder.turn(
        f"i also need a taxi from {venue['name']} to {destination} , leaving at {leave} .",
        f"done ! a {taxi['color']} {taxi['car']} will pick you up , contact number {taxi['phone']} .",
        {"Taxi-Inform": [["Car", taxi["car"]], ["Phone", taxi["phone"]]]},
        {"taxi": {"departure": venue["name"], "destination": destination, "leaveAt": leave}},
    )
    builder.turn(
        "and what is the restaurant's phone number ?",
        f"the number for {venue['name']} is {venue['phone']} .",
        {"Restaurant-Inform": [["Name", venue["name"]], ["Phone", venue["phone"]]]},
    )
    builder.turn(
        "brilliant , that is all . bye !",
        "you are welcome . goodbye !",
        {"general-bye": [["none", "none"]]},
    )
    return builder.build()


def greeting_only() -> dict:
    builder = DialogueBuilder({})
    builder.turn(
        "hi there !",
        "hello ! how can i help you today ?",
        {"general-greet": [["none", "none"]]},
    )
    builder.turn(
        "actually nothing , i am all set . bye !",
        "no problem . goodbye !",
        {"general-bye": [["none", "none"]]},
    )
    return builder.build()


def hospital_lookup(department: str) -> dict:
    venue = first("hospital", department=department)
    builder = DialogueBuilder(
        {"hospital": {"info": {"department": department}, "reqt": ["phone"]}}
    )
    builder.turn(
        f"i need the {department} department of the hospital please .",
        f"the {department} department can be reached at {venue['phone']} .",
        {"Hospital-Inform": [["Department", department], ["Phone", venue["phone"]]]},
        {"hospital": {"department": department}},
    )
    builder.turn(
        "thank you so much . goodbye .",
        "take care . goodbye .",
        {"general-bye": [["none", "none"]]},
    )
    return builder.build()


def build_corpus() -> dict:
    dialogues = {
        # train split (25)
        "SNG0101": restaurant_find("centre", "chinese", "cheap"),
        "SNG0102": restaurant_find("north", "italian", "cheap"),
        "SNG0103": restaurant_find("south", "indian", "moderate"),
        "SNG0104": restaurant_find("east", "italian", "cheap"),
        "SNG0105": restaurant_find("west", "french", "moderate"),
        "SNG0106": restaurant_find("centre", "indian", "expensive"),
        "SNG0107": restaurant_find("centre", "thai", "cheap"),
        "SNG0108": hotel_book("north", "guesthouse", "3", "cheap", "monday", "2", "3", "QPL3Z7KD"),
        "SNG0109": hotel_book("centre", "hotel", "4", "expensive", "friday", "4", "2", "XJ49PA0M"),
        "SNG0110": hotel_book("south", "guesthouse", "2", "cheap", "tuesday", "1", "5", "B62RWHNE"),
        "SNG0111": hotel_book("west", "hotel", "5", "expensive", "saturday", "3", "1", "TK8021VY"),
        "SNG0112": hotel_book("east", "guesthouse", "4", "moderate", "sunday", "2", "2", "GH55ODQS"),
        "SNG0113": train_find("cambridge", "london kings cross", "monday", "09:00"),
        "SNG0114": train_find("cambridge", "stansted airport", "friday", "08:40"),
        "SNG0115": train_find("norwich", "cambridge", "sunday", "14:16"),
        "SNG0116": train_find("birmingham new street", "cambridge", "wednesday", "11:40"),
        "SNG0117": attraction_find("centre", "museum"),
        "SNG0118": attraction_find("west", "park"),
        "SNG0119": attraction_find("east", "entertainment"),
        "SNG0120": restaurant_nooffer("centre", "afghan", "british"),
        "SNG0121": restaurant_nooffer("north", "seafood", "chinese"),
        "SNG0122": restaurant_taxi("centre", "chinese", "corn exchange", "18:30"),
        "SNG0123": restaurant_taxi("south", "korean", "parkside manor", "19:15"),
        "SNG0124": greeting_only(),
        "SNG0125": hospital_lookup("cardiology"),
        # dev split (5)
        "SNG0126": restaurant_find("centre", "british", "moderate"),
        "SNG0127": hotel_book("centre", "hotel", "3", "moderate", "thursday", "2", "4", "WD7761CK"),
        "SNG0128": train_find("ely", "cambridge", "saturday", "09:35"),
        "SNG0129": attraction_find("north", "park"),
        "SNG0130": hospital_lookup("neurology"),
        # test split (5)
        "SNG0131": restaurant_find("east", "indian", "moderate"),
        "SNG0132": hotel_book("north", "guesthouse", "4", "moderate", "wednesday", "5", "2", "ME20JJ4R"),
        "SNG0133": train_find("cambridge", "london kings cross", "monday", "11:00"),
        "SNG0134": restaurant_nooffer("west", "chinese", "seafood"),
        "SNG0135": restaurant_taxi("centre", "indian", "byard art", "17:45"),
    }
    return dialogues


def write_raw_corpus() -> None:
    RAW_DIR.mkdir(parents=True, exist_ok=True)
    dialogues = build_corpus()
    (RAW_DIR / "data.json").write_text(json.dumps(dialogues, indent=1) + "\n", encoding="utf-8")
    dev_ids = [f"SNG{n:04d}" for n in range(126, 131)]
    test_ids = [f"SNG{n:04d}" for n in range(131, 136)]
    (RAW_DIR / "valListFile.txt").write_text("\n".join(dev_ids) + "\n", encoding="utf-8")
    (RAW_DIR / "testListFile.txt").write_text("\n".join(test_ids) + "\n", encoding="utf-8")
    for domain, rows in DB.tables.items():
        (RAW_DIR / f"{domain}_db.json").write_text(json.dumps(rows, indent=1) + "\n", encoding="utf-8")
    print(f"wrote {len(dialogues)} dialogues to {RAW_DIR}")


def write_goldens() -> None:
    from fctod.db import load_databases
    from fctod.export import export_dialogue
    from fctod.ingest import convert, ingest
    from fctod.orchestrator import run_dialogue, Dependencies
    from fctod.backend import MockBackend
    from fctod.prompts import (
        TemplateSet,
        build_ds_prompt,
        build_dst_prompt,
        build_rg_prompt,
        load_action_catalog,
    )

    GOLDEN_DIR.mkdir(parents=True, exist_ok=True)
    registry = default_registry()
    db = load_databases(RAW_DIR, registry)
    splits = ingest(RAW_DIR)
    fixture = next(raw for raw in splits.train if raw.id == "SNG0101")
    dialogue = convert(fixture, registry, db)

    (GOLDEN_DIR / "six_role_SNG0101.json").write_text(
        json.dumps(dialogue.to_json_obj(), indent=1) + "\n", encoding="utf-8"
    )

    masked = export_dialogue(dialogue)[0]
    (GOLDEN_DIR / "export_SNG0101.json").write_text(
        json.dumps(
            {"id": dialogue.id,
             "messages": [{"role": m.role, "content": m.content, "loss": m.loss_weight}
                          for m in masked]},
            indent=1,
        ) + "\n",
        encoding="utf-8",
    )

    # prompts at turn 3 of the fixture dialogue, replayed from gold history
    templates = TemplateSet.bundled()
    catalog = load_action_catalog()
    backend = MockBackend.from_gold([dialogue])
    deps = Dependencies(registry=registry, db=db, templates=templates, backend=backend)
    session = run_dialogue(dialogue, deps)
    history = session.turns[:2]
    from fctod.core import DialogueSession

    partial = DialogueSession(dialogue_id=dialogue.id, turns=list(history))
    turn3 = dialogue.gold[2]
    payloads = {
        "ds_prompt.json": build_ds_prompt(templates, registry, partial, turn3.user),
        "dst_prompt.json": build_dst_prompt(
            templates, registry.resolve(turn3.domain), partial, turn3.user
        ),
        "rg_prompt.json": build_rg_prompt(
            templates, catalog, turn3.call, turn3.observation, partial, turn3.user
        ),
    }
    for filename, payload in payloads.items():
        (GOLDEN_DIR / filename).write_text(
            json.dumps([{"role": m.role, "content": m.content} for m in payload.messages],
                       indent=1) + "\n",
            encoding="utf-8",
        )
    print(f"wrote goldens to {GOLDEN_DIR}")


def write_trainer_fixture() -> None:
    """Ten restaurant/null-only dialogues exported with a two-function registry.

    The compact registry keeps the leading system record short enough for the
    trainer's CPU smoke run while exercising the exact export schema.
    """
    import json as json_mod

    from fctod.db import load_databases
    from fctod.export import export_split
    from fctod.ingest import CorpusSplit, convert, ingest
    from fctod.registry import parse_registry, render_spec

    registry = default_registry()
    mini_schema = json_mod.dumps(
        [
            json_mod.loads(render_spec(registry.resolve("restaurant"))),
            json_mod.loads(render_spec(registry.resolve("null"))),
        ]
    )
    mini_registry = parse_registry(mini_schema)
    db = load_databases(RAW_DIR, mini_registry)
    splits = ingest(RAW_DIR)
    wanted = [f"SNG{n:04d}" for n in (101, 102, 103, 104, 105, 106, 107, 120, 121, 124)]
    dialogues = [
        convert(raw, mini_registry, db) for raw in splits.train if raw.id in wanted
    ]
    out_dir = Path(__file__).parents[2] / "trainer" / "tests" / "fixtures"
    report = export_split(CorpusSplit(name="train", dialogues=dialogues), out_dir)
    print(f"wrote trainer fixture ({report.samples} samples) to {out_dir}")


if __name__ == "__main__":
    write_raw_corpus()
    write_goldens()
    write_trainer_fixture()
