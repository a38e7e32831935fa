"""Deterministic toy-corpus generator for tests and examples.

Writes ``dialogs.jsonl``, ``eval_dialogs.jsonl``, and ``reviews.tsv`` next
to this file.  The world is deliberately small -- four task domains, each
with four named entities -- yet structured so that external knowledge is
genuinely informative for a likelihood-based scorer:

* Entities come in pairs that share exactly the same constraint wording
  (e.g. two "cheap indian restaurant in the centre" venues), so a user
  request alone never determines which entity a system turn should name.
  A knowledge block about one member of the pair resolves the ambiguity,
  which is what makes conditional likelihood gains measurable.
* Review sentences reuse the same framings the responder's acquisition
  prompts use ("{name} is famous for ...", "my friend says that ...") so
  that prompted continuations from a model trained on review-prefixed
  streams stay on-distribution.
* Each entity carries a few "colour" sentences with vocabulary that never
  appears in dialog turns; pulling those words into a reply is what moves
  surface-diversity metrics.

Everything is driven by one seeded RNG; reruns are byte-identical.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path

SEED = 2026
HERE = Path(__file__).resolve().parent

DIALOGS_PER_ENTITY = 15
REVIEW_ATTEMPTS_PER_ENTITY = 130


@dataclass(frozen=True)
class Entity:
    slug: str
    domain: str
    name: str                      # surface name, no article
    signature: dict[str, str]      # slot values shared with its twin
    details: dict[str, str]        # slot -> answer value (unique per entity)
    famous: str                    # noun phrase for "famous for" lines
    extras: tuple[str, ...]        # standalone colour sentences

    def slot(self, key: str) -> str:
        if key in self.signature:
            return self.signature[key]
        return self.details[key]


ENTITIES: tuple[Entity, ...] = (
    # --- restaurants: pairs share (price, food, area) -------------------
    Entity(
        slug="curry-garden", domain="restaurant", name="curry garden",
        signature={"price": "cheap", "food": "indian", "area": "centre"},
        details={"addr": "106 regent street", "dish": "spicy lamb curry"},
        famous="its spicy lamb curry",
        extras=("the naan bread is warm and fresh",
                "the waiters are friendly and patient",
                "the portions are generous and filling",
                "the spices sing in every bite",
                "the mango lassi is sweet and cool"),
    ),
    Entity(
        slug="spice-palace", domain="restaurant", name="spice palace",
        signature={"price": "cheap", "food": "indian", "area": "centre"},
        details={"addr": "12 mill lane", "dish": "creamy chicken korma"},
        famous="its creamy chicken korma",
        extras=("the samosas are crispy and golden",
                "the service is quick and polite",
                "the sauces are rich and fragrant",
                "the tandoor glows all evening",
                "the rice is light and fluffy"),
    ),
    Entity(
        slug="river-bistro", domain="restaurant", name="river bistro",
        signature={"price": "expensive", "food": "french", "area": "riverside"},
        details={"addr": "8 quayside walk", "dish": "buttery duck confit"},
        famous="its buttery duck confit",
        extras=("the terrace overlooks the water",
                "the wine list is long and varied",
                "the desserts are light and elegant",
                "the oysters arrive on crushed ice",
                "the candlelit tables feel special"),
    ),
    Entity(
        slug="maison-bleu", domain="restaurant", name="maison bleu",
        signature={"price": "expensive", "food": "french", "area": "riverside"},
        details={"addr": "44 bridge street", "dish": "silky onion soup"},
        famous="its silky onion soup",
        extras=("the candles give a romantic glow",
                "the cheese board is a delight",
                "the chef greets every guest",
                "the baguettes crackle when torn",
                "the mussels swim in garlic butter"),
    ),
    # --- hotels: pairs share (price, kind, area) ------------------------
    Entity(
        slug="acorn-guest-house", domain="hotel", name="acorn guest house",
        signature={"price": "cheap", "kind": "guesthouse", "area": "north"},
        details={"addr": "154 chesterton road",
                 "feature": "free parking and a quiet garden"},
        famous="its quiet garden",
        extras=("the beds are soft and spotless",
                "breakfast includes warm scones",
                "the owner is helpful and kind",
                "the garden smells of lavender",
                "the kettle and biscuits are a nice touch"),
    ),
    Entity(
        slug="alpha-lodge", domain="hotel", name="alpha lodge",
        signature={"price": "cheap", "kind": "guesthouse", "area": "north"},
        details={"addr": "3 arbury court",
                 "feature": "free wifi in every room"},
        famous="its fast free wifi",
        extras=("the rooms are bright and airy",
                "the shower is hot and strong",
                "the lounge has a cosy fireplace",
                "the radiators keep the chill away",
                "the parking spaces are wide and easy"),
    ),
    Entity(
        slug="royal-crown-hotel", domain="hotel", name="royal crown hotel",
        signature={"price": "expensive", "kind": "hotel", "area": "centre"},
        details={"addr": "21 downing street",
                 "feature": "a heated indoor pool"},
        famous="its heated indoor pool",
        extras=("the porters carry your bags with a smile",
                "the view from the top floor is stunning",
                "the bar mixes excellent cocktails",
                "the chandeliers sparkle at night",
                "the robes are thick and soft"),
    ),
    Entity(
        slug="university-arms", domain="hotel", name="university arms",
        signature={"price": "expensive", "kind": "hotel", "area": "centre"},
        details={"addr": "9 regent terrace",
                 "feature": "a grand marble lobby"},
        famous="its grand marble lobby",
        extras=("the suites are spacious and calm",
                "the gym is modern and never crowded",
                "afternoon tea is served daily",
                "the library corner invites reading",
                "the doormen remember your name"),
    ),
    # --- attractions: pairs share (fee, kind, area) ---------------------
    Entity(
        slug="fitzwilliam-museum", domain="attraction", name="fitzwilliam museum",
        signature={"fee": "free", "kind": "museum", "area": "centre"},
        details={"hours": "nine to five",
                 "highlight": "ancient egyptian pottery"},
        famous="its ancient egyptian pottery",
        extras=("the marble stairs are grand",
                "the painting rooms are peaceful",
                "the gift shop sells lovely prints",
                "the armour hall amazes children",
                "the ceiling frescoes glow at noon"),
    ),
    Entity(
        slug="folk-museum", domain="attraction", name="folk museum",
        signature={"fee": "free", "kind": "museum", "area": "centre"},
        details={"hours": "ten to four",
                 "highlight": "old farming tools"},
        famous="its old farming tools",
        extras=("the wooden cottages feel alive",
                "the guides tell funny stories",
                "the courtyard hosts craft fairs",
                "the old looms still clatter on demand",
                "the garden grows forgotten herbs"),
    ),
    Entity(
        slug="botanic-garden", domain="attraction", name="botanic garden",
        signature={"fee": "cheap", "kind": "park", "area": "south"},
        details={"hours": "eight to six",
                 "highlight": "rare alpine plants"},
        famous="its rare alpine plants",
        extras=("the glasshouses are humid and green",
                "the lake draws herons at dawn",
                "the scent of roses fills the paths",
                "the bamboo grove creaks in the wind",
                "the winter walk sparkles with frost"),
    ),
    Entity(
        slug="orchard-park", domain="attraction", name="orchard park",
        signature={"fee": "cheap", "kind": "park", "area": "south"},
        details={"hours": "seven to seven",
                 "highlight": "quiet shaded lawns"},
        famous="its quiet shaded lawns",
        extras=("the apple trees blossom in spring",
                "picnic tables sit by the stream",
                "children love the wooden maze",
                "the kite field hums on windy days",
                "the cafe sells crumbly flapjacks"),
    ),
    # --- trains: pairs share (dest, day) --------------------------------
    Entity(
        slug="city-flyer", domain="train", name="city flyer",
        signature={"dest": "london", "day": "monday"},
        details={"time": "seven forty five", "price": "ten pounds"},
        famous="its wide clean windows",
        extras=("the seats recline and have plugs",
                "coffee comes round on a trolley",
                "the windows are wide and clean",
                "the quiet coach really is quiet",
                "the doors open with a gentle chime"),
    ),
    Entity(
        slug="stansted-express", domain="train", name="stansted express",
        signature={"dest": "london", "day": "monday"},
        details={"time": "nine fifteen", "price": "eight pounds"},
        famous="its smooth fast ride",
        extras=("the carriages are rarely crowded",
                "the ride is smooth and fast",
                "luggage racks line every aisle",
                "the platform staff wave you aboard",
                "the tannoy jokes make people smile"),
    ),
    Entity(
        slug="midland-rover", domain="train", name="midland rover",
        signature={"dest": "norwich", "day": "friday"},
        details={"time": "six thirty", "price": "twelve pounds"},
        famous="its warm buffet car",
        extras=("the conductor whistles old tunes",
                "bikes travel free on board",
                "the buffet car sells warm pasties",
                "the window tables fit four friends",
                "the brakes hiss like old kettles"),
    ),
    Entity(
        slug="fenland-arrow", domain="train", name="fenland arrow",
        signature={"dest": "norwich", "day": "friday"},
        details={"time": "eleven twenty", "price": "nine pounds"},
        famous="its misty marsh views",
        extras=("the route crosses misty marshes",
                "wifi works the whole way",
                "seats by the door have extra room",
                "the sunrise over the fens is golden",
                "the carriage lamps glow amber"),
    ),
)


# ---------------------------------------------------------------------------
# dialog templates
# ---------------------------------------------------------------------------

CONSTRAINT_ASK = {
    "restaurant": (
        "i want a {price} {food} restaurant in the {area}",
        "i am looking for a {price} {food} restaurant in the {area}",
        "can you find a {price} {food} restaurant in the {area} please",
    ),
    "hotel": (
        "i need a {price} {kind} in the {area}",
        "i am looking for a {price} {kind} in the {area}",
        "can you find a {price} {kind} in the {area} please",
    ),
    "attraction": (
        "i want to visit a {fee} {kind} in the {area}",
        "i am looking for a {fee} {kind} in the {area}",
        "is there a {fee} {kind} in the {area}",
    ),
    "train": (
        "i need a train to {dest} on {day}",
        "i want to travel to {dest} on {day}",
        "are there trains to {dest} on {day}",
    ),
}

NAME_ASK = (
    "tell me about the {name}",
    "what do you know about the {name}",
    "can you tell me about the {name}",
)

ECHO = {
    "restaurant": (
        "the {name} is a {price} {food} restaurant in the {area}",
        "i recommend the {name} it is a {price} {food} restaurant in the {area}",
    ),
    "hotel": (
        "the {name} is a {price} {kind} in the {area}",
        "i recommend the {name} it is a {price} {kind} in the {area}",
    ),
    "attraction": (
        "the {name} is a {fee} {kind} in the {area}",
        "you could try the {name} it is a {fee} {kind} in the {area}",
    ),
    "train": (
        "the {name} goes to {dest} on {day}",
        "you can take the {name} to {dest} on {day}",
    ),
}

# detail slots per domain, in fixed ask order
DETAIL_SLOTS = {
    "restaurant": ("addr", "dish"),
    "hotel": ("addr", "feature"),
    "attraction": ("hours", "highlight"),
    "train": ("time", "price"),
}

DETAIL_Q = {
    "addr": ("what is the address", "where is it located",
             "can i have the address please"),
    "dish": ("what do they serve", "what is the food like"),
    "feature": ("what facilities does it have", "does it have any facilities"),
    "hours": ("when is it open", "what are the opening hours"),
    "highlight": ("what can i see there", "what is there to see"),
    "time": ("when does it leave", "what time does it leave"),
    "price": ("how much is it", "how much does a ticket cost"),
}

DETAIL_A = {
    "addr": ("the {name} is at {addr}",
             "the address of the {name} is {addr}"),
    "dish": ("they serve {dish}",
             "the {name} serves {dish}"),
    "feature": ("the {name} has {feature}",
                "the {name} offers {feature}"),
    "hours": ("the {name} is open from {hours}",
              "it is open from {hours}"),
    "highlight": ("you can see {highlight} at the {name}",
                  "the {name} has {highlight}"),
    "time": ("the {name} leaves at {time}",
             "the {name} departs at {time}"),
    "price": ("a ticket on the {name} costs {price}",
              "the {name} costs {price}"),
}

ADJ = {
    "restaurant": ("great value", "a lovely spot", "always busy",
                   "worth a visit"),
    "hotel": ("comfortable and calm", "great value", "easy to book",
              "worth a visit"),
    "attraction": ("a peaceful place", "worth an afternoon",
                   "lovely in spring", "worth a visit"),
    "train": ("usually on time", "clean and quick", "good value"),
}

FACT_CLAUSE = {
    "restaurant": ("it is at {addr}", "it serves {dish}"),
    "hotel": ("it is at {addr}", "it has {feature}"),
    "attraction": ("it is open from {hours}", "it has {highlight}"),
    "train": ("it leaves at {time}", "a ticket costs {price}"),
}

ECHO_TAIL = {
    "restaurant": "it is a {price} {food} restaurant in the {area}",
    "hotel": "it is a {price} {kind} in the {area}",
    "attraction": "it is a {fee} {kind} in the {area}",
    "train": "it goes to {dest} on {day}",
}


def _fmt(template: str, e: Entity) -> str:
    return template.format(name=e.name, **e.signature, **e.details)


def build_dialog(e: Entity, rng: random.Random) -> list[dict[str, str]]:
    turns: list[dict[str, str]] = []
    if rng.random() < 0.2:
        opener = rng.choice(NAME_ASK)
    else:
        opener = rng.choice(CONSTRAINT_ASK[e.domain])
    turns.append({"speaker": "user", "text": _fmt(opener, e)})
    turns.append({"speaker": "system", "text": _fmt(rng.choice(ECHO[e.domain]), e)})
    slots = DETAIL_SLOTS[e.domain]
    plan = rng.choice(((slots[0],), (slots[1],), slots))
    for slot in plan:
        turns.append({"speaker": "user", "text": rng.choice(DETAIL_Q[slot])})
        turns.append({"speaker": "system", "text": _fmt(rng.choice(DETAIL_A[slot]), e)})
    return turns


# ---------------------------------------------------------------------------
# review templates -- aligned with the responder's acquisition prompts
# ---------------------------------------------------------------------------

def build_reviews(e: Entity, rng: random.Random) -> list[str]:
    def kp() -> str:
        # both article-ed and bare mentions should be on-distribution
        return ("the " + e.name) if rng.random() < 0.5 else e.name

    facts = tuple(_fmt(t, e) for t in FACT_CLAUSE[e.domain])
    echo = _fmt(ECHO[e.domain][0], e)
    tail = _fmt(ECHO_TAIL[e.domain], e)

    def candidates() -> str:
        choice = rng.randrange(12)
        if choice == 0:
            return echo
        if choice == 1:
            return f"{kp()} is famous for {e.famous}"
        if choice == 2:
            return f"the popular opinion about {kp()} is that {rng.choice(e.extras)}"
        if choice == 3:
            return f"here is what i know about {kp()} {tail}"
        if choice == 4:
            return f"my friend says that {kp()} is {rng.choice(ADJ[e.domain])}"
        if choice == 5:
            return f"here is some information about {kp()} {rng.choice(facts)}"
        if choice == 6:
            return f"here are some reviews about {kp()} {rng.choice(e.extras)}"
        if choice == 7:
            return f"i think {kp()} is {rng.choice(ADJ[e.domain])}"
        if choice == 8:
            return f"i read on the internet about {kp()} and found that {rng.choice(e.extras)}"
        if choice == 9:
            return f"today i learned about {kp()} that {rng.choice(facts)}"
        if choice == 10:
            return f"at {kp()} {rng.choice(e.extras)}"
        return rng.choice(e.extras)

    seen: set[str] = set()
    out: list[str] = []
    for _ in range(REVIEW_ATTEMPTS_PER_ENTITY):
        text = candidates()
        if text not in seen:
            seen.add(text)
            out.append(text)
    return out


# ---------------------------------------------------------------------------
# evaluation histories (each ends on a user turn)
# ---------------------------------------------------------------------------

def build_eval_histories(rng: random.Random) -> list[list[dict[str, str]]]:
    histories: list[list[dict[str, str]]] = []
    for i, e in enumerate(ENTITIES):
        full = build_dialog(e, rng)
        if i % 2 == 0:
            histories.append(full[:1])      # just the opening request
        else:
            histories.append(full[:3])      # request, echo, follow-up question
    for e in (ENTITIES[0], ENTITIES[5], ENTITIES[10], ENTITIES[15]):
        full = build_dialog(e, rng)
        histories.append(full[:3])
    return histories


def main() -> None:
    rng = random.Random(SEED)

    dialogs: list[list[dict[str, str]]] = []
    for e in ENTITIES:
        for _ in range(DIALOGS_PER_ENTITY):
            dialogs.append(build_dialog(e, rng))
    rng.shuffle(dialogs)

    with open(HERE / "dialogs.jsonl", "w", encoding="utf-8") as fh:
        for turns in dialogs:
            fh.write(json.dumps({"turns": turns}, sort_keys=True) + "\n")

    review_id = 0
    with open(HERE / "reviews.tsv", "w", encoding="utf-8") as fh:
        for e in ENTITIES:
            for text in build_reviews(e, rng):
                review_id += 1
                fh.write(f"rev-{review_id:04d}\t{e.domain}:{e.slug}\t{text}\n")

    with open(HERE / "eval_dialogs.jsonl", "w", encoding="utf-8") as fh:
        for turns in build_eval_histories(rng):
            fh.write(json.dumps({"turns": turns}, sort_keys=True) + "\n")

    print(f"wrote {len(dialogs)} dialogs, {review_id} reviews, "
          f"{len(build_eval_histories(random.Random(SEED + 1)))} eval histories")


if __name__ == "__main__":
    main()
