"""
Builder for the shipped synthetic world (ontology plus entity database).

The entity attributes are a fixed arithmetic function of the row index so the
world can be regenerated byte-for-byte without any randomness.
"""
import json
import logging
from pathlib import Path
from typing import Any, Dict, List

from ..repositories.world_repository import WORLD_SCHEMA_VERSION

logger = logging.getLogger(__name__)

AREAS = ["north", "south", "east", "west", "centre"]
PRICES = ["cheap", "moderate", "expensive"]
FOODS = ["chinese", "italian", "indian", "british", "swedish"]
STREETS = ["mill road", "regent street", "hills road", "king street", "bridge street", "trumpington road"]
HOTEL_TYPES = ["guesthouse", "boutique", "resort"]
ATTRACTION_TYPES = ["museum", "park", "theatre", "college"]
FEES = ["free", "4.50 pounds", "3.50 pounds"]
STATIONS = ["cambridge", "london", "ely", "norwich", "stevenage"]
DAYS = ["monday", "tuesday", "wednesday", "thursday", "friday"]
DURATIONS = ["50 minutes", "79 minutes", "105 minutes", "38 minutes"]
PEOPLE = ["1", "2", "3", "4", "5", "6"]

RESTAURANT_NAMES = [
    "golden wok", "pizza roma", "curry garden", "the copper kettle", "nordic table", "la tavola",
    "spice route", "the red lion", "fika corner", "jade garden", "taj mahal", "the ivy grill",
    "the stockholm room", "lotus house", "trattoria milano", "the old bakery", "smorgas", "bamboo bowl",
    "pasta fresca", "masala hut", "lingon cafe", "dragon pearl", "casa bella", "saffron lounge",
    "the crown inn", "imperial palace", "il forno", "royal tandoor", "the oak room", "the viking hall",
]
HOTEL_NAMES = [
    "acorn lodge", "alpha rooms", "seaside retreat", "avalon", "bridge court", "cityroomz",
    "ashley manor", "hamilton lodge", "lovell lodge", "archway house", "gonville place",
    "university arms", "huntingdon grand", "carolina rooms", "allenbell", "warkworth house",
    "el shaddai", "kirkwood house", "finches rest", "autumn house",
]
ATTRACTION_NAMES = [
    "kettles yard", "the fitzwilliam", "botanic gardens", "the junction", "clare hall",
    "whipple gallery", "jesus green", "corn exchange", "sedgwick gallery", "parkside pools",
    "scott polar", "ruskin gallery", "mumford stage", "trinity hall", "milton meadow", "byard art",
    "little st marys", "castle mound", "wandlebury ring", "the leys",
]


def build_ontology() -> Dict[str, Any]:
    return {
        "restaurant": {
            "key": "name",
            "informable": {"area": AREAS, "pricerange": PRICES, "food": FOODS},
            "requestable": ["address", "phone", "postcode"],
            "book": {"people": PEOPLE, "day": DAYS},
        },
        "hotel": {
            "key": "name",
            "informable": {"area": AREAS, "pricerange": PRICES, "type": HOTEL_TYPES},
            "requestable": ["address", "phone", "postcode"],
            "book": {"people": PEOPLE, "day": DAYS},
        },
        "attraction": {
            "key": "name",
            "informable": {"area": AREAS, "type": ATTRACTION_TYPES},
            "requestable": ["address", "fee", "phone", "postcode"],
            "book": {},
        },
        "train": {
            "key": "id",
            "informable": {"departure": STATIONS, "destination": STATIONS, "day": DAYS},
            "requestable": ["duration", "leaveat", "price"],
            "book": {"people": PEOPLE},
        },
    }


def _restaurants() -> List[Dict[str, str]]:
    rows = []
    for i, name in enumerate(RESTAURANT_NAMES):
        block = i // 5
        rows.append({
            "name": name,
            "area": AREAS[i % 5],
            "pricerange": PRICES[block % 3],
            "food": FOODS[(i + block) % 5],
            "address": f"{10 + i} {STREETS[i % 6]}",
            "phone": f"012233500{i:02d}",
            "postcode": f"cb2{i:02d}r",
        })
    return rows


def _hotels() -> List[Dict[str, str]]:
    rows = []
    for i, name in enumerate(HOTEL_NAMES):
        block = i // 5
        rows.append({
            "name": name,
            "area": AREAS[i % 5],
            "pricerange": PRICES[block % 3],
            "type": HOTEL_TYPES[(i + block) % 3],
            "address": f"{40 + i} {STREETS[(i + 2) % 6]}",
            "phone": f"012233600{i:02d}",
            "postcode": f"cb3{i:02d}h",
        })
    return rows


def _attractions() -> List[Dict[str, str]]:
    rows = []
    for i, name in enumerate(ATTRACTION_NAMES):
        block = i // 5
        rows.append({
            "name": name,
            "area": AREAS[i % 5],
            "type": ATTRACTION_TYPES[(i + block) % 4],
            "address": f"{70 + i} {STREETS[(i + 4) % 6]}",
            "fee": FEES[i % 3],
            "phone": f"012233700{i:02d}",
            "postcode": f"cb4{i:02d}a",
        })
    return rows


def _trains() -> List[Dict[str, str]]:
    rows = []
    for i in range(24):
        block = i // 5
        departure = i % 5
        destination = (departure + 1 + block % 4) % 5
        minutes = 300 + i * 40
        rows.append({
            "id": f"tr{1001 + i}",
            "departure": STATIONS[departure],
            "destination": STATIONS[destination],
            "day": DAYS[(block + 2 * i) % 5],
            "leaveat": f"{minutes // 60:02d}:{minutes % 60:02d}",
            "duration": DURATIONS[i % 4],
            "price": f"{8 + (i % 5) * 4}.60 pounds",
        })
    return rows


def build_world() -> Dict[str, Any]:
    """The complete world document in the on-disk schema."""
    return {
        "schema_version": WORLD_SCHEMA_VERSION,
        "ontology": build_ontology(),
        "entities": {
            "restaurant": _restaurants(),
            "hotel": _hotels(),
            "attraction": _attractions(),
            "train": _trains(),
        },
    }


def write_world(path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    world = build_world()
    path.write_text(json.dumps(world, indent=2) + "\n", encoding="utf-8")
    counts = {d: len(rows) for d, rows in world["entities"].items()}
    logger.info(f"Wrote world with entity counts {counts} to {path}")
    return path
