"""Entity databases, constraint queries, and the policy-instruction rules.

QUERY takes the turn's belief state and returns the entities satisfying
every constraint slot; the observation step wraps it with the two no-call
conditions (null function, unchanged call). Databases are immutable after
load and queries are pure, so evaluation workers can share one set.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .core import FunctionCall, Observation, BeliefState, calls_equal, function_call_to_belief, NO_CALL_TEXT
from .normalize import DONTCARE, normalize_value
from .registry import FunctionRegistry

# booking-style slots constrain the transaction, not the entity lookup
NON_QUERYABLE_PREFIXES = ("book_",)
NON_QUERYABLE_SLOTS = {"people"}

# time slots compare by inequality: attribute >= wanted departure,
# attribute <= wanted arrival; bounds are inclusive
TIME_LOWER_BOUND_SLOTS = {"leave_at"}
TIME_UPPER_BOUND_SLOTS = {"arrive_by"}

# domains served without an entity table get one synthesized entity
SYNTHETIC_DOMAINS = {"taxi"}

_TAXI_COLORS = ("black", "white", "red", "yellow", "blue", "grey")
_TAXI_TYPES = ("toyota", "skoda", "bmw", "honda", "ford", "audi", "lexus", "volvo", "volkswagen", "tesla")


class QueryError(ValueError):
    """Raised for queries against a domain with no table and no synthetic rule."""


@dataclass(frozen=True)
class QueryResult:
    count: int
    matches: tuple = ()

    def __post_init__(self) -> None:
        if self.count != len(self.matches):
            raise ValueError("count must equal len(matches)")


@dataclass(frozen=True)
class DatabaseSet:
    """Per-domain entity tables; each entity is a flat attribute record."""

    tables: dict = field(default_factory=dict)
    registry: Optional[FunctionRegistry] = None

    def domains(self) -> list[str]:
        return sorted(self.tables)

    def table(self, domain: str) -> Optional[list]:
        return self.tables.get(domain.strip().casefold())

    def validate_against(self, registry: FunctionRegistry) -> list[str]:
        """Check that every queryable slot maps onto an entity attribute."""
        problems: list[str] = []
        for domain, rows in self.tables.items():
            spec = registry.resolve(domain)
            if spec is None or not rows:
                continue
            attrs = set(rows[0])
            for slot in spec.arguments:
                if is_queryable(slot.slot_name) and slot.slot_name not in attrs:
                    problems.append(f"{domain}: queryable slot {slot.slot_name!r} has no attribute")
        return problems


def is_queryable(slot_name: str) -> bool:
    name = slot_name.strip().casefold()
    if name in NON_QUERYABLE_SLOTS:
        return False
    return not name.startswith(NON_QUERYABLE_PREFIXES)


def load_databases(
    raw_dir: str | Path, registry: Optional[FunctionRegistry] = None
) -> DatabaseSet:
    """Load every <domain>_db.json file found under raw_dir."""
    raw_dir = Path(raw_dir)
    tables: dict[str, list] = {}
    for path in sorted(raw_dir.glob("*_db.json")):
        domain = path.name[: -len("_db.json")].casefold()
        rows = json.loads(path.read_text(encoding="utf-8"))
        if not isinstance(rows, list):
            raise QueryError(f"{path.name}: expected a JSON array of entities")
        tables[domain] = [
            {str(k).casefold(): v for k, v in row.items()} for row in rows
        ]
    return DatabaseSet(tables=tables, registry=registry)


def _looks_like_time(value: str) -> bool:
    return len(value) == 5 and value[2] == ":" and value[:2].isdigit() and value[3:].isdigit()


def _slot_matches(slot_name: str, wanted: str, attribute: str) -> bool:
    if slot_name in TIME_LOWER_BOUND_SLOTS and _looks_like_time(wanted) and _looks_like_time(attribute):
        return attribute >= wanted
    if slot_name in TIME_UPPER_BOUND_SLOTS and _looks_like_time(wanted) and _looks_like_time(attribute):
        return attribute <= wanted
    return attribute == wanted


def _synthesize_entity(domain: str, constraints: dict) -> dict:
    # deterministic stand-in entity so replays and transcripts are stable
    digest = hashlib.sha256(
        json.dumps([domain, sorted(constraints.items())]).encode("utf-8")
    ).digest()
    color = _TAXI_COLORS[digest[0] % len(_TAXI_COLORS)]
    car = _TAXI_TYPES[digest[1] % len(_TAXI_TYPES)]
    phone = "07" + "".join(str(d % 10) for d in digest[2:11])
    return {"color": color, "car": car, "phone": phone, **constraints}


def query(db: DatabaseSet, belief: BeliefState) -> QueryResult:
    """Entities of the belief's domain satisfying every constraint slot.

    Empty and "dontcare" values impose no constraint, booking slots never
    constrain, both sides are normalized before comparison, and time slots
    compare by the inclusive bound table. Match order follows the table.
    """
    domain = belief.domain.strip().casefold()
    spec = db.registry.resolve(domain) if db.registry is not None else None

    constraints: dict[str, str] = {}
    for slot_name, value in belief.slots.items():
        name = slot_name.strip().casefold()
        if not is_queryable(name):
            continue
        slot_spec = spec.slot(name) if spec is not None else None
        wanted = normalize_value(slot_spec, str(value))
        if not wanted or wanted == DONTCARE:
            continue
        constraints[name] = wanted

    rows = db.table(domain)
    if rows is None:
        if domain in SYNTHETIC_DOMAINS:
            entity = _synthesize_entity(domain, constraints)
            return QueryResult(count=1, matches=(entity,))
        raise QueryError(f"no entity table for domain {belief.domain!r}")

    matches = []
    for row in rows:
        ok = True
        for name, wanted in constraints.items():
            if name not in row:
                ok = False
                break
            slot_spec = spec.slot(name) if spec is not None else None
            attribute = normalize_value(slot_spec, str(row[name]))
            if not _slot_matches(name, wanted, attribute):
                ok = False
                break
        if ok:
            matches.append(row)
    return QueryResult(count=len(matches), matches=tuple(matches))


def observe(
    prev_call: Optional[FunctionCall],
    call: FunctionCall,
    db: DatabaseSet,
    registry: FunctionRegistry,
    k: int = 1,
) -> Observation:
    """Policy instruction: the deterministic stage between DST and generation.

    No call is needed when the selected function is the null function or the
    call is unchanged from the previous turn (field-wise after
    normalization); otherwise the database is queried and the observation
    carries the match count plus the first k matches in table order.
    """
    if registry.is_null(call.name):
        return Observation.no_call_needed()
    if prev_call is not None and calls_equal(prev_call, call, registry):
        return Observation.no_call_needed()
    result = query(db, function_call_to_belief(call, registry))
    return Observation.entity_count(result.count, result.matches[:k])


def render_observation(obs: Observation) -> str:
    """Deterministic observation text used in prompts and training data."""
    if obs.no_call:
        return NO_CALL_TEXT
    text = f"Found {obs.count} matching entities."
    if obs.samples:
        text += "\n" + json.dumps([dict(s) for s in obs.samples], sort_keys=True)
    return text
