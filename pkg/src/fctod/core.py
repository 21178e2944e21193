"""Shared dialogue data model: roles, belief states, calls, actions, observations.

All types here are immutable value objects and can be shared freely across
workers. A belief state is always the full cumulative state for its turn,
never a delta: state tracking regenerates the complete argument map every
turn, so no merge operator exists.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Optional

from .normalize import NormalizationTable, normalize_value
from .registry import FunctionRegistry

ROLES = ("system", "user", "domain", "function", "observation", "assistant")

NO_CALL_TEXT = "Do not need to call function."


class Action(Enum):
    INFO = "Info"
    REQUEST = "Request"
    NO_OFFER = "NoOffer"
    RECOMMEND = "Recommend"
    SELECT = "Select"
    GENERAL = "General"

    @classmethod
    def parse(cls, label: str) -> "Action":
        for action in cls:
            if action.value.casefold() == label.strip().casefold():
                return action
        raise ValueError(f"unknown action label {label!r}")

    def render(self) -> str:
        return self.value


@dataclass(frozen=True)
class TurnRecord:
    role: str
    content: str

    def __post_init__(self) -> None:
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}")


@dataclass(frozen=True)
class ActionFrame:
    action: Action
    response: str

    def __post_init__(self) -> None:
        if not self.response.strip():
            raise ValueError("response text must be non-empty")

    def render(self) -> str:
        return f"Action: {self.action.render()}\nResponse: {self.response}"


@dataclass(frozen=True)
class Observation:
    """Policy-instruction result: entity count + sample entities, or no-call.

    count is None exactly for the no-call variant; samples hold at most the
    configured K leading matches in stable table order.
    """

    count: Optional[int] = None
    samples: tuple = ()

    def __post_init__(self) -> None:
        if self.count is None:
            if self.samples:
                raise ValueError("no-call observation carries no payload")
        elif self.count < 0 or self.count < len(self.samples):
            raise ValueError("count must be >= len(samples) and non-negative")

    @classmethod
    def no_call_needed(cls) -> "Observation":
        return cls(count=None)

    @classmethod
    def entity_count(cls, count: int, samples: list | tuple = ()) -> "Observation":
        return cls(count=count, samples=tuple(samples))

    @property
    def no_call(self) -> bool:
        return self.count is None

    def to_json_obj(self) -> dict:
        if self.no_call:
            return {"no_call_needed": True}
        return {"count": self.count, "samples": [dict(s) for s in self.samples]}

    @classmethod
    def from_json_obj(cls, obj: Mapping) -> "Observation":
        if obj.get("no_call_needed"):
            return cls.no_call_needed()
        return cls.entity_count(obj["count"], obj.get("samples", []))

    def canonical_json(self) -> str:
        return json.dumps(self.to_json_obj(), sort_keys=True)


@dataclass(frozen=True)
class FunctionCall:
    """A turn's state-tracking output: function name + slot-value arguments."""

    name: str
    arguments: Mapping[str, str] = field(default_factory=dict)

    def canonical_json(self) -> str:
        # the singular "argument" key is the canonical wire/prompt form
        return json.dumps({"name": self.name, "argument": dict(self.arguments)})

    @classmethod
    def from_json_obj(cls, obj: Mapping) -> "FunctionCall":
        args = obj.get("argument", obj.get("arguments", {}))
        if not isinstance(args, Mapping):
            args = {}
        return cls(
            name=str(obj.get("name", "")),
            arguments={str(k): str(v) for k, v in args.items()},
        )


@dataclass(frozen=True)
class BeliefState:
    """Active domain plus the cumulative slot-value map for the turn."""

    domain: str
    slots: Mapping[str, str] = field(default_factory=dict)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BeliefState):
            return NotImplemented
        return self.domain.casefold() == other.domain.casefold() and dict(self.slots) == dict(other.slots)

    def __hash__(self) -> int:
        return hash((self.domain.casefold(), tuple(sorted(self.slots.items()))))


def function_call_to_belief(
    call: FunctionCall,
    registry: Optional[FunctionRegistry] = None,
    table: Optional[NormalizationTable] = None,
) -> BeliefState:
    """Project a function call onto a belief state with normalized values.

    Slots whose normalized value is empty are dropped (MultiWOZ annotations
    use "not mentioned"/"none" for absent values). Slot pair count is
    otherwise preserved.
    """
    spec = registry.resolve(call.name) if registry is not None else None
    slots: dict[str, str] = {}
    for slot_name, value in call.arguments.items():
        slot_spec = spec.slot(slot_name) if spec is not None else None
        normalized = normalize_value(slot_spec, str(value), table)
        if normalized:
            slots[slot_name.strip().casefold()] = normalized
    return BeliefState(domain=call.name.strip().casefold(), slots=slots)


def validate_function_call(call: FunctionCall, registry: FunctionRegistry) -> list[str]:
    """Return the list of violations (empty means the call is valid).

    Violations cover: unknown function name, unknown slot names, and
    categorical values outside possible_values plus the dontcare wildcard.
    """
    spec = registry.resolve(call.name)
    if spec is None:
        return [f"unknown function {call.name!r}"]
    violations: list[str] = []
    for slot_name, value in call.arguments.items():
        slot = spec.slot(slot_name)
        if slot is None:
            violations.append(f"unknown slot {slot_name!r} for function {spec.name!r}")
            continue
        if slot.value_type == "categorical":
            normalized = normalize_value(slot, str(value))
            allowed = {v.strip().casefold() for v in (slot.possible_values or ())}
            if normalized and normalized != "dontcare" and normalized not in allowed:
                violations.append(
                    f"slot {slot.slot_name!r}: value {value!r} not in "
                    f"{sorted(allowed)} or 'dontcare'"
                )
    return violations


def calls_equal(a: FunctionCall, b: FunctionCall, registry: Optional[FunctionRegistry] = None) -> bool:
    """Field-wise equality after normalization (name + argument map)."""
    return function_call_to_belief(a, registry) == function_call_to_belief(b, registry)


@dataclass
class SessionTurn:
    """One completed turn: user input plus the four per-stage results."""

    user: str
    selected: str
    call: FunctionCall
    observation: Observation
    frame: ActionFrame
    diagnostics: list[str] = field(default_factory=list)
    latencies: dict = field(default_factory=dict)


@dataclass
class DialogueSession:
    """Chronological turn accumulator for one dialogue (turn index starts at 1)."""

    dialogue_id: str = ""
    turns: list[SessionTurn] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    @property
    def last_call(self) -> Optional[FunctionCall]:
        return self.turns[-1].call if self.turns else None

    def append(self, turn: SessionTurn) -> None:
        self.turns.append(turn)
