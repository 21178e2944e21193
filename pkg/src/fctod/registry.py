"""Domain function specifications and the registry that serves them.

A domain (restaurant, hotel, ...) is modeled as a callable function whose
arguments are slots. The registry holds the full function set including the
null function (no active domain, empty arguments) and is immutable after
load, so it is safe to share across workers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

VALUE_TYPES = ("categorical", "free_text", "integer", "time", "boolean")

DEFAULT_NULL_NAME = "null"


class SchemaError(ValueError):
    """Raised when a schema file is malformed or violates an invariant."""


def _canon_name(name: str) -> str:
    return name.strip().casefold()


@dataclass(frozen=True)
class SlotSpec:
    slot_name: str
    value_type: str
    description: str = ""
    possible_values: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        if not self.slot_name.strip():
            raise SchemaError("slot_name must be non-empty")
        if self.value_type not in VALUE_TYPES:
            raise SchemaError(
                f"slot {self.slot_name!r}: unknown value type {self.value_type!r}"
            )
        if self.value_type == "categorical":
            if not self.possible_values:
                raise SchemaError(
                    f"categorical slot {self.slot_name!r} requires possible_values"
                )
            normalized = [v.strip().casefold() for v in self.possible_values]
            if len(set(normalized)) != len(normalized):
                raise SchemaError(
                    f"slot {self.slot_name!r}: possible_values not unique after normalization"
                )
        elif self.possible_values is not None and len(self.possible_values) == 0:
            raise SchemaError(
                f"slot {self.slot_name!r}: possible_values present but empty"
            )


@dataclass(frozen=True)
class FunctionSpec:
    name: str
    description: str
    arguments: tuple[SlotSpec, ...] = ()

    def __post_init__(self) -> None:
        if not self.name.strip():
            raise SchemaError("function name must be non-empty")
        names = [s.slot_name for s in self.arguments]
        dupes = {n for n in names if names.count(n) > 1}
        if dupes:
            raise SchemaError(
                f"function {self.name!r}: duplicate slot names {sorted(dupes)}"
            )

    def slot(self, slot_name: str) -> Optional[SlotSpec]:
        wanted = _canon_name(slot_name)
        for s in self.arguments:
            if _canon_name(s.slot_name) == wanted:
                return s
        return None


@dataclass(frozen=True)
class FunctionRegistry:
    """Ordered, immutable set of function specs with exactly one null function."""

    functions: tuple[FunctionSpec, ...]
    null_name: str = DEFAULT_NULL_NAME
    _by_name: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        by_name: dict[str, FunctionSpec] = {}
        for spec in self.functions:
            key = _canon_name(spec.name)
            if key in by_name:
                raise SchemaError(f"duplicate function name {spec.name!r}")
            by_name[key] = spec
        null_key = _canon_name(self.null_name)
        if null_key not in by_name:
            raise SchemaError(f"registry is missing the null function {self.null_name!r}")
        if by_name[null_key].arguments:
            raise SchemaError("null function must have empty arguments")
        object.__setattr__(self, "_by_name", by_name)

    @property
    def null_function(self) -> FunctionSpec:
        return self._by_name[_canon_name(self.null_name)]

    def is_null(self, name: str) -> bool:
        return _canon_name(name) == _canon_name(self.null_name)

    def names(self) -> list[str]:
        return [spec.name for spec in self.functions]

    def resolve(self, name: str) -> Optional[FunctionSpec]:
        """Look up a spec by name after case-folding and trimming.

        Returns None when there is no match; callers that need a total
        selection map the miss to the null function themselves.
        """
        return self._by_name.get(_canon_name(name))


def _slot_from_obj(obj: dict) -> SlotSpec:
    try:
        possible = obj.get("possible_values")
        return SlotSpec(
            slot_name=obj["slot_name"],
            value_type=obj["type"],
            description=obj.get("description", ""),
            possible_values=tuple(possible) if possible is not None else None,
        )
    except KeyError as exc:
        raise SchemaError(f"slot object missing field {exc}") from exc


def _spec_from_obj(obj: dict) -> FunctionSpec:
    try:
        return FunctionSpec(
            name=obj["name"],
            description=obj.get("description", ""),
            arguments=tuple(_slot_from_obj(a) for a in obj.get("arguments", [])),
        )
    except KeyError as exc:
        raise SchemaError(f"function object missing field {exc}") from exc


def parse_registry(text: str, null_name: str = DEFAULT_NULL_NAME) -> FunctionRegistry:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"schema is not valid JSON: {exc}") from exc
    if not isinstance(raw, list):
        raise SchemaError("schema file must hold a top-level array of functions")
    return FunctionRegistry(
        functions=tuple(_spec_from_obj(o) for o in raw), null_name=null_name
    )


def load_registry(path: str | Path, null_name: str = DEFAULT_NULL_NAME) -> FunctionRegistry:
    """Load and validate a registry from a schema JSON file (file order kept)."""
    return parse_registry(Path(path).read_text(encoding="utf-8"), null_name=null_name)


def default_registry() -> FunctionRegistry:
    """The bundled MultiWOZ schema: seven domains plus the null function."""
    text = resources.files("fctod.data").joinpath("multiwoz_schema.json").read_text("utf-8")
    return parse_registry(text)


def render_spec(spec: FunctionSpec) -> str:
    """Deterministic JSON rendering, fields ordered name/description/arguments.

    The output doubles as the schema file format, so render + re-parse
    round-trips, and it is embedded verbatim in prompts and golden files.
    """
    args = []
    for s in spec.arguments:
        slot: dict = {
            "slot_name": s.slot_name,
            "type": s.value_type,
            "description": s.description,
        }
        if s.possible_values is not None:
            slot["possible_values"] = list(s.possible_values)
        args.append(slot)
    return json.dumps(
        {"name": spec.name, "description": spec.description, "arguments": args},
        indent=1,
    )


def render_registry(registry: FunctionRegistry) -> str:
    """Render the whole function list as a JSON array (used in DS prompts)."""
    return "[\n" + ",\n".join(render_spec(s) for s in registry.functions) + "\n]"
