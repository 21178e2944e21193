"""Response delexicalization: surface values -> typed [value_xxx] placeholders.

The placeholder inventory ships as a data file; slots absent from it (yes/no
booleans and the like) are never delexicalized. Replacement is
longest-match-first at alphanumeric boundaries, so "3" never fires inside
"13" and multi-word venue names win over their fragments.
"""

from __future__ import annotations

import json
import re
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Optional

_SKIP_VALUES = {"", "?", "yes", "no", "none", "dontcare"}

_PLACEHOLDER = re.compile(r"\[value_[a-z]+\]")


def load_placeholders(path: Optional[str | Path] = None) -> dict[str, str]:
    if path is not None:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    text = resources.files("fctod.data").joinpath("placeholders.json").read_text("utf-8")
    return json.loads(text)


_DEFAULT_INVENTORY: Optional[dict[str, str]] = None


def default_inventory() -> dict[str, str]:
    global _DEFAULT_INVENTORY
    if _DEFAULT_INVENTORY is None:
        _DEFAULT_INVENTORY = load_placeholders()
    return _DEFAULT_INVENTORY


def placeholder_tokens(inventory: Optional[Mapping[str, str]] = None) -> set[str]:
    return set((inventory or default_inventory()).values())


def _pairs(
    entity: Optional[Mapping],
    annotations: Iterable[tuple[str, str]],
    inventory: Mapping[str, str],
) -> list[tuple[str, str]]:
    seen: set[tuple[str, str]] = set()
    pairs: list[tuple[str, str]] = []
    sources: list[tuple[str, str]] = [(str(s), str(v)) for s, v in annotations]
    if entity:
        sources.extend((str(k), str(v)) for k, v in entity.items())
    for slot, value in sources:
        placeholder = inventory.get(slot.strip().casefold())
        cleaned = value.strip()
        if placeholder is None or cleaned.casefold() in _SKIP_VALUES:
            continue
        # single letters are too noisy to substitute; single digits (choice
        # counts, star ratings) are fine at word boundaries
        if len(cleaned) < 2 and not cleaned.isdigit():
            continue
        key = (cleaned.casefold(), placeholder)
        if key not in seen:
            seen.add(key)
            pairs.append((cleaned, placeholder))
    # longest value first; full ordering pinned for determinism
    pairs.sort(key=lambda p: (-len(p[0]), p[0].casefold(), p[1]))
    return pairs


def delexicalize(
    response: str,
    entity: Optional[Mapping] = None,
    annotations: Iterable[tuple[str, str]] = (),
    inventory: Optional[Mapping[str, str]] = None,
) -> str:
    """Replace annotated/entity values in a response with placeholders.

    Text that mentions no annotated value is returned verbatim.
    """
    inventory = inventory or default_inventory()
    text = response
    for value, placeholder in _pairs(entity, annotations, inventory):
        # underscore counts as a word character so values never fire inside
        # an already-substituted [value_xxx] token
        pattern = re.compile(
            r"(?<![a-z0-9_])" + re.escape(value) + r"(?![a-z0-9_])", re.IGNORECASE
        )
        text = pattern.sub(placeholder, text)
    return text


def relexicalize(
    response: str,
    values: Mapping[str, str],
) -> str:
    """Inverse helper for fixtures/tests: substitute placeholders back."""
    def repl(match: re.Match) -> str:
        return values.get(match.group(0), match.group(0))

    return _PLACEHOLDER.sub(repl, response)
