"""Value normalization shared by state tracking, DB matching, and metrics.

Normalization is total and idempotent: lowercase + trim + whitespace
collapse, wildcard aliases to "dontcare", canonical synonyms from a data
table (swappable without code changes), and HH:MM 24h canonicalization for
time-typed slots. Unparseable times pass through lowercased.
"""

from __future__ import annotations

import json
import re
from importlib import resources
from pathlib import Path
from typing import Optional

from .registry import SlotSpec

DONTCARE = "dontcare"

_DONTCARE_ALIASES = {
    "dontcare",
    "dont care",
    "don't care",
    "do not care",
    "doesnt care",
    "doesn't care",
    "does not care",
    "do n't care",
}

_WS = re.compile(r"\s+")

# hour / minute / optional am-pm, covering "9:05", "8.30pm", "5 pm", "17:00"
_TIME = re.compile(r"^(\d{1,2})(?:[:.](\d{2}))?\s*(am|pm)?$")


class NormalizationTable:
    """Synonym table: a global map plus per-slot overrides.

    Every mapped-to value must itself be a fixpoint of the table, which is
    validated at load so normalization stays idempotent.
    """

    def __init__(self, global_map: dict[str, str], by_slot: dict[str, dict[str, str]]):
        self.global_map = {k.casefold(): v for k, v in global_map.items()}
        self.by_slot = {
            slot: {k.casefold(): v for k, v in table.items()}
            for slot, table in by_slot.items()
        }
        for table in [self.global_map, *self.by_slot.values()]:
            for key, value in table.items():
                mapped = table.get(value.casefold(), value)
                if mapped != value:
                    raise ValueError(
                        f"synonym table is not idempotent: {key!r} -> {value!r} -> {mapped!r}"
                    )

    @classmethod
    def from_file(cls, path: str | Path) -> "NormalizationTable":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(raw.get("global", {}), raw.get("by_slot", {}))

    @classmethod
    def bundled(cls) -> "NormalizationTable":
        text = resources.files("fctod.data").joinpath("normalization.json").read_text("utf-8")
        raw = json.loads(text)
        return cls(raw.get("global", {}), raw.get("by_slot", {}))

    def lookup(self, slot_name: Optional[str], value: str) -> str:
        if slot_name is not None:
            table = self.by_slot.get(slot_name)
            if table and value in table:
                return table[value]
        return self.global_map.get(value, value)


_DEFAULT_TABLE: Optional[NormalizationTable] = None


def default_table() -> NormalizationTable:
    global _DEFAULT_TABLE
    if _DEFAULT_TABLE is None:
        _DEFAULT_TABLE = NormalizationTable.bundled()
    return _DEFAULT_TABLE


def normalize_time(raw: str) -> str:
    """Canonicalize a clock time to zero-padded HH:MM (24h).

    "9:05 am" -> "09:05", "8.30pm" -> "20:30", "12:00 am" -> "00:00".
    Strings that do not parse as a valid time are returned unchanged.
    """
    m = _TIME.match(raw)
    if not m:
        return raw
    hour = int(m.group(1))
    minute = int(m.group(2)) if m.group(2) is not None else 0
    ampm = m.group(3)
    if ampm is None and m.group(2) is None:
        # a bare number ("9") is ambiguous, leave it alone
        return raw
    if ampm == "pm" and hour < 12:
        hour += 12
    elif ampm == "am" and hour == 12:
        hour = 0
    if hour > 23 or minute > 59:
        return raw
    return f"{hour:02d}:{minute:02d}"


def normalize_value(
    slot: Optional[SlotSpec],
    raw: str,
    table: Optional[NormalizationTable] = None,
) -> str:
    """Normalize one slot value; total (never raises) and idempotent."""
    table = table or default_table()
    value = _WS.sub(" ", raw.strip().casefold())
    if value in _DONTCARE_ALIASES:
        return DONTCARE
    if slot is not None and slot.value_type == "time":
        value = normalize_time(value)
    return table.lookup(slot.slot_name if slot else None, value)
