"""Prompt construction for the three generated stages (DS, DST, RG).

Templates are external UTF-8 text files with {placeholder} syntax so the
instruction wording can be swapped without a rebuild. Builders are pure:
identical inputs yield byte-identical payloads, which the golden-file tests
rely on.

History carries only the records each stage conditions on: domain selection
sees (user, domain, assistant) triples, state tracking sees (user, function,
assistant), and response generation sees (user, function, observation,
assistant) plus a final user/function/observation block. Assistant history
content is the delexicalized response for DS/DST and the action+response
grammar for RG.
"""

from __future__ import annotations

import json
import math
import string
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Callable, Optional

from .core import DialogueSession, FunctionCall, Observation, TurnRecord
from .db import render_observation
from .registry import FunctionRegistry, FunctionSpec, render_registry, render_spec

TASKS = ("DS", "DST", "RG")

_EXPECTED_PLACEHOLDERS = {
    "DS": {"function_list"},
    "DST": {"function_spec"},
    "RG": {"action_catalog", "function_call"},
    "SYSTEM": {"function_list", "selected_specs", "action_catalog"},
}

_TEMPLATE_FILES = {"DS": "ds.txt", "DST": "dst.txt", "RG": "rg.txt", "SYSTEM": "system.txt"}

# six action kinds in catalog order
ACTION_ORDER = ("Info", "Request", "NoOffer", "Recommend", "Select", "General")


class TemplateError(ValueError):
    """Raised when a template's placeholders do not match its task."""


class BudgetError(ValueError):
    """Raised when the token budget cannot fit the mandatory messages."""


@dataclass(frozen=True)
class PromptTemplate:
    task: str
    instruction_text: str

    def __post_init__(self) -> None:
        expected = _EXPECTED_PLACEHOLDERS.get(self.task)
        if expected is None:
            raise TemplateError(f"unknown template task {self.task!r}")
        found = {
            name
            for _, name, _, _ in string.Formatter().parse(self.instruction_text)
            if name
        }
        if found != expected:
            raise TemplateError(
                f"{self.task} template placeholders {sorted(found)} != expected {sorted(expected)}"
            )


@dataclass(frozen=True)
class TemplateSet:
    ds: PromptTemplate
    dst: PromptTemplate
    rg: PromptTemplate
    system: PromptTemplate

    @classmethod
    def from_dir(cls, directory: str | Path) -> "TemplateSet":
        directory = Path(directory)
        loaded = {
            task: PromptTemplate(task, (directory / fname).read_text(encoding="utf-8"))
            for task, fname in _TEMPLATE_FILES.items()
        }
        return cls(ds=loaded["DS"], dst=loaded["DST"], rg=loaded["RG"], system=loaded["SYSTEM"])

    @classmethod
    def bundled(cls) -> "TemplateSet":
        root = resources.files("fctod.data").joinpath("templates")
        loaded = {
            task: PromptTemplate(task, root.joinpath(fname).read_text("utf-8"))
            for task, fname in _TEMPLATE_FILES.items()
        }
        return cls(ds=loaded["DS"], dst=loaded["DST"], rg=loaded["RG"], system=loaded["SYSTEM"])


@dataclass(frozen=True)
class ChatPayload:
    messages: tuple[TurnRecord, ...]

    def __post_init__(self) -> None:
        if not self.messages or self.messages[0].role != "system":
            raise ValueError("payload must start with a system message")


def load_action_catalog(path: Optional[str | Path] = None) -> dict[str, str]:
    if path is not None:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    text = resources.files("fctod.data").joinpath("action_catalog.json").read_text("utf-8")
    return json.loads(text)


def render_action_catalog(catalog: dict[str, str]) -> str:
    lines = [f"- {kind}: {catalog[kind]}" for kind in ACTION_ORDER if kind in catalog]
    return "\n".join(lines)


def build_ds_prompt(
    templates: TemplateSet,
    registry: FunctionRegistry,
    session: DialogueSession,
    current_user: str,
) -> ChatPayload:
    system = templates.ds.instruction_text.format(function_list=render_registry(registry))
    messages = [TurnRecord("system", system)]
    for turn in session.turns:
        messages.append(TurnRecord("user", turn.user))
        messages.append(TurnRecord("domain", turn.selected))
        messages.append(TurnRecord("assistant", turn.frame.response))
    messages.append(TurnRecord("user", current_user))
    return ChatPayload(tuple(messages))


def build_dst_prompt(
    templates: TemplateSet,
    selected: FunctionSpec,
    session: DialogueSession,
    current_user: str,
) -> ChatPayload:
    system = templates.dst.instruction_text.format(function_spec=render_spec(selected))
    messages = [TurnRecord("system", system)]
    for turn in session.turns:
        messages.append(TurnRecord("user", turn.user))
        messages.append(TurnRecord("function", turn.call.canonical_json()))
        messages.append(TurnRecord("assistant", turn.frame.response))
    messages.append(TurnRecord("user", current_user))
    return ChatPayload(tuple(messages))


def build_rg_prompt(
    templates: TemplateSet,
    action_catalog: dict[str, str],
    call: FunctionCall,
    obs: Observation,
    session: DialogueSession,
    current_user: str,
) -> ChatPayload:
    system = templates.rg.instruction_text.format(
        action_catalog=render_action_catalog(action_catalog),
        function_call=call.canonical_json(),
    )
    messages = [TurnRecord("system", system)]
    for turn in session.turns:
        messages.append(TurnRecord("user", turn.user))
        messages.append(TurnRecord("function", turn.call.canonical_json()))
        messages.append(TurnRecord("observation", render_observation(turn.observation)))
        messages.append(TurnRecord("assistant", turn.frame.render()))
    messages.append(TurnRecord("user", current_user))
    messages.append(TurnRecord("function", call.canonical_json()))
    messages.append(TurnRecord("observation", render_observation(obs)))
    return ChatPayload(tuple(messages))


def estimate_tokens(text: str) -> int:
    """Default budget heuristic: one token per four characters, rounded up."""
    return math.ceil(len(text) / 4)


def payload_tokens(payload: ChatPayload, counter: Callable[[str], int]) -> int:
    return sum(counter(m.content) for m in payload.messages)


def _groups(payload: ChatPayload) -> tuple[TurnRecord, list[list[TurnRecord]]]:
    """Split into (system, groups); each group starts at a user message."""
    system = payload.messages[0]
    groups: list[list[TurnRecord]] = []
    for message in payload.messages[1:]:
        if message.role == "user" or not groups:
            groups.append([])
        groups[-1].append(message)
    return system, groups


def truncate(
    payload: ChatPayload,
    budget: int,
    counter: Optional[Callable[[str], int]] = None,
) -> ChatPayload:
    """Drop the oldest whole turn-groups until the estimate fits the budget.

    The system message and the final user block are never dropped and
    messages are never split; what remains of the history is a suffix of the
    original. Raises BudgetError when even the mandatory messages overflow.
    """
    counter = counter or estimate_tokens
    if payload_tokens(payload, counter) <= budget:
        return payload
    system, groups = _groups(payload)
    if not groups:
        raise BudgetError("budget too small for the system message alone")
    final = groups[-1]
    history = groups[:-1]
    while history:
        candidate = ChatPayload(tuple([system, *sum(history, []), *final]))
        if payload_tokens(candidate, counter) <= budget:
            return candidate
        history = history[1:]
    candidate = ChatPayload(tuple([system, *final]))
    if payload_tokens(candidate, counter) > budget:
        raise BudgetError(
            f"budget {budget} cannot fit the system message and final user block"
        )
    return candidate
