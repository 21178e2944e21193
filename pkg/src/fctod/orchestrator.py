"""Per-turn execution loop: domain selection, state tracking, policy
instruction, response generation.

Stage order is fixed and policy instruction never touches the backend. The
three output parsers are total: malformed completions degrade to documented
fallbacks (null function / empty-argument call / General action) and every
deviation from the clean path lands in the turn's diagnostics, so one bad
generation can never abort an evaluation run.
"""

from __future__ import annotations

import json
import re
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .backend import Backend, BackendError, GenerationRequest
from .core import (
    Action,
    ActionFrame,
    DialogueSession,
    FunctionCall,
    Observation,
    SessionTurn,
)
from .db import DatabaseSet, observe
from .ingest import SixRoleDialogue
from .prompts import (
    TemplateSet,
    build_ds_prompt,
    build_dst_prompt,
    build_rg_prompt,
    load_action_catalog,
    truncate,
)
from .registry import FunctionRegistry, FunctionSpec

FALLBACK_RESPONSE = "I am sorry, could you say that again?"

MODES = ("policy", "gold_state")


class ParseAbortError(RuntimeError):
    """Raised instead of falling back when on_parse_fallback='abort'."""


@dataclass
class TurnOutcome:
    selected: FunctionSpec
    call: FunctionCall
    observation: Observation
    frame: ActionFrame
    diagnostics: list[str] = field(default_factory=list)
    latencies: dict = field(default_factory=dict)


@dataclass
class Dependencies:
    registry: FunctionRegistry
    db: DatabaseSet
    templates: TemplateSet
    backend: Backend
    action_catalog: dict = field(default_factory=load_action_catalog)
    token_budget: int = 4096
    k: int = 1
    max_new_tokens: int = 256
    timeout: float = 60.0
    transcript_path: Optional[Path] = None
    # "abort" turns parse fallbacks into ParseAbortError instead of degrading;
    # the default keeps evaluation total
    on_parse_fallback: str = "continue"


def parse_domain(text: str, registry: FunctionRegistry) -> tuple[FunctionSpec, list[str]]:
    """Pick the first registry name appearing in the completion.

    Matching is case-insensitive at word boundaries; no match falls back to
    the null function with a recorded diagnostic.
    """
    lowered = text.casefold()
    best: Optional[tuple[int, int, FunctionSpec]] = None
    for spec in registry.functions:
        name = spec.name.casefold()
        m = re.search(r"(?<![a-z0-9_])" + re.escape(name) + r"(?![a-z0-9_])", lowered)
        if m is None:
            continue
        key = (m.start(), -len(name))
        if best is None or key < best[:2]:
            best = (key[0], key[1], spec)
    if best is None:
        return registry.null_function, [f"domain fallback: no function name in {text[:80]!r}"]
    spec = best[2]
    diagnostics = [] if text.strip().casefold() == spec.name.casefold() else [
        f"domain extracted from noisy completion {text[:80]!r}"
    ]
    return spec, diagnostics


_FENCE = re.compile(r"```(?:json)?\s*(.*?)\s*```", re.DOTALL)


def _first_json_object(text: str) -> Optional[str]:
    start = text.find("{")
    if start < 0:
        return None
    depth = 0
    in_string = False
    escaped = False
    for index in range(start, len(text)):
        char = text[index]
        if in_string:
            if escaped:
                escaped = False
            elif char == "\\":
                escaped = True
            elif char == '"':
                in_string = False
            continue
        if char == '"':
            in_string = True
        elif char == "{":
            depth += 1
        elif char == "}":
            depth -= 1
            if depth == 0:
                return text[start : index + 1]
    return None


def _balance_repair(text: str) -> Optional[str]:
    start = text.find("{")
    if start < 0:
        return None
    fragment = text[start:].strip()
    fragment = re.sub(r",\s*([}\]])", r"\1", fragment)  # trailing commas
    opens = fragment.count("{") - fragment.count("}")
    if opens > 0:
        fragment = fragment.rstrip(",")
        fragment += "}" * opens
    try:
        json.loads(fragment)
        return fragment
    except json.JSONDecodeError:
        return None


def parse_call(text: str, selected: FunctionSpec) -> tuple[FunctionCall, list[str]]:
    """Parse a state-tracking completion into a validated function call.

    Repair ladder: strict parse, first-object extraction, fence strip,
    bracket-balance repair. Unknown slots are dropped with diagnostics;
    an unrecoverable completion degrades to an empty-argument call on the
    selected function.
    """
    diagnostics: list[str] = []
    candidates: list[tuple[str, Optional[str]]] = [(text.strip(), None)]
    obj_text = _first_json_object(text)
    if obj_text is not None:
        candidates.append((obj_text, "extracted first JSON object"))
    fence = _FENCE.search(text)
    if fence is not None:
        fenced = fence.group(1)
        candidates.append((fenced, "stripped code fence"))
        inner = _first_json_object(fenced)
        if inner is not None:
            candidates.append((inner, "stripped code fence"))
    repaired = _balance_repair(text)
    if repaired is not None:
        candidates.append((repaired, "balanced brackets"))

    parsed: Optional[dict] = None
    for candidate, note in candidates:
        try:
            loaded = json.loads(candidate)
        except json.JSONDecodeError:
            continue
        if isinstance(loaded, dict):
            parsed = loaded
            if note:
                diagnostics.append(f"call parse repair: {note}")
            break

    if parsed is None:
        return (
            FunctionCall(selected.name, {}),
            diagnostics + [f"call fallback: unparseable completion {text[:80]!r}"],
        )

    raw_args = parsed.get("argument", parsed.get("arguments"))
    if raw_args is not None and not isinstance(raw_args, dict):
        diagnostics.append("call repair: argument field is not an object, dropped")
    call = FunctionCall.from_json_obj(parsed)
    if call.name.strip().casefold() != selected.name.casefold():
        diagnostics.append(
            f"call name {call.name!r} coerced to selected function {selected.name!r}"
        )
    arguments: dict[str, str] = {}
    for slot_name, value in call.arguments.items():
        if selected.slot(slot_name) is None:
            diagnostics.append(f"dropped unknown slot {slot_name!r}")
        else:
            arguments[slot_name.strip().casefold()] = value
    return FunctionCall(selected.name, arguments), diagnostics


class EmptyResponseError(ValueError):
    """RG completion carried no response text at all."""


def parse_frame(text: str, catalog: Optional[dict] = None) -> tuple[ActionFrame, list[str]]:
    """Split an RG completion into (action, response) via the output grammar.

    Grammar: "Action: <kind>\\nResponse: <text>". Unknown labels map to
    General with a diagnostic; a completion with only a response keeps the
    text; an entirely empty completion raises EmptyResponseError.
    """
    if not text.strip():
        raise EmptyResponseError("empty response generation completion")
    diagnostics: list[str] = []
    action_match = re.search(r"^\s*Action\s*:\s*(.+?)\s*$", text, re.IGNORECASE | re.MULTILINE)
    response_match = re.search(
        r"Response\s*:\s*(.+)\s*$", text, re.IGNORECASE | re.DOTALL
    )
    if action_match is None and response_match is None:
        diagnostics.append("frame fallback: grammar missing, whole text used as response")
        return ActionFrame(Action.GENERAL, text.strip()), diagnostics

    if response_match is not None:
        response = response_match.group(1).strip()
    else:
        response = re.sub(r"^\s*Action\s*:.*$", "", text, flags=re.IGNORECASE | re.MULTILINE).strip()
        diagnostics.append("frame repair: no Response line, remainder used")
    if not response:
        raise EmptyResponseError("completion has an Action label but no response text")

    if action_match is None:
        diagnostics.append("frame repair: no Action line, defaulted to General")
        return ActionFrame(Action.GENERAL, response), diagnostics

    label = action_match.group(1).strip()
    try:
        action = Action.parse(label)
    except ValueError:
        diagnostics.append(f"frame fallback: unknown action label {label!r}")
        action = Action.GENERAL
    return ActionFrame(action, response), diagnostics


def run_turn(
    session: DialogueSession,
    user_utterance: str,
    deps: Dependencies,
    gold_call: Optional[FunctionCall] = None,
) -> TurnOutcome:
    """Execute one full DS -> DST -> PI -> RG turn and append it to the session.

    When gold_call is given (gold_state mode) the two tracking stages are
    substituted by the gold label and only response generation is executed.
    """
    turn_index = len(session.turns) + 1
    diagnostics: list[str] = []
    latencies: dict[str, float] = {}

    def call_backend(task: str, payload) -> str:
        payload = truncate(payload, deps.token_budget)
        request = GenerationRequest(
            payload=payload,
            max_new_tokens=deps.max_new_tokens,
            timeout=deps.timeout,
            tag=f"{session.dialogue_id}:{turn_index}:{task}",
        )
        started = time.monotonic()
        result = deps.backend.generate(request)
        latencies[task] = time.monotonic() - started
        return result.text

    def check_fallbacks(stage_diags: list[str]) -> None:
        if deps.on_parse_fallback == "abort" and any("fallback" in d for d in stage_diags):
            raise ParseAbortError(f"turn {turn_index}: {stage_diags}")

    if gold_call is not None:
        selected = deps.registry.resolve(gold_call.name) or deps.registry.null_function
        call = gold_call
    else:
        ds_payload = build_ds_prompt(deps.templates, deps.registry, session, user_utterance)
        selected, ds_diags = parse_domain(call_backend("DS", ds_payload), deps.registry)
        check_fallbacks(ds_diags)
        diagnostics.extend(ds_diags)

        dst_payload = build_dst_prompt(deps.templates, selected, session, user_utterance)
        call, dst_diags = parse_call(call_backend("DST", dst_payload), selected)
        check_fallbacks(dst_diags)
        diagnostics.extend(dst_diags)

    observation = observe(session.last_call, call, deps.db, deps.registry, k=deps.k)

    rg_payload = build_rg_prompt(
        deps.templates, deps.action_catalog, call, observation, session, user_utterance
    )
    try:
        frame, rg_diags = parse_frame(call_backend("RG", rg_payload), deps.action_catalog)
        diagnostics.extend(rg_diags)
    except EmptyResponseError as exc:
        frame = ActionFrame(Action.GENERAL, FALLBACK_RESPONSE)
        diagnostics.append(f"frame fallback: {exc}")

    outcome = TurnOutcome(
        selected=selected,
        call=call,
        observation=observation,
        frame=frame,
        diagnostics=diagnostics,
        latencies=latencies,
    )
    session.append(
        SessionTurn(
            user=user_utterance,
            selected=selected.name,
            call=call,
            observation=observation,
            frame=frame,
            diagnostics=list(diagnostics),
            latencies=dict(latencies),
        )
    )
    if deps.transcript_path is not None:
        append_transcript(deps.transcript_path, session, session.turns[-1], turn_index)
    return outcome


def run_dialogue(
    gold: SixRoleDialogue,
    deps: Dependencies,
    mode: str = "policy",
) -> DialogueSession:
    """Drive the loop over a gold dialogue's user utterances.

    policy mode is true end-to-end (DST history conditions on predictions);
    gold_state substitutes the gold function call before policy instruction
    to isolate response quality. Backend errors abort the dialogue after
    recording the partial session.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    session = DialogueSession(dialogue_id=gold.id, metadata={"mode": mode})
    for index, gold_turn in enumerate(gold.gold):
        try:
            run_turn(
                session,
                gold_turn.user,
                deps,
                gold_call=gold_turn.call if mode == "gold_state" else None,
            )
        except BackendError as exc:
            session.metadata["aborted"] = f"turn {index + 1}: {exc}"
            break
    return session


# ---------------------------------------------------------------------------
# transcript persistence (one JSONL line per turn)


def turn_to_json_obj(session: DialogueSession, turn: SessionTurn, index: int) -> dict:
    # wall-clock latencies stay in memory only, so that mock replays persist
    # byte-identical transcripts; aggregate timings belong in run headers
    return {
        "dialogue_id": session.dialogue_id,
        "turn": index,
        "user": turn.user,
        "selected": turn.selected,
        "call": {"name": turn.call.name, "argument": dict(turn.call.arguments)},
        "observation": turn.observation.to_json_obj(),
        "action": turn.frame.action.render(),
        "response": turn.frame.response,
        "diagnostics": turn.diagnostics,
    }


def append_transcript(path: Path, session: DialogueSession, turn: SessionTurn, index: int) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("a", encoding="utf-8") as handle:
        handle.write(json.dumps(turn_to_json_obj(session, turn, index)) + "\n")


def write_transcript(path: str | Path, sessions: list[DialogueSession]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        for session in sessions:
            for index, turn in enumerate(session.turns, start=1):
                handle.write(json.dumps(turn_to_json_obj(session, turn, index)) + "\n")


def read_transcript(path: str | Path) -> list[DialogueSession]:
    sessions: dict[str, DialogueSession] = {}
    with Path(path).open("r", encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            session = sessions.setdefault(
                obj["dialogue_id"], DialogueSession(dialogue_id=obj["dialogue_id"])
            )
            session.append(
                SessionTurn(
                    user=obj["user"],
                    selected=obj["selected"],
                    call=FunctionCall(obj["call"]["name"], dict(obj["call"]["argument"])),
                    observation=Observation.from_json_obj(obj["observation"]),
                    frame=ActionFrame(Action.parse(obj["action"]), obj["response"]),
                    diagnostics=obj.get("diagnostics", []),
                )
            )
    return [sessions[key] for key in sorted(sessions)]
