"""Benchmark metrics over predicted sessions vs gold dialogues.

Inform/Success follow the standard MultiWOZ convention, which the upstream
benchmark names but never defines; the exact reading implemented here is:

* inform (per dialogue) = 1 iff for every goal domain the final predicted
  belief for that domain entails at least one venue (DB query non-empty)
  that also satisfies the goal constraints (intersection with the goal's
  venue set non-empty). Domains without entity tables (taxi, police,
  hospital) auto-inform.
* success = 1 iff inform = 1 and every goal-requestable slot's placeholder
  (the goal reqt list mapped through the placeholder inventory, plus
  [value_reference] when the goal books) appears in some predicted
  response, checked dialogue-wide.

JGA compares the full normalized belief state per turn; Fn_Se is per-turn
exact match of the selected function name. All metric computation is pure
and per-dialogue, so it parallelizes with a deterministic reduce.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .bleu import corpus_bleu
from .backend import Backend, BackendError, JudgeParseError, judge
from .core import DialogueSession, FunctionCall, function_call_to_belief
from .db import DatabaseSet, SYNTHETIC_DOMAINS, query
from .delex import default_inventory
from .ingest import SixRoleDialogue
from .registry import FunctionRegistry

# entity-free domains: offering a venue is not meaningful
AUTO_INFORM_DOMAINS = SYNTHETIC_DOMAINS | {"police", "hospital"}


class EvalError(ValueError):
    """Raised for session/gold mismatches (ids, turn counts)."""


@dataclass
class EvalReport:
    inform: float = 0.0
    success: float = 0.0
    bleu: float = 0.0
    combined: float = 0.0
    jga: float = 0.0
    fn_se: float = 0.0
    dialogues: int = 0
    turns: int = 0
    per_dialogue: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        expected = combined(self.bleu, self.inform, self.success)
        if abs(self.combined - expected) > 1e-9:
            raise ValueError(
                f"combined {self.combined} inconsistent with fields (expected {expected})"
            )
        for name in ("inform", "success", "jga", "fn_se"):
            value = getattr(self, name)
            if not (0.0 <= value <= 100.0):
                raise ValueError(f"{name} must lie in [0, 100], got {value}")

    def to_json_obj(self) -> dict:
        return {
            "inform": self.inform,
            "success": self.success,
            "bleu": self.bleu,
            "combined": self.combined,
            "jga": self.jga,
            "fn_se": self.fn_se,
            "dialogues": self.dialogues,
            "turns": self.turns,
            "per_dialogue": self.per_dialogue,
        }

    def render_table(self) -> str:
        rows = [
            ("Inform", f"{self.inform:.2f}"),
            ("Success", f"{self.success:.2f}"),
            ("BLEU", f"{self.bleu:.2f}"),
            ("Combined", f"{self.combined:.2f}"),
            ("JGA", f"{self.jga:.2f}"),
            ("Fn_Se", f"{self.fn_se:.2f}"),
        ]
        width = max(len(name) for name, _ in rows)
        lines = [f"{name.ljust(width)}  {value:>8}" for name, value in rows]
        header = f"{'metric'.ljust(width)}  {'value':>8}"
        return "\n".join([header, "-" * len(header), *lines])


def combined(bleu: float, inform: float, success: float) -> float:
    """Combined = BLEU + 0.5 * (Inform + Success)."""
    return bleu + 0.5 * (inform + success)


def _final_belief(session: DialogueSession, domain: str, registry: FunctionRegistry):
    for turn in reversed(session.turns):
        if turn.call.name.strip().casefold() == domain:
            return function_call_to_belief(turn.call, registry)
    return None


def _requestable_placeholders(goal_entry: dict, inventory: dict[str, str]) -> set[str]:
    wanted = set()
    for slot in goal_entry.get("reqt", []):
        placeholder = inventory.get(str(slot).strip().casefold())
        if placeholder is not None:
            wanted.add(placeholder)
    if goal_entry.get("book"):
        wanted.add(inventory["reference"])
    return wanted


def inform_success(
    sessions: Iterable[DialogueSession],
    gold: Iterable[SixRoleDialogue],
    db: DatabaseSet,
    registry: FunctionRegistry,
) -> tuple[float, float, dict]:
    """Aggregate Inform/Success percentages plus the per-dialogue outcomes."""
    gold_by_id = {dialogue.id: dialogue for dialogue in gold}
    inventory = default_inventory()
    informed = 0
    succeeded = 0
    per_dialogue: dict[str, dict] = {}
    count = 0
    for session in sessions:
        if session.dialogue_id not in gold_by_id:
            raise EvalError(f"session {session.dialogue_id!r} has no gold dialogue")
        goal = gold_by_id[session.dialogue_id].goal
        count += 1

        inform_ok = True
        for domain, entry in goal.items():
            if domain in AUTO_INFORM_DOMAINS:
                continue
            belief = _final_belief(session, domain, registry)
            if belief is None:
                inform_ok = False
                break
            offered = query(db, belief).matches
            if not offered:
                inform_ok = False
                break
            goal_belief = function_call_to_belief(
                FunctionCall(domain, dict(entry.get("info", {}))), registry
            )
            goal_names = {
                json.dumps(venue, sort_keys=True) for venue in query(db, goal_belief).matches
            }
            if not any(json.dumps(v, sort_keys=True) in goal_names for v in offered):
                inform_ok = False
                break

        responses = " ".join(turn.frame.response for turn in session.turns)
        success_ok = inform_ok
        if success_ok:
            for entry in goal.values():
                for placeholder in _requestable_placeholders(entry, inventory):
                    if placeholder not in responses:
                        success_ok = False
                        break
                if not success_ok:
                    break

        informed += int(inform_ok)
        succeeded += int(success_ok)
        per_dialogue[session.dialogue_id] = {"inform": int(inform_ok), "success": int(success_ok)}

    if count == 0:
        return 0.0, 0.0, {}
    return 100.0 * informed / count, 100.0 * succeeded / count, per_dialogue


def _belief_sequence(calls: Iterable[FunctionCall], registry: FunctionRegistry):
    return [function_call_to_belief(call, registry) for call in calls]


def jga(
    predicted_calls: list[FunctionCall],
    gold_calls: list[FunctionCall],
    registry: FunctionRegistry,
    normalize: bool = True,
) -> float:
    """Share of turns whose full belief state equals gold (0-100).

    By default both sides are normalized before comparison; normalize=False
    compares raw name/argument strings exactly.
    """
    if len(predicted_calls) != len(gold_calls):
        raise EvalError(
            f"turn count mismatch: {len(predicted_calls)} != {len(gold_calls)}"
        )
    if not gold_calls:
        return 0.0
    if normalize:
        predicted = _belief_sequence(predicted_calls, registry)
        gold = _belief_sequence(gold_calls, registry)
    else:
        predicted = [(c.name, sorted(c.arguments.items())) for c in predicted_calls]
        gold = [(c.name, sorted(c.arguments.items())) for c in gold_calls]
    matches = sum(1 for p, g in zip(predicted, gold) if p == g)
    return 100.0 * matches / len(gold)


def fn_se(predicted_domains: list[str], gold_domains: list[str]) -> float:
    """Per-turn exact-match accuracy of the selected function name (0-100)."""
    if len(predicted_domains) != len(gold_domains):
        raise EvalError(
            f"turn count mismatch: {len(predicted_domains)} != {len(gold_domains)}"
        )
    if not gold_domains:
        return 0.0
    matches = sum(
        1
        for p, g in zip(predicted_domains, gold_domains)
        if p.strip().casefold() == g.strip().casefold()
    )
    return 100.0 * matches / len(gold_domains)


def evaluate(
    sessions: list[DialogueSession],
    gold: list[SixRoleDialogue],
    db: DatabaseSet,
    registry: FunctionRegistry,
) -> EvalReport:
    """Compute the full report for aligned sessions/gold dialogue sets."""
    gold_by_id = {dialogue.id: dialogue for dialogue in gold}
    missing = [s.dialogue_id for s in sessions if s.dialogue_id not in gold_by_id]
    if missing:
        raise EvalError(f"sessions without gold: {missing}")

    predicted_calls: list[FunctionCall] = []
    gold_calls: list[FunctionCall] = []
    predicted_domains: list[str] = []
    gold_domains: list[str] = []
    hypotheses: list[str] = []
    references: list[str] = []
    for session in sessions:
        gold_dialogue = gold_by_id[session.dialogue_id]
        if len(session.turns) != len(gold_dialogue.gold):
            raise EvalError(
                f"{session.dialogue_id}: {len(session.turns)} turns vs {len(gold_dialogue.gold)} gold"
            )
        for turn, gold_turn in zip(session.turns, gold_dialogue.gold):
            predicted_calls.append(turn.call)
            gold_calls.append(gold_turn.call)
            predicted_domains.append(turn.selected)
            gold_domains.append(gold_turn.domain)
            hypotheses.append(turn.frame.response)
            references.append(gold_turn.frame.response)

    inform, success, per_dialogue = inform_success(sessions, gold, db, registry)
    bleu_score = corpus_bleu(hypotheses, references) if references else 0.0
    report = EvalReport(
        inform=inform,
        success=success,
        bleu=bleu_score,
        combined=combined(bleu_score, inform, success),
        jga=jga(predicted_calls, gold_calls, registry),
        fn_se=fn_se(predicted_domains, gold_domains),
        dialogues=len(sessions),
        turns=len(gold_calls),
        per_dialogue=per_dialogue,
    )
    return report


def gpt_score(
    sessions: list[DialogueSession],
    backend: Backend,
    criteria: dict[str, str],
    max_failures: int = 10,
) -> dict[str, Optional[float]]:
    """LLM-judge means per criterion over every session response (0-5).

    Failed judgments are excluded from the means and counted; more than
    max_failures aborts with the partial report attached to the error.
    """
    scores: dict[str, list[float]] = {name: [] for name in criteria}
    failures = 0
    for name, question in criteria.items():
        for session in sessions:
            context_lines: list[str] = []
            for index, turn in enumerate(session.turns, start=1):
                exchange = (
                    "Conversation so far:\n"
                    + "\n".join(context_lines[-6:])
                    + f"\nUser: {turn.user}\nResponse under evaluation: {turn.frame.response}"
                )
                try:
                    value = judge(
                        backend,
                        question,
                        exchange,
                        tag=f"{session.dialogue_id}:{index}:JUDGE:{name}",
                    )
                    scores[name].append(value)
                except (BackendError, JudgeParseError):
                    failures += 1
                    if failures > max_failures:
                        raise EvalError(
                            f"judge failures exceeded {max_failures}; partial means: "
                            f"{ {k: _mean(v) for k, v in scores.items()} }"
                        )
                context_lines.append(f"User: {turn.user}")
                context_lines.append(f"System: {turn.frame.response}")
    return {name: _mean(values) for name, values in scores.items()}


def _mean(values: list[float]) -> Optional[float]:
    return sum(values) / len(values) if values else None
