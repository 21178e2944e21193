"""MultiWOZ corpus ingestion and conversion to the six-role dialogue format.

Raw dialogues (2.0/2.1 layout: data.json + valListFile/testListFile +
per-domain *_db.json; 2.2 layout: a list of schema-guided dialogue objects)
are normalized into one RawDialogue shape, then converted per turn into gold
labels: active domain, cumulative function call, recomputed observation,
six-kind action, and the delexicalized response. Conversion is pure and
deterministic per dialogue, so the driver may parallelize and merge by id.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .core import Action, ActionFrame, FunctionCall, Observation, TurnRecord, validate_function_call
from .db import DatabaseSet, observe, render_observation
from .delex import delexicalize
from .normalize import normalize_value
from .prompts import TemplateSet, load_action_catalog, render_action_catalog
from .registry import FunctionRegistry, render_registry, render_spec

SPLIT_NAMES = ("train", "dev", "test")

# raw annotation slot spellings -> schema slot names
RAW_SLOT_ALIASES = {
    "leaveat": "leave_at",
    "arriveby": "arrive_by",
    "bookday": "book_day",
    "booktime": "book_time",
    "bookpeople": "book_people",
    "bookstay": "book_stay",
    "book day": "book_day",
    "book time": "book_time",
    "book people": "book_people",
    "book stay": "book_stay",
    "price range": "pricerange",
    "addr": "address",
    "post": "postcode",
    "ref": "reference",
    "depart": "departure",
    "dest": "destination",
    "leave": "leave_at",
    "arrive": "arrive_by",
    "trainid": "id",
    "ticket": "price",
}

_EMPTY_VALUES = {"", "not mentioned", "none", "not given"}


class IngestError(ValueError):
    """Raised for missing/malformed corpus files or inconsistent split lists."""


class ConversionError(ValueError):
    """Raised when a dialogue's annotations cannot be mapped (unknown domain/act)."""


def map_slot_name(raw: str) -> str:
    name = raw.strip().casefold()
    return RAW_SLOT_ALIASES.get(name, name)


@dataclass
class RawTurn:
    user: str
    response: str
    belief: dict  # domain -> {slot -> value}, cumulative
    acts: dict  # act key ("Restaurant-Inform") -> [[slot, value], ...]


@dataclass
class RawDialogue:
    id: str
    goal: dict
    turns: list[RawTurn]


@dataclass
class RawSplits:
    train: list[RawDialogue] = field(default_factory=list)
    dev: list[RawDialogue] = field(default_factory=list)
    test: list[RawDialogue] = field(default_factory=list)

    def sizes(self) -> tuple[int, int, int]:
        return (len(self.train), len(self.dev), len(self.test))


@dataclass
class GoldTurn:
    user: str
    domain: str
    call: FunctionCall
    observation: Observation
    frame: ActionFrame
    multi_domain: bool = False


@dataclass
class SixRoleDialogue:
    id: str
    records: list[TurnRecord]
    gold: list[GoldTurn]
    goal: dict = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    def to_json_obj(self) -> dict:
        return {
            "id": self.id,
            "goal": self.goal,
            "records": [{"role": r.role, "content": r.content} for r in self.records],
            "gold": [
                {
                    "user": g.user,
                    "domain": g.domain,
                    "call": {"name": g.call.name, "argument": dict(g.call.arguments)},
                    "observation": g.observation.to_json_obj(),
                    "action": g.frame.action.render(),
                    "response": g.frame.response,
                    "multi_domain": g.multi_domain,
                }
                for g in self.gold
            ],
            "warnings": self.warnings,
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "SixRoleDialogue":
        gold = []
        for g in obj.get("gold", []):
            gold.append(
                GoldTurn(
                    user=g["user"],
                    domain=g["domain"],
                    call=FunctionCall(g["call"]["name"], dict(g["call"]["argument"])),
                    observation=Observation.from_json_obj(g["observation"]),
                    frame=ActionFrame(Action.parse(g["action"]), g["response"]),
                    multi_domain=g.get("multi_domain", False),
                )
            )
        return cls(
            id=obj["id"],
            records=[TurnRecord(r["role"], r["content"]) for r in obj.get("records", [])],
            gold=gold,
            goal=obj.get("goal", {}),
            warnings=obj.get("warnings", []),
        )


@dataclass
class CorpusSplit:
    name: str
    dialogues: list[SixRoleDialogue] = field(default_factory=list)


def write_jsonl(dialogues: list[SixRoleDialogue], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        for dialogue in dialogues:
            handle.write(json.dumps(dialogue.to_json_obj()) + "\n")


def read_jsonl(path: str | Path) -> list[SixRoleDialogue]:
    dialogues = []
    with Path(path).open("r", encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if line:
                dialogues.append(SixRoleDialogue.from_json_obj(json.loads(line)))
    return dialogues


# ---------------------------------------------------------------------------
# raw readers


def _load_json(path: Path):
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise IngestError(f"{path.name}: parse error at byte offset {exc.pos}: {exc.msg}") from exc


def _read_id_list(raw_dir: Path, stem: str) -> list[str]:
    for suffix in (".txt", ".json"):
        path = raw_dir / f"{stem}{suffix}"
        if path.exists():
            return [line.strip() for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]
    raise IngestError(f"missing split list {stem}(.txt|.json) in {raw_dir}")


def _clean_belief(metadata: dict) -> dict:
    belief: dict[str, dict[str, str]] = {}
    for domain, section in metadata.items():
        slots: dict[str, str] = {}
        for raw_slot, value in (section.get("semi") or {}).items():
            if isinstance(value, list):
                value = value[0] if value else ""
            if str(value).strip().casefold() in _EMPTY_VALUES:
                continue
            slots[map_slot_name(raw_slot)] = str(value)
        for raw_slot, value in (section.get("book") or {}).items():
            if raw_slot == "booked" or isinstance(value, list):
                continue
            if str(value).strip().casefold() in _EMPTY_VALUES:
                continue
            slots[map_slot_name(f"book_{raw_slot}")] = str(value)
        if slots:
            belief[domain.strip().casefold()] = slots
    return belief


def _read_v21_dialogue(dialogue_id: str, obj: dict, acts_file: Optional[dict]) -> RawDialogue:
    log = obj.get("log", [])
    if len(log) % 2 != 0:
        raise IngestError(f"{dialogue_id}: log length {len(log)} is odd (user/system alternation)")
    turns = []
    for index in range(0, len(log), 2):
        user_entry, system_entry = log[index], log[index + 1]
        acts = system_entry.get("dialog_act")
        if acts is None and acts_file is not None:
            turn_key = str(index // 2 + 1)
            acts = (acts_file.get(dialogue_id.replace(".json", ""), {}) or {}).get(turn_key, {})
        if not isinstance(acts, dict):
            acts = {}
        turns.append(
            RawTurn(
                user=user_entry.get("text", ""),
                response=system_entry.get("text", ""),
                belief=_clean_belief(system_entry.get("metadata", {})),
                acts=acts,
            )
        )
    return RawDialogue(id=dialogue_id, goal=obj.get("goal", {}), turns=turns)


def _read_v22_dialogue(obj: dict, acts_file: Optional[dict]) -> RawDialogue:
    dialogue_id = obj.get("dialogue_id", "")
    raw_turns = obj.get("turns", [])
    if len(raw_turns) % 2 != 0:
        raise IngestError(f"{dialogue_id}: turn count {len(raw_turns)} is odd")
    turns = []
    for index in range(0, len(raw_turns), 2):
        user_turn, system_turn = raw_turns[index], raw_turns[index + 1]
        if user_turn.get("speaker", "USER").upper() != "USER":
            raise IngestError(f"{dialogue_id}: expected USER speaker at turn {index}")
        belief: dict[str, dict[str, str]] = {}
        for frame in user_turn.get("frames", []):
            domain = str(frame.get("service", "")).strip().casefold()
            slot_values = (frame.get("state") or {}).get("slot_values") or {}
            slots = {}
            for key, values in slot_values.items():
                slot = key.split("-", 1)[1] if "-" in key else key
                value = values[0] if isinstance(values, list) and values else str(values)
                if str(value).strip().casefold() in _EMPTY_VALUES:
                    continue
                slots[map_slot_name(slot)] = str(value)
            if slots:
                belief[domain] = slots
        acts = system_turn.get("dialogue_acts") or {}
        if not acts and acts_file is not None:
            acts = (acts_file.get(dialogue_id, {}) or {}).get(str(index + 1), {})
        if not isinstance(acts, dict):
            acts = {}
        turns.append(
            RawTurn(
                user=user_turn.get("utterance", ""),
                response=system_turn.get("utterance", ""),
                belief=belief,
                acts=acts,
            )
        )
    return RawDialogue(id=dialogue_id, goal=obj.get("goal", {}), turns=turns)


def ingest(raw_dir: str | Path, version: str = "21") -> RawSplits:
    """Read a raw corpus directory and partition it into train/dev/test.

    Splits follow valListFile/testListFile; everything else is train.
    Ordering is stable (sorted by dialogue id).
    """
    raw_dir = Path(raw_dir)
    data_path = raw_dir / "data.json"
    if not data_path.exists():
        raise IngestError(f"missing data.json in {raw_dir}")
    data = _load_json(data_path)

    acts_path = raw_dir / "dialogue_acts.json"
    acts_file = _load_json(acts_path) if acts_path.exists() else None

    dialogues: dict[str, RawDialogue] = {}
    if version in ("20", "21", "2.0", "2.1"):
        if not isinstance(data, dict):
            raise IngestError("2.0/2.1 data.json must map dialogue id -> dialogue")
        for dialogue_id in sorted(data):
            dialogues[dialogue_id] = _read_v21_dialogue(dialogue_id, data[dialogue_id], acts_file)
    elif version in ("22", "2.2"):
        if not isinstance(data, list):
            raise IngestError("2.2 data.json must hold a list of dialogue objects")
        for obj in data:
            dialogue = _read_v22_dialogue(obj, acts_file)
            dialogues[dialogue.id] = dialogue
    else:
        raise IngestError(f"unknown corpus version {version!r}")

    val_ids = _read_id_list(raw_dir, "valListFile")
    test_ids = _read_id_list(raw_dir, "testListFile")
    for listed in [*val_ids, *test_ids]:
        if listed not in dialogues:
            raise IngestError(f"dialogue {listed!r} listed in a split but absent from data")
    val_set, test_set = set(val_ids), set(test_ids)

    splits = RawSplits()
    for dialogue_id in sorted(dialogues):
        dialogue = dialogues[dialogue_id]
        if dialogue_id in test_set:
            splits.test.append(dialogue)
        elif dialogue_id in val_set:
            splits.dev.append(dialogue)
        else:
            splits.train.append(dialogue)
    return splits


# ---------------------------------------------------------------------------
# six-role conversion


def load_act_mapping(path: Optional[str | Path] = None) -> dict:
    if path is not None:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    from importlib import resources

    text = resources.files("fctod.data").joinpath("act_mapping.json").read_text("utf-8")
    return json.loads(text)


_ACT_MAPPING: Optional[dict] = None


def default_act_mapping() -> dict:
    global _ACT_MAPPING
    if _ACT_MAPPING is None:
        _ACT_MAPPING = load_act_mapping()
    return _ACT_MAPPING


def map_acts_to_action(acts: dict, mapping: Optional[dict] = None) -> Action:
    """Collapse a turn's act annotation onto one of the six action kinds."""
    mapping = mapping or default_act_mapping()
    intent_to_kind = mapping["intent_to_kind"]
    kinds = set()
    for act_key in acts:
        intent = act_key.split("-", 1)[-1].strip().casefold()
        kind = intent_to_kind.get(intent)
        if kind is None:
            raise ConversionError(f"unmappable act intent {act_key!r}")
        kinds.add(kind)
    if not kinds:
        return Action.GENERAL
    for kind in mapping["priority"]:
        if kind in kinds:
            return Action.parse(kind)
    return Action.GENERAL


def _act_domains(acts: dict, registry: FunctionRegistry) -> list[str]:
    domains = []
    for act_key in acts:
        prefix = act_key.split("-", 1)[0].strip().casefold()
        if prefix in ("general", "booking"):
            continue
        if registry.resolve(prefix) is not None and prefix not in domains:
            domains.append(prefix)
    return domains


def _act_annotations(acts: dict) -> list[tuple[str, str]]:
    pairs = []
    for slot_values in acts.values():
        for item in slot_values:
            if isinstance(item, (list, tuple)) and len(item) == 2:
                pairs.append((map_slot_name(str(item[0])), str(item[1])))
    return pairs


def build_system_record(
    registry: FunctionRegistry,
    active_domains: list[str],
    templates: Optional[TemplateSet] = None,
    catalog: Optional[dict] = None,
) -> TurnRecord:
    """Leading system record: task text, function list, selected specs, actions."""
    templates = templates or TemplateSet.bundled()
    catalog = catalog or load_action_catalog()
    names = active_domains or [registry.null_name]
    specs = "\n".join(render_spec(registry.resolve(name)) for name in names)
    content = templates.system.instruction_text.format(
        function_list=render_registry(registry),
        selected_specs=specs,
        action_catalog=render_action_catalog(catalog),
    )
    return TurnRecord("system", content)


def normalize_goal(goal: dict, registry: FunctionRegistry) -> dict:
    """Reduce a raw goal to per-domain constraints/requestables/booking flag."""
    normalized: dict[str, dict] = {}
    for domain, section in goal.items():
        if registry.resolve(str(domain)) is None or not isinstance(section, dict):
            continue
        info = {
            map_slot_name(str(slot)): str(value)
            for slot, value in (section.get("info") or {}).items()
            if str(value).strip().casefold() not in _EMPTY_VALUES
        }
        reqt = [map_slot_name(str(slot)) for slot in (section.get("reqt") or [])]
        book = bool(section.get("book"))
        if info or reqt or book:
            normalized[str(domain).strip().casefold()] = {
                "info": info,
                "reqt": reqt,
                "book": book,
            }
    return normalized


def _ordered_call_arguments(
    domain: str, slots: dict, registry: FunctionRegistry, warnings: list[str]
) -> dict[str, str]:
    spec = registry.resolve(domain)
    ordered: dict[str, str] = {}
    spec_order = [s.slot_name for s in spec.arguments]
    for slot_name in spec_order:
        if slot_name in slots:
            slot_spec = spec.slot(slot_name)
            ordered[slot_name] = normalize_value(slot_spec, str(slots[slot_name]))
    for slot_name in sorted(slots):
        if slot_name not in spec_order:
            warnings.append(f"dropped unknown slot {slot_name!r} for domain {domain!r}")
    return ordered


def convert(
    raw: RawDialogue,
    registry: FunctionRegistry,
    db: DatabaseSet,
    templates: Optional[TemplateSet] = None,
    catalog: Optional[dict] = None,
    act_mapping: Optional[dict] = None,
    k: int = 1,
) -> SixRoleDialogue:
    """Convert one raw dialogue into gold six-role records and labels.

    Active domain per turn: the first registry-order domain whose cumulative
    belief changed this turn; else the single domain named by the acts; else
    the previous turn's domain; else the null function. Turns where several
    domains changed at once are flagged multi_domain.
    """
    templates = templates or TemplateSet.bundled()
    catalog = catalog or load_action_catalog()
    warnings: list[str] = []

    priority = [name for name in registry.names() if not registry.is_null(name)]
    gold: list[GoldTurn] = []
    prev_belief: dict = {}
    prev_domain: Optional[str] = None
    prev_call: Optional[FunctionCall] = None

    for turn in raw.turns:
        for domain in turn.belief:
            if registry.resolve(domain) is None:
                raise ConversionError(f"{raw.id}: annotation references unknown domain {domain!r}")

        changed = [
            name
            for name in priority
            if turn.belief.get(name.casefold(), {}) != prev_belief.get(name.casefold(), {})
        ]
        if changed:
            active = changed[0].casefold()
        else:
            act_domains = _act_domains(turn.acts, registry)
            if act_domains:
                active = act_domains[0]
            elif prev_domain is not None:
                active = prev_domain
            else:
                active = registry.null_name

        if registry.is_null(active):
            call = FunctionCall(registry.null_name, {})
        else:
            call = FunctionCall(
                registry.resolve(active).name,
                _ordered_call_arguments(active, turn.belief.get(active, {}), registry, warnings),
            )

        obs = observe(prev_call, call, db, registry, k=k)
        action = map_acts_to_action(turn.acts, act_mapping)
        annotations = _act_annotations(turn.acts)
        annotations.extend(
            (slot, value) for slot, value in turn.belief.get(active, {}).items()
        )
        entity = obs.samples[0] if obs.samples else None
        delexed = delexicalize(turn.response, entity=entity, annotations=annotations)
        frame = ActionFrame(action, delexed)

        gold.append(
            GoldTurn(
                user=turn.user,
                domain=call.name,
                call=call,
                observation=obs,
                frame=frame,
                multi_domain=len(changed) > 1,
            )
        )
        prev_belief = turn.belief
        prev_domain = active
        prev_call = call

    active_domains = []
    for g in gold:
        if not registry.is_null(g.domain) and g.domain not in active_domains:
            active_domains.append(g.domain)

    records = [build_system_record(registry, active_domains, templates, catalog)]
    for g in gold:
        records.append(TurnRecord("user", g.user))
        records.append(TurnRecord("domain", g.domain))
        records.append(TurnRecord("function", g.call.canonical_json()))
        records.append(TurnRecord("observation", render_observation(g.observation)))
        records.append(TurnRecord("assistant", g.frame.render()))

    converted = SixRoleDialogue(
        id=raw.id,
        records=records,
        gold=gold,
        goal=normalize_goal(raw.goal, registry),
        warnings=warnings,
    )
    for g in gold:
        violations = validate_function_call(g.call, registry)
        if violations:
            raise ConversionError(f"{raw.id}: gold call invalid: {violations}")
    return converted


def convert_splits(
    splits: RawSplits,
    registry: FunctionRegistry,
    db: DatabaseSet,
    **kwargs,
) -> dict[str, CorpusSplit]:
    out = {}
    for name in SPLIT_NAMES:
        dialogues = [convert(raw, registry, db, **kwargs) for raw in getattr(splits, name)]
        out[name] = CorpusSplit(name=name, dialogues=dialogues)
    return out


def primary_domain(dialogue: SixRoleDialogue) -> str:
    for gold in dialogue.gold:
        if gold.domain != "null":
            return gold.domain
    return "null"


def sample_fewshot(
    split: CorpusSplit, fraction: float, seed: int, stratify: bool = False
) -> CorpusSplit:
    """Deterministic uniform subsample of floor(fraction * N) whole dialogues.

    Selection is keyed on a hash of (seed, dialogue id), never on position,
    so the sample is invariant under corpus re-ordering. Output keeps the
    stable by-id ordering. With stratify=True the same budget is spread over
    per-domain groups (floor per group, hash-ranked top-up to the exact
    total); uniform is the default regime.
    """
    if not (0.0 < fraction <= 1.0):
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    count = int(fraction * len(split.dialogues))

    def sort_key(dialogue: SixRoleDialogue) -> str:
        return hashlib.sha256(f"{seed}|{dialogue.id}".encode("utf-8")).hexdigest()

    if not stratify:
        chosen = sorted(split.dialogues, key=sort_key)[:count]
    else:
        groups: dict[str, list[SixRoleDialogue]] = {}
        for dialogue in split.dialogues:
            groups.setdefault(primary_domain(dialogue), []).append(dialogue)
        chosen = []
        leftovers: list[SixRoleDialogue] = []
        for domain in sorted(groups):
            ranked = sorted(groups[domain], key=sort_key)
            take = int(fraction * len(ranked))
            chosen.extend(ranked[:take])
            leftovers.extend(ranked[take:])
        chosen.extend(sorted(leftovers, key=sort_key)[: count - len(chosen)])

    chosen.sort(key=lambda d: d.id)
    return CorpusSplit(name=split.name, dialogues=chosen)
