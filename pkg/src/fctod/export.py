"""Fine-tuning data export: six-role chat JSONL with per-role loss masks.

Loss attaches to the three generated roles only: domain (selection),
function (state tracking), assistant (action + response). Masks are
per-message; the trainer derives token-level masks from message boundaries,
which keeps this format tokenizer-agnostic. One training sample spans one
whole dialogue.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

from .core import ROLES
from .ingest import CorpusSplit, SixRoleDialogue
from .prompts import estimate_tokens

LOSS_ROLES = frozenset({"domain", "function", "assistant"})

MANIFEST_FILENAME = "manifest.json"
REPORT_FILENAME = "report.json"


class ExportError(ValueError):
    """Raised for unwritable outputs or malformed exported files."""


def loss_weight(role: str) -> int:
    return 1 if role in LOSS_ROLES else 0


@dataclass(frozen=True)
class MaskedMessage:
    role: str
    content: str
    loss_weight: int

    def __post_init__(self) -> None:
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}")
        if self.loss_weight != loss_weight(self.role):
            raise ValueError(
                f"role {self.role!r} must carry loss weight {loss_weight(self.role)}"
            )


@dataclass(frozen=True)
class TrainingManifest:
    """Adapter fine-tuning hyperparameters serialized next to the data."""

    lora_rank: int = 32
    lora_alpha: int = 16
    target_modules: tuple[str, ...] = ("q_proj", "v_proj")
    epochs: int = 4
    learning_rate: float = 3e-4
    batch_size: int = 8
    context_limit: int = 4096
    role_loss_weights: dict = field(
        default_factory=lambda: {"domain": 1.0, "function": 1.0, "assistant": 1.0}
    )

    def to_json_obj(self, overrides: Optional[dict] = None) -> dict:
        obj = asdict(self)
        obj["target_modules"] = list(self.target_modules)
        obj["overrides"] = dict(overrides or {})
        return obj

    @classmethod
    def with_overrides(cls, overrides: Optional[dict] = None) -> tuple["TrainingManifest", dict]:
        overrides = dict(overrides or {})
        base = asdict(cls())
        unknown = set(overrides) - set(base)
        if unknown:
            raise ExportError(f"unknown manifest overrides: {sorted(unknown)}")
        base.update(overrides)
        base["target_modules"] = tuple(base["target_modules"])
        return cls(**base), overrides


@dataclass
class ExportReport:
    samples: int = 0
    masked_token_share: float = 0.0
    skipped: list[str] = field(default_factory=list)


def export_dialogue(
    dialogue: SixRoleDialogue,
    context_limit: int = 4096,
    overflow_policy: str = "skip",
) -> list[list[MaskedMessage]]:
    """One masked message sequence per dialogue (the whole conversation).

    Dialogues whose chars/4 estimate exceeds the context limit are skipped
    or split into per-turn windows (system record + one turn's five
    messages) depending on overflow_policy.
    """
    sequence = [
        MaskedMessage(record.role, record.content, loss_weight(record.role))
        for record in dialogue.records
    ]
    estimate = sum(estimate_tokens(m.content) for m in sequence)
    if estimate <= context_limit:
        return [sequence]
    if overflow_policy == "skip":
        return []
    if overflow_policy == "split":
        system = sequence[0]
        rest = sequence[1:]
        windows = []
        for start in range(0, len(rest), 5):
            window = [system, *rest[start : start + 5]]
            if sum(estimate_tokens(m.content) for m in window) <= context_limit:
                windows.append(window)
        return windows
    raise ExportError(f"unknown overflow policy {overflow_policy!r}")


def export_split(
    split: CorpusSplit,
    out_dir: str | Path,
    manifest_overrides: Optional[dict] = None,
    overflow_policy: str = "skip",
) -> ExportReport:
    """Write <split>.jsonl plus manifest and report; deterministic by id."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest, overrides = TrainingManifest.with_overrides(manifest_overrides)

    report = ExportReport()
    masked_chars = 0
    total_chars = 0
    data_path = out_dir / f"{split.name}.jsonl"
    with data_path.open("w", encoding="utf-8") as handle:
        for dialogue in sorted(split.dialogues, key=lambda d: d.id):
            sequences = export_dialogue(
                dialogue, context_limit=manifest.context_limit, overflow_policy=overflow_policy
            )
            if not sequences:
                report.skipped.append(dialogue.id)
                continue
            for index, sequence in enumerate(sequences):
                sample_id = dialogue.id if len(sequences) == 1 else f"{dialogue.id}#{index}"
                handle.write(
                    json.dumps(
                        {
                            "id": sample_id,
                            "messages": [
                                {"role": m.role, "content": m.content, "loss": m.loss_weight}
                                for m in sequence
                            ],
                        }
                    )
                    + "\n"
                )
                report.samples += 1
                for m in sequence:
                    total_chars += len(m.content)
                    if m.loss_weight:
                        masked_chars += len(m.content)
    report.masked_token_share = masked_chars / total_chars if total_chars else 0.0

    (out_dir / MANIFEST_FILENAME).write_text(
        json.dumps(manifest.to_json_obj(overrides), indent=2) + "\n", encoding="utf-8"
    )
    (out_dir / REPORT_FILENAME).write_text(
        json.dumps(
            {
                "split": split.name,
                "samples": report.samples,
                "masked_token_share": report.masked_token_share,
                "skipped": report.skipped,
            },
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )
    return report


def read_export(path: str | Path) -> list[dict]:
    """Parse an exported JSONL file back into {"id", "messages"} objects."""
    samples = []
    with Path(path).open("r", encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            if "id" not in obj or "messages" not in obj:
                raise ExportError("exported sample missing id/messages")
            samples.append(obj)
    return samples
