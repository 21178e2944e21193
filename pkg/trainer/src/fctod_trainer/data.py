"""Export-file loading and the word-level tokenizer.

Messages linearize with explicit role tags, matching the runtime encoding
convention (role tags embedded in text): <|role|> header, content, <|end|>.
The tokenizer is deterministic: vocabulary order follows first appearance in
the training data, specials first.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

ROLES = ("system", "user", "domain", "function", "observation", "assistant")
ROLE_TAGS = tuple(f"<|{role}|>" for role in ROLES)
END_TAG = "<|end|>"
PAD = "<pad>"
UNK = "<unk>"

_WORD = re.compile(r"\[value_[a-z_]+\]|<\|[a-z]+\|>|[A-Za-z0-9_']+|[^\sA-Za-z0-9_']")


class DataError(ValueError):
    """Raised for malformed export files or manifests."""


def load_samples(path: str | Path) -> list[dict]:
    samples = []
    with Path(path).open("r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            if "messages" not in obj:
                raise DataError(f"line {line_no}: sample missing 'messages'")
            for message in obj["messages"]:
                if message.get("role") not in ROLES:
                    raise DataError(f"line {line_no}: unknown role {message.get('role')!r}")
                if message.get("loss") not in (0, 1):
                    raise DataError(f"line {line_no}: loss must be 0 or 1")
            samples.append(obj)
    if not samples:
        raise DataError(f"{path}: no samples found")
    return samples


def load_manifest(path: str | Path) -> dict:
    manifest = json.loads(Path(path).read_text(encoding="utf-8"))
    required = {"lora_rank", "lora_alpha", "target_modules", "epochs",
                "learning_rate", "batch_size", "context_limit"}
    missing = required - set(manifest)
    if missing:
        raise DataError(f"manifest missing fields: {sorted(missing)}")
    return manifest


def words(text: str) -> list[str]:
    return _WORD.findall(text)


@dataclass
class Tokenizer:
    vocab: dict

    @classmethod
    def fit(cls, samples: list[dict]) -> "Tokenizer":
        vocab: dict[str, int] = {}
        for token in (PAD, UNK, END_TAG, *ROLE_TAGS):
            vocab[token] = len(vocab)
        for sample in samples:
            for message in sample["messages"]:
                for token in words(message["content"]):
                    if token not in vocab:
                        vocab[token] = len(vocab)
        return cls(vocab=vocab)

    def __len__(self) -> int:
        return len(self.vocab)

    @property
    def pad_id(self) -> int:
        return self.vocab[PAD]

    def encode(self, tokens: list[str]) -> list[int]:
        unk = self.vocab[UNK]
        return [self.vocab.get(token, unk) for token in tokens]
