"""Token-level loss masks derived from per-message weights.

Tokens inside weight-1 messages carry their role name in the mask; all
scaffolding (role headers, end tags, weight-0 content, padding) carries
None. The message boundary map comes from tokenizing each segment
separately, so alignment is exact by construction.
"""

from __future__ import annotations

from .data import END_TAG, Tokenizer, words


class MaskError(ValueError):
    """Raised when a sample yields no alignable content."""


def encode_sample(sample: dict, tokenizer: Tokenizer) -> tuple[list[int], list]:
    """Linearize one export sample into (token ids, per-token role mask).

    The mask entry is the message's role string for supervised (loss=1)
    content tokens and None everywhere else.
    """
    ids: list[int] = []
    mask: list = []
    for message in sample["messages"]:
        role, content, weight = message["role"], message["content"], message["loss"]
        header = tokenizer.encode([f"<|{role}|>"])
        ids.extend(header)
        mask.extend([None] * len(header))
        content_ids = tokenizer.encode(words(content))
        ids.extend(content_ids)
        mask.extend([role if weight == 1 else None] * len(content_ids))
        end = tokenizer.encode([END_TAG])
        ids.extend(end)
        mask.extend([None] * len(end))
    if not ids:
        raise MaskError("sample produced no tokens")
    return ids, mask


def build_token_masks(sample: dict, tokenizer: Tokenizer) -> list[int]:
    """0/1 mask aligned with encode_sample's token ids."""
    _, roles = encode_sample(sample, tokenizer)
    return [0 if role is None else 1 for role in roles]


def supervised_token_count(sample: dict, tokenizer: Tokenizer) -> int:
    return sum(build_token_masks(sample, tokenizer))
