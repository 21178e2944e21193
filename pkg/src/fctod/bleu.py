"""Corpus-level 4-gram BLEU with brevity penalty for delexicalized responses.

Tokenization lowercases and splits punctuation while keeping [value_xxx]
placeholders intact as single tokens. Zero n-gram precisions are smoothed
with a small epsilon (recorded here as a reproduction caveat, since no BLEU
variant is pinned upstream); an identity corpus scores exactly 100.0 and an
empty hypothesis corpus scores 0.0.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from typing import Iterable, Sequence

MAX_ORDER = 4
EPSILON = 1e-9

_TOKEN = re.compile(r"\[value_[a-z_]+\]|[a-z0-9]+|[^\sa-z0-9]")


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.casefold())


def _ngrams(tokens: Sequence[str], order: int) -> Counter:
    return Counter(
        tuple(tokens[i : i + order]) for i in range(len(tokens) - order + 1)
    )


def corpus_bleu(
    hypotheses: Iterable[str],
    references: Iterable[str],
) -> float:
    """BLEU on a 0-100 scale for aligned, equal-length response lists."""
    hypotheses = list(hypotheses)
    references = list(references)
    if not references:
        raise ValueError("reference set must be non-empty")
    if len(hypotheses) != len(references):
        raise ValueError(
            f"hypothesis/reference length mismatch: {len(hypotheses)} != {len(references)}"
        )

    clipped = [0] * MAX_ORDER
    totals = [0] * MAX_ORDER
    hyp_length = 0
    ref_length = 0
    for hypothesis, reference in zip(hypotheses, references):
        hyp_tokens = tokenize(hypothesis)
        ref_tokens = tokenize(reference)
        hyp_length += len(hyp_tokens)
        ref_length += len(ref_tokens)
        for order in range(1, MAX_ORDER + 1):
            hyp_counts = _ngrams(hyp_tokens, order)
            if not hyp_counts:
                continue
            ref_counts = _ngrams(ref_tokens, order)
            totals[order - 1] += sum(hyp_counts.values())
            clipped[order - 1] += sum(
                min(count, ref_counts[ngram]) for ngram, count in hyp_counts.items()
            )

    if hyp_length == 0:
        return 0.0

    log_sum = 0.0
    for order in range(MAX_ORDER):
        precision = clipped[order] / totals[order] if totals[order] else 0.0
        if precision == 0.0:
            precision = EPSILON
        log_sum += math.log(precision) / MAX_ORDER

    brevity = 1.0 if hyp_length >= ref_length else math.exp(1.0 - ref_length / hyp_length)
    return 100.0 * brevity * math.exp(log_sum)
