"""Reference fine-tuning for six-role chat exports with per-role loss masks.

Consumes the exporter's JSONL ({"id", "messages": [{"role", "content",
"loss"}]}) and manifest JSON; trains low-rank adapters on the attention
query/value projections of a small causal LM with loss restricted to the
masked (domain/function/assistant) tokens.
"""

__version__ = "0.1.0"

from .data import Tokenizer, load_manifest, load_samples
from .masks import build_token_masks, encode_sample
from .model import TinyCausalLM, apply_low_rank_adapters
from .train import TrainerConfig, train

__all__ = [
    "Tokenizer",
    "TinyCausalLM",
    "TrainerConfig",
    "apply_low_rank_adapters",
    "build_token_masks",
    "encode_sample",
    "load_manifest",
    "load_samples",
    "train",
    "__version__",
]
