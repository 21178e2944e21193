"""Small causal transformer with swappable low-rank adapters.

Attention projections are explicit named Linears (q_proj/k_proj/v_proj/
o_proj) so adapter targeting works by module name, matching the manifest's
target_modules list. Adapters freeze the wrapped weight and learn the usual
two low-rank factors scaled by alpha/rank.
"""

from __future__ import annotations

import math

import torch
from torch import nn


class LowRankAdapter(nn.Module):
    """y = W x + (alpha/rank) * B(A x), with W frozen."""

    def __init__(self, base: nn.Linear, rank: int, alpha: int):
        super().__init__()
        self.base = base
        for parameter in self.base.parameters():
            parameter.requires_grad = False
        self.rank = rank
        self.alpha = alpha
        self.scaling = alpha / rank
        self.down = nn.Linear(base.in_features, rank, bias=False)
        self.up = nn.Linear(rank, base.out_features, bias=False)
        nn.init.kaiming_uniform_(self.down.weight, a=math.sqrt(5))
        nn.init.zeros_(self.up.weight)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.base(x) + self.scaling * self.up(self.down(x))


class Attention(nn.Module):
    def __init__(self, d_model: int, n_heads: int):
        super().__init__()
        if d_model % n_heads:
            raise ValueError("d_model must divide evenly into heads")
        self.n_heads = n_heads
        self.head_dim = d_model // n_heads
        self.q_proj = nn.Linear(d_model, d_model)
        self.k_proj = nn.Linear(d_model, d_model)
        self.v_proj = nn.Linear(d_model, d_model)
        self.o_proj = nn.Linear(d_model, d_model)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        batch, length, d_model = x.shape

        def split(t):
            return t.view(batch, length, self.n_heads, self.head_dim).transpose(1, 2)

        q, k, v = split(self.q_proj(x)), split(self.k_proj(x)), split(self.v_proj(x))
        scores = q @ k.transpose(-2, -1) / math.sqrt(self.head_dim)
        causal = torch.triu(torch.ones(length, length, dtype=torch.bool, device=x.device), 1)
        scores = scores.masked_fill(causal, float("-inf"))
        mixed = torch.softmax(scores, dim=-1) @ v
        mixed = mixed.transpose(1, 2).contiguous().view(batch, length, d_model)
        return self.o_proj(mixed)


class Block(nn.Module):
    def __init__(self, d_model: int, n_heads: int):
        super().__init__()
        self.ln1 = nn.LayerNorm(d_model)
        self.attn = Attention(d_model, n_heads)
        self.ln2 = nn.LayerNorm(d_model)
        self.mlp = nn.Sequential(
            nn.Linear(d_model, 4 * d_model), nn.GELU(), nn.Linear(4 * d_model, d_model)
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = x + self.attn(self.ln1(x))
        return x + self.mlp(self.ln2(x))


class TinyCausalLM(nn.Module):
    def __init__(self, vocab_size: int, d_model: int = 64, n_heads: int = 2,
                 n_layers: int = 2, max_len: int = 512):
        super().__init__()
        self.max_len = max_len
        self.tok_emb = nn.Embedding(vocab_size, d_model)
        self.pos_emb = nn.Embedding(max_len, d_model)
        self.blocks = nn.ModuleList(Block(d_model, n_heads) for _ in range(n_layers))
        self.ln_f = nn.LayerNorm(d_model)
        self.lm_head = nn.Linear(d_model, vocab_size, bias=False)

    def forward(self, ids: torch.Tensor) -> torch.Tensor:
        if ids.size(1) > self.max_len:
            raise ValueError(f"sequence length {ids.size(1)} exceeds max_len {self.max_len}")
        positions = torch.arange(ids.size(1), device=ids.device)
        x = self.tok_emb(ids) + self.pos_emb(positions)[None, :, :]
        for block in self.blocks:
            x = block(x)
        return self.lm_head(self.ln_f(x))


def apply_low_rank_adapters(
    model: nn.Module, target_modules: list[str], rank: int, alpha: int
) -> int:
    """Freeze the base model and wrap every targeted Linear; returns count."""
    for parameter in model.parameters():
        parameter.requires_grad = False
    wrapped = 0
    for module in model.modules():
        for name, child in list(module.named_children()):
            if name in target_modules and isinstance(child, nn.Linear):
                setattr(module, name, LowRankAdapter(child, rank=rank, alpha=alpha))
                wrapped += 1
    if wrapped == 0:
        raise ValueError(f"no modules matched target_modules={target_modules}")
    return wrapped


def adapter_parameters(model: nn.Module):
    return [parameter for parameter in model.parameters() if parameter.requires_grad]


def adapter_state_dict(model: nn.Module) -> dict:
    return {
        key: value
        for key, value in model.state_dict().items()
        if ".down.weight" in key or ".up.weight" in key
    }
